"""Independent oracles for the test suite.

These deliberately avoid the code paths they check: integrals come from
tensor Gauss-Legendre quadrature over the rectangle (no triangles, no
reference-element tables), PDE residuals from central finite differences,
and the single-flow reference stepper assembles and solves its systems
without the ensemble stepper machinery.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from scipy.special import roots_legendre

from ensflow import assembly
from ensflow.fespace import FULL, boundary_dofs, dirichlet_values


def gauss_legendre_2d(rect, n=24):
    """Tensor Gauss-Legendre nodes/weights on a rectangle."""
    x, w = roots_legendre(n)
    xs = rect.x0 + 0.5 * (x + 1.0) * rect.width
    ys = rect.y0 + 0.5 * (x + 1.0) * rect.height
    wx = 0.5 * w * rect.width
    wy = 0.5 * w * rect.height
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(wx, wy)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return pts, W.ravel()


def integrate_2d(f, rect, n=24):
    pts, w = gauss_legendre_2d(rect, n)
    return float(w @ f(pts))


def trilinear_skew(w_fn, v_fn, grad_v_fn, chi_fn, grad_chi_fn, rect, n=24):
    """(1/2)(w.grad v, chi) - (1/2)(w.grad chi, v) by dense quadrature."""
    pts, wq = gauss_legendre_2d(rect, n)
    w = w_fn(pts)
    v = v_fn(pts)
    chi = chi_fn(pts)
    gv = grad_v_fn(pts)      # (m, 2, 2): dv_c/dx_d
    gchi = grad_chi_fn(pts)
    adv_v = np.einsum("md,mcd->mc", w, gv)
    adv_chi = np.einsum("md,mcd->mc", w, gchi)
    val = 0.5 * np.einsum("m,mc,mc->", wq, adv_v, chi) \
        - 0.5 * np.einsum("m,mc,mc->", wq, adv_chi, v)
    return float(val)


def fd_momentum_residual(u_fn, p_fn, f_fn, nu, x, t, h=1e-5):
    """f - (u_t + u.grad u - nu lap u + grad p) at one point by central FD.

    Constant viscosity; returns the two residual components.
    """
    x = np.asarray(x, dtype=float).reshape(1, 2)
    ex = np.array([[h, 0.0]])
    ey = np.array([[0.0, h]])

    u0 = u_fn(x, t)[0]
    ut = (u_fn(x, t + h)[0] - u_fn(x, t - h)[0]) / (2 * h)
    uxp, uxm = u_fn(x + ex, t)[0], u_fn(x - ex, t)[0]
    uyp, uym = u_fn(x + ey, t)[0], u_fn(x - ey, t)[0]
    du_dx = (uxp - uxm) / (2 * h)
    du_dy = (uyp - uym) / (2 * h)
    lap_u = (uxp + uxm + uyp + uym - 4 * u0) / h**2
    conv = u0[0] * du_dx + u0[1] * du_dy
    grad_p = np.array([
        (p_fn(x + ex, t)[0] - p_fn(x - ex, t)[0]) / (2 * h),
        (p_fn(x + ey, t)[0] - p_fn(x - ey, t)[0]) / (2 * h),
    ])
    f = f_fn(x, t)[0] if f_fn is not None else np.zeros(2)
    return f - (ut + conv - nu * lap_u + grad_p)


def tgv_exact_energy(nu, t, L=np.pi):
    """(1/2) integral of |u_exact|^2 over [0, L]^2 for the decaying vortex."""
    # integral of sin^2 x cos^2 y + cos^2 x sin^2 y over [0, L]^2 with L = pi
    return (L**2 / 4.0) * np.exp(-4.0 * nu * t)


class SingleFlowBackwardEuler:
    """Reference linearized backward-Euler stepper for one realization.

    Coupled velocity-pressure solve with strong Dirichlet data and a pinned
    pressure dof; assembles its systems directly and solves with spsolve,
    bypassing the ensemble stepper and its shared-factorization plumbing.
    """

    def __init__(self, vspace, pspace, nu, dt, bc_map, forcing=None):
        self.vspace = vspace
        self.pspace = pspace
        self.nu = nu
        self.dt = dt
        self.bc_map = bc_map
        self.forcing = forcing
        self.mass = assembly.assemble_mass(vspace)
        self.diff = assembly.assemble_diffusion(vspace, nu)
        self.B = assembly.assemble_div_coupling(vspace, pspace)
        self.bd = boundary_dofs(vspace, tuple(bc_map), FULL)
        n_u, n_p = vspace.n_dofs, pspace.n_dofs
        keep = np.ones(n_u + n_p, dtype=bool)
        keep[self.bd.dofs] = False
        keep[n_u] = False  # pinned pressure dof
        self.keep = np.flatnonzero(keep)
        self.n_u, self.n_p = n_u, n_p

    def step(self, u_n, t_new):
        A = self.mass * (1.0 / self.dt) \
            + assembly.assemble_convection_skew(self.vspace, u_n) + self.diff
        S = sp.bmat([[A, -self.B.T], [-self.B, None]], format="csc")
        rhs = np.zeros(self.n_u + self.n_p)
        rhs[:self.n_u] = self.mass @ (u_n / self.dt)
        if self.forcing is not None:
            rhs[:self.n_u] += assembly.assemble_forcing(
                self.vspace, self.forcing, t_new)
        g = dirichlet_values(self.bd, self.bc_map, t_new)
        full = np.zeros(self.n_u + self.n_p)
        full[self.bd.dofs] = g
        rhs_red = rhs[self.keep] - (S @ full)[self.keep]
        x = spsolve(S[self.keep][:, self.keep], rhs_red)
        full[self.keep] = x
        return full[:self.n_u], full[self.n_u:]


class SingleFlowAdvectDiffuse:
    """Velocity-only backward-Euler step (no incompressibility constraint)."""

    def __init__(self, vspace, nu, dt, bc_map, forcing=None):
        self.vspace = vspace
        self.nu = nu
        self.dt = dt
        self.bc_map = bc_map
        self.forcing = forcing
        self.mass = assembly.assemble_mass(vspace)
        self.diff = assembly.assemble_diffusion(vspace, nu)
        self.bd = boundary_dofs(vspace, tuple(bc_map), FULL)
        keep = np.ones(vspace.n_dofs, dtype=bool)
        keep[self.bd.dofs] = False
        self.keep = np.flatnonzero(keep)

    def step(self, u_n, t_new):
        A = self.mass * (1.0 / self.dt) \
            + assembly.assemble_convection_skew(self.vspace, u_n) + self.diff
        rhs = self.mass @ (u_n / self.dt)
        if self.forcing is not None:
            rhs += assembly.assemble_forcing(self.vspace, self.forcing, t_new)
        g = dirichlet_values(self.bd, self.bc_map, t_new)
        full = np.zeros(self.vspace.n_dofs)
        full[self.bd.dofs] = g
        rhs_red = rhs[self.keep] - (A.tocsc() @ full)[self.keep]
        x = spsolve(A.tocsc()[self.keep][:, self.keep], rhs_red)
        full[self.keep] = x
        return full
