"""Operator assembly for the ensemble timestepping schemes.

All assemblers return scipy CSR matrices with sorted, duplicate-free column
indices. Coefficient fields are plain (n_cells, n_qp) arrays of values at
the quadrature points of the owning space (scalars broadcast).

Vector-space matrices use the interleaved dof layout of FESpace: global dof
= 2*scalar_dof + component, so block-diagonal operators are Kronecker
expansions of their scalar counterparts.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .fespace import FESpace, P2VEC

# CoefficientField: values at quadrature points per cell, shape (C, Q)
CoefficientField = np.ndarray


def as_coefficient(space: FESpace, coeff) -> CoefficientField:
    """Broadcast a scalar, or pass through a per-quadrature-point array."""
    coeff = np.asarray(coeff, dtype=float)
    if coeff.ndim == 0:
        return np.broadcast_to(coeff, space.wdet.shape)
    if coeff.shape != space.wdet.shape:
        raise ValueError(
            f"coefficient shape {coeff.shape} != (cells, qp) {space.wdet.shape}")
    return coeff


def coefficient_from_function(space: FESpace, f) -> CoefficientField:
    """Sample f((m, 2) points) -> (m,) at all quadrature points."""
    C, Q, _ = space.qpoints.shape
    vals = np.asarray(f(space.qpoints.reshape(-1, 2)), dtype=float)
    return vals.reshape(C, Q)


def _scalar_csr(space: FESpace, elem: np.ndarray) -> sp.csr_matrix:
    """Scatter (C, nl, nl) element matrices into a scalar-dof CSR matrix."""
    nl = space.n_local
    rows = np.repeat(space.cell_dofs, nl, axis=1).ravel()
    cols = np.tile(space.cell_dofs, (1, nl)).ravel()
    A = sp.coo_matrix((elem.ravel(), (rows, cols)),
                      shape=(space.n_scalar, space.n_scalar)).tocsr()
    A.sort_indices()
    return A


_I2 = sp.identity(2, format="csr")


def _vectorize(S: sp.csr_matrix) -> sp.csr_matrix:
    """Expand a scalar operator to the interleaved vector layout."""
    return sp.kron(S, _I2, format="csr")


def assemble_mass(space: FESpace) -> sp.csr_matrix:
    """(u, v) mass matrix; vector spaces get the block-diagonal expansion."""
    elem = np.einsum("cq,iq,jq->cij", space.wdet, space.phi, space.phi)
    S = _scalar_csr(space, elem)
    return _vectorize(S) if space.components == 2 else S


def assemble_diffusion(space: FESpace, coeff,
                       allow_negative: bool = False) -> sp.csr_matrix:
    """(coeff * grad u, grad v) with a scalar coefficient field.

    System-matrix coefficients must be nonnegative (viscosity plus eddy
    viscosity); pass allow_negative for sign-indefinite research uses.
    """
    c = as_coefficient(space, coeff)
    if not np.all(np.isfinite(c)):
        raise ValueError("non-finite diffusion coefficient")
    if not allow_negative and c.min() < 0.0:
        raise ValueError(
            f"negative diffusion coefficient (min {c.min():.3e})")
    elem = np.einsum("cq,ciqd,cjqd->cij", space.wdet * c,
                     space.grad_phi, space.grad_phi)
    S = _scalar_csr(space, elem)
    return _vectorize(S) if space.components == 2 else S


def assemble_graddiv(space: FESpace) -> sp.csr_matrix:
    """(div u, div v) penalty operator on a vector space."""
    if space.kind != P2VEC:
        raise ValueError("grad-div needs a vector space")
    G = None
    for d in range(2):
        for c in range(2):
            elem = np.einsum("cq,ciq,cjq->cij", space.wdet,
                             space.grad_phi[:, :, :, d],
                             space.grad_phi[:, :, :, c])
            E = sp.csr_matrix(([1.0], ([d], [c])), shape=(2, 2))
            block = sp.kron(_scalar_csr(space, elem), E, format="csr")
            G = block if G is None else G + block
    G.sort_indices()
    return G


def assemble_convection_skew(space: FESpace, w) -> sp.csr_matrix:
    """Skew-symmetric convection N(w): rows test, cols trial.

    chi^T N(w) v equals (1/2)(w.grad v, chi) - (1/2)(w.grad chi, v) for the
    discrete fields; N is exactly skew by construction.
    """
    if space.kind != P2VEC:
        raise ValueError("convection needs a vector space")
    if len(w) != space.n_dofs:
        raise ValueError("advecting field has wrong length")
    wq = space.eval_vector(w)  # (C, Q, 2)
    a = np.einsum("cqd,cjqd->cjq", wq, space.grad_phi)  # w . grad(phi_j)
    T = np.einsum("cq,iq,cjq->cij", space.wdet, space.phi, a)
    S = _scalar_csr(space, 0.5 * T)
    S = S - S.T.tocsr()
    N = _vectorize(S)
    N.sort_indices()
    return N


def assemble_div_coupling(vspace: FESpace, pspace: FESpace) -> sp.csr_matrix:
    """B with (B u)_q = (q_h, div u_h); rows pressure dofs, cols velocity."""
    if vspace.mesh is not pspace.mesh:
        raise ValueError("velocity and pressure spaces must share a mesh")
    if vspace.kind != P2VEC:
        raise ValueError("div coupling needs a vector velocity space")
    B = None
    for comp in range(2):
        elem = np.einsum("cq,kq,cjq->ckj", vspace.wdet, pspace.phi,
                         vspace.grad_phi[:, :, :, comp])
        rows = np.repeat(pspace.cell_dofs, vspace.n_local, axis=1).ravel()
        cols = np.tile(vspace.cell_dofs, (1, pspace.n_local)).ravel()
        S = sp.coo_matrix((elem.ravel(), (rows, cols)),
                          shape=(pspace.n_scalar, vspace.n_scalar)).tocsr()
        E = sp.csr_matrix(([1.0], ([0], [comp])), shape=(1, 2))
        block = sp.kron(S, E, format="csr")
        B = block if B is None else B + block
    B.sort_indices()
    return B


def compute_eev_coefficient(space: FESpace, fluctuations, mu: float,
                            dt: float) -> CoefficientField:
    """Eddy-viscosity field mu*dt*sum_j |u'_j|^2 at quadrature points.

    fluctuations is a (J, n_dofs) array of the ensemble fluctuation fields.
    """
    if mu < 0 or dt <= 0:
        raise ValueError("need mu >= 0 and dt > 0")
    out = np.zeros(space.wdet.shape)
    for fl in fluctuations:
        v = space.eval_vector(fl)
        out += v[:, :, 0] ** 2 + v[:, :, 1] ** 2
    return mu * dt * out


def assemble_forcing(space: FESpace, f, t: float) -> np.ndarray:
    """(f(t), v) load vector; f maps ((m, 2) points, t) to (m, 2) values."""
    C, Q, _ = space.qpoints.shape
    fv = np.asarray(f(space.qpoints.reshape(-1, 2), t), dtype=float)
    if not np.all(np.isfinite(fv)):
        raise ValueError("non-finite forcing sample")
    fv = fv.reshape(C, Q, 2)
    return _accumulate_vector_rhs(
        space, np.einsum("cq,iq,cqk->cik", space.wdet, space.phi, fv))


def assemble_rhs_lagged(space: FESpace, u_n, fluct_n, nu_prime,
                        f=None, t: float = 0.0) -> np.ndarray:
    """Lagged right-hand side for one realization.

    Combines (f(t), v), minus the skew convection of u_n by its fluctuation,
    minus the fluctuating-viscosity diffusion of u_n:

        (f, v) - [ (1/2)(u'.grad u, v) - (1/2)(u'.grad v, u) ]
               - (nu' grad u, grad v)
    """
    contrib = np.zeros((space.mesh.n_cells, space.n_local, 2))
    if f is not None:
        fv = np.asarray(f(space.qpoints.reshape(-1, 2), t), dtype=float)
        if not np.all(np.isfinite(fv)):
            raise ValueError("non-finite forcing sample")
        fv = fv.reshape(space.qpoints.shape)
        contrib += np.einsum("cq,iq,cqk->cik", space.wdet, space.phi, fv)

    uq = space.eval_vector(u_n)             # (C, Q, 2)
    gq = space.eval_vector_grad(u_n)        # (C, Q, 2, 2)
    fq = space.eval_vector(fluct_n)         # (C, Q, 2)

    # -(1/2)(u'.grad u, v): (u'.grad u)_k = sum_d u'_d  du_k/dx_d
    adv = np.einsum("cqd,cqkd->cqk", fq, gq)
    contrib -= 0.5 * np.einsum("cq,iq,cqk->cik", space.wdet, space.phi, adv)
    # +(1/2)(u'.grad v, u): test function (phi_i e_k) gives (u'.grad phi_i) u_k
    fdotg = np.einsum("cqd,ciqd->ciq", fq, space.grad_phi)
    contrib += 0.5 * np.einsum("cq,ciq,cqk->cik", space.wdet, fdotg, uq)

    nu_p = as_coefficient(space, nu_prime)
    if np.any(nu_p):
        # -(nu' grad u, grad v)
        contrib -= np.einsum("cq,ciqd,cqkd->cik", space.wdet * nu_p,
                             space.grad_phi, gq)
    return _accumulate_vector_rhs(space, contrib)


def _accumulate_vector_rhs(space: FESpace, contrib: np.ndarray) -> np.ndarray:
    """Scatter (C, n_local, 2) contributions into an interleaved vector."""
    rhs = np.zeros(space.n_dofs)
    for comp in range(2):
        np.add.at(rhs, 2 * space.cell_dofs + comp, contrib[:, :, comp])
    return rhs
