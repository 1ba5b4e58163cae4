"""Benchmark flow problems: manufactured solution, decaying vortex,
channel over a step, and the regularized lid-driven cavity.

Each problem bundles the domain, boundary tagging rules, per-realization
initial/boundary data and forcing, and (when available) the closed-form
solution. Realization j carries the affine noise factor 1 + k_j * eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fespace import FULL, NORMAL
from .mesh import Rect
from .stochastic import affine_perturbation_ensemble


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain: Rect
    holes: tuple = ()
    tag_rules: dict = field(default_factory=dict)
    dirichlet_tags: tuple = ()
    step2_mode: str = NORMAL
    J: int = 1
    eps: float = 0.0
    k: np.ndarray = None
    boundary_value: object = None   # (tag, j) -> g(x, t) -> (m, 2)
    initial_velocity: object = None  # j -> g(x) -> (m, 2)
    forcing: object = None           # j -> f(x, t) -> (m, 2), or None
    exact_velocity: object = None    # j -> u(x, t) -> (m, 2)
    exact_pressure: object = None    # j -> p(x, t) -> (m,)
    exact_velocity_grad: object = None  # j -> (x, t) -> (m, 2, 2)

    def bc_map(self, j: int) -> dict:
        return {tag: self.boundary_value(tag, j) for tag in self.dirichlet_tags}

    def mean_noise_factor(self) -> float:
        """Average of (1 + k_j eps); scales the exact ensemble mean."""
        if self.k is None:
            return 1.0
        return 1.0 + self.eps * float(np.mean(self.k))


def _edge_predicates(domain: Rect):
    tol = 1e-9
    return {
        "left": lambda x, y: abs(x - domain.x0) < tol,
        "right": lambda x, y: abs(x - domain.x1) < tol,
        "bottom": lambda x, y: abs(y - domain.y0) < tol,
        "top": lambda x, y: abs(y - domain.y1) < tol,
    }


def manufactured_problem(eps: float, J: int, nu_sample) -> ProblemSpec:
    """Smooth analytic flow on the unit square with exact forcing.

    Velocity (cos x2 + (1+e^t) sin x2, sin x1 + (1+e^t) cos x1) and pressure
    sin(x1+x2)(1+e^t); realization j scales solution and data by 1 + k_j eps
    and carries its own constant viscosity nu_sample[j]. The forcing comes
    from substituting the scaled fields into the momentum equation, with the
    quadratic factor on the convection term.
    """
    nu_sample = np.asarray(nu_sample, dtype=float)
    if len(nu_sample) != J:
        raise ValueError("need one viscosity per realization")
    k = affine_perturbation_ensemble(J, "ceil")
    a = 1.0 + k * eps

    def velocity(j):
        def u(x, t):
            g = 1.0 + np.exp(t)
            return a[j] * np.column_stack([
                np.cos(x[:, 1]) + g * np.sin(x[:, 1]),
                np.sin(x[:, 0]) + g * np.cos(x[:, 0]),
            ])
        return u

    def velocity_grad(j):
        def gu(x, t):
            g = 1.0 + np.exp(t)
            out = np.zeros((len(x), 2, 2))
            out[:, 0, 1] = -np.sin(x[:, 1]) + g * np.cos(x[:, 1])
            out[:, 1, 0] = np.cos(x[:, 0]) - g * np.sin(x[:, 0])
            return a[j] * out
        return gu

    def pressure(j):
        def p(x, t):
            return a[j] * np.sin(x[:, 0] + x[:, 1]) * (1.0 + np.exp(t))
        return p

    def forcing(j):
        aj, nu = a[j], nu_sample[j]

        def f(x, t):
            E = np.exp(t)
            g = 1.0 + E
            s1, c1 = np.sin(x[:, 0]), np.cos(x[:, 0])
            s2, c2 = np.sin(x[:, 1]), np.cos(x[:, 1])
            u1 = c2 + g * s2
            u2 = s1 + g * c1
            # time derivative + convection + diffusion (-nu*lap u = +nu*u)
            f1 = aj * E * s2 + aj * aj * u2 * (-s2 + g * c2) + nu * aj * u1
            f2 = aj * E * c1 + aj * aj * u1 * (c1 - g * s1) + nu * aj * u2
            grad_p = aj * g * np.cos(x[:, 0] + x[:, 1])
            return np.column_stack([f1 + grad_p, f2 + grad_p])
        return f

    domain = Rect(0.0, 0.0, 1.0, 1.0)
    return ProblemSpec(
        name="manufactured", domain=domain,
        tag_rules={"dirichlet": lambda x, y: True},
        dirichlet_tags=("dirichlet",),
        step2_mode=FULL, J=J, eps=eps, k=k,
        boundary_value=lambda tag, j: velocity(j),
        initial_velocity=lambda j: (lambda x, _u=velocity(j): _u(x, 0.0)),
        forcing=forcing,
        exact_velocity=velocity,
        exact_pressure=pressure,
        exact_velocity_grad=velocity_grad,
    )


def tgv_problem(nu_ref: float, L: float = np.pi, J: int = 1) -> ProblemSpec:
    """Decaying-vortex flow on [0, L]^2 with zero forcing.

    The closed form solves the constant-viscosity momentum equation; for
    random-viscosity ensembles the same initial/boundary data are kept (with
    nu_ref, typically the mean viscosity, in the decay factor) and no exact
    solution is claimed.
    """

    def velocity(j):
        def u(x, t):
            d = np.exp(-2.0 * nu_ref * t)
            return np.column_stack([
                np.sin(x[:, 0]) * np.cos(x[:, 1]) * d,
                -np.cos(x[:, 0]) * np.sin(x[:, 1]) * d,
            ])
        return u

    def pressure(j):
        def p(x, t):
            d = np.exp(-4.0 * nu_ref * t)
            return 0.25 * (np.cos(2 * x[:, 0]) + np.cos(2 * x[:, 1])) * d
        return p

    domain = Rect(0.0, 0.0, L, L)
    return ProblemSpec(
        name="tgv", domain=domain,
        tag_rules={"dirichlet": lambda x, y: True},
        dirichlet_tags=("dirichlet",),
        step2_mode=NORMAL, J=J, eps=0.0, k=np.zeros(J),
        boundary_value=lambda tag, j: velocity(j),
        initial_velocity=lambda j: (lambda x, _u=velocity(j): _u(x, 0.0)),
        forcing=None,
        exact_velocity=velocity,
        exact_pressure=pressure,
    )


def step_channel_problem(eps: float, J: int) -> ProblemSpec:
    """40 x 10 channel with a unit square step 5 units from the inlet.

    Parabolic profile (1 + k_j eps) * (x2(x2-10)/25, 0) at inlet and outlet,
    no-slip on the walls and the step, and the profile extended over the
    whole domain as initial condition. Zero forcing.
    """
    k = affine_perturbation_ensemble(J, "linear")
    domain = Rect(0.0, 0.0, 40.0, 10.0)
    hole = Rect(5.0, 0.0, 6.0, 1.0)
    tol = 1e-9

    def profile(j):
        amp = 1.0 + k[j] * eps

        def g(x, t):
            out = np.zeros((len(x), 2))
            out[:, 0] = amp * x[:, 1] * (x[:, 1] - 10.0) / 25.0
            return out
        return g

    def zero(x, t):
        return np.zeros((len(x), 2))

    def on_step(x, y):
        return ((abs(x - 5.0) < tol or abs(x - 6.0) < tol) and y < 1.0 + tol) \
            or (abs(y - 1.0) < tol and 5.0 - tol < x < 6.0 + tol)

    rules = {
        "inlet": lambda x, y: abs(x - 0.0) < tol,
        "outlet": lambda x, y: abs(x - 40.0) < tol,
        "step": on_step,
        "wall": lambda x, y: (abs(y) < tol or abs(y - 10.0) < tol)
                             and not on_step(x, y),
    }

    def boundary_value(tag, j):
        if tag in ("inlet", "outlet"):
            return profile(j)
        return zero

    return ProblemSpec(
        name="step", domain=domain, holes=(hole,),
        tag_rules=rules,
        dirichlet_tags=("inlet", "outlet", "wall", "step"),
        step2_mode=NORMAL, J=J, eps=eps, k=k,
        boundary_value=boundary_value,
        initial_velocity=lambda j: (lambda x, _g=profile(j): _g(x, 0.0)),
        forcing=None,
    )


def cavity_problem(eps: float, J: int) -> ProblemSpec:
    """Regularized lid-driven cavity on [-1, 1]^2.

    Lid velocity (1 + k_j eps) * ((1 - x1^2)^2, 0) vanishes at the corners;
    the remaining walls are no-slip, the flow starts from rest, forcing is
    zero.
    """
    k = affine_perturbation_ensemble(J, "linear")
    domain = Rect(-1.0, -1.0, 1.0, 1.0)
    preds = _edge_predicates(domain)

    def lid(j):
        amp = 1.0 + k[j] * eps

        def g(x, t):
            out = np.zeros((len(x), 2))
            out[:, 0] = amp * (1.0 - x[:, 0] ** 2) ** 2
            return out
        return g

    def zero(x, t):
        return np.zeros((len(x), 2))

    rules = {
        "lid": preds["top"],
        "wall": lambda x, y: (preds["left"](x, y) or preds["right"](x, y)
                              or preds["bottom"](x, y)),
    }

    return ProblemSpec(
        name="cavity", domain=domain,
        tag_rules=rules,
        dirichlet_tags=("lid", "wall"),
        step2_mode=NORMAL, J=J, eps=eps, k=k,
        boundary_value=lambda tag, j: lid(j) if tag == "lid" else zero,
        initial_velocity=lambda j: (lambda x: np.zeros((len(x), 2))),
        forcing=None,
    )


PROBLEM_NAMES = ("manufactured", "tgv", "step", "cavity")
