"""Discrete norms and error functionals used by the convergence studies."""

from __future__ import annotations

import math

import numpy as np

from .fespace import FESpace


def quadratic_form(M, v) -> float:
    return float(v @ (M @ v))


def l2_norm(mass, v) -> float:
    return math.sqrt(max(quadratic_form(mass, v), 0.0))


def h1_seminorm(stiffness, v) -> float:
    return math.sqrt(max(quadratic_form(stiffness, v), 0.0))


def grad_error_sq(space: FESpace, u, grad_exact, t: float) -> float:
    """Integral of |grad u_h - grad u_exact|^2 via the space's quadrature."""
    gh = space.eval_vector_grad(u)
    ge = np.asarray(grad_exact(space.qpoints.reshape(-1, 2), t))
    diff = gh - ge.reshape(gh.shape)
    return float(np.einsum("cq,cqkd->", space.wdet, diff ** 2))


def scalar_diff_l2_sq(space_a: FESpace, a, space_b: FESpace, b) -> float:
    """Integral of (a_h - b_h)^2 for scalar fields on the same mesh.

    The spaces may differ (e.g. continuous vs discontinuous pressure); both
    are evaluated at the shared quadrature points.
    """
    if space_a.mesh is not space_b.mesh:
        raise ValueError("fields live on different meshes")
    va = space_a.eval_scalar(a)
    vb = space_b.eval_scalar(b)
    return float(np.einsum("cq,cq->", space_a.wdet, (va - vb) ** 2))


def time_l2(dt: float, squares) -> float:
    """(dt * sum of squared step norms)^(1/2)."""
    return math.sqrt(dt * float(np.sum(squares)))


def compute_rate(e_coarse: float, e_fine: float,
                 param_coarse: float, param_fine: float) -> float | None:
    """log(e_coarse/e_fine) / log(param_coarse/param_fine).

    Returns None (a blank table cell) when any input is non-positive or the
    parameters coincide.
    """
    if min(e_coarse, e_fine, param_coarse, param_fine) <= 0.0:
        return None
    if param_coarse == param_fine:
        return None
    return math.log(e_coarse / e_fine) / math.log(param_coarse / param_fine)
