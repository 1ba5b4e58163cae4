"""Ensemble timesteppers: the coupled saddle-point scheme and the grad-div
penalized projection scheme, both advancing all J realizations with one
shared matrix factorization per linear solve.

Per time step the left-hand side is built from the ensemble mean (convecting
field), the mean viscosity, and the eddy-viscosity field computed from the
fluctuations; realizations differ only through right-hand sides and
Dirichlet lifts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import assembly
from .fespace import FESpace, FULL, P1, P1DISC, P2VEC, boundary_dofs, \
    dirichlet_values
from .linalg import ConstrainedSystem, compose_saddle, factorize
from .mesh import barycentric_refine, build_structured_mesh, \
    classify_boundary

COUPLED = "coupled"
SPP = "spp"
SCOTT_VOGELIUS = "scott-vogelius"
TAYLOR_HOOD = "taylor-hood"

DEFAULT_PAIRS = {COUPLED: SCOTT_VOGELIUS, SPP: TAYLOR_HOOD}


@dataclass(frozen=True)
class SchemeConfig:
    dt: float
    T: float
    scheme: str = COUPLED
    gamma: float = 0.0
    mu: float = 1.0
    pair: str = ""
    check_solves: bool = True

    def __post_init__(self):
        if self.dt <= 0 or self.T <= 0:
            raise ValueError("need dt > 0 and T > 0")
        if self.scheme not in (COUPLED, SPP):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.gamma < 0 or self.mu < 0:
            raise ValueError("gamma and mu must be nonnegative")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(f"T/dt = {steps} is not an integer")
        pair = self.pair or DEFAULT_PAIRS[self.scheme]
        if pair not in (SCOTT_VOGELIUS, TAYLOR_HOOD):
            raise ValueError(f"unknown element pair {pair!r}")
        object.__setattr__(self, "pair", pair)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


class ViscosityEnsemble:
    """Per-realization viscosity fields at quadrature points.

    Stores nu_j, the ensemble mean, the fluctuations, and the stability
    margins alpha_j = min(nu_bar) - max|nu'_j|.
    """

    def __init__(self, space: FESpace, nu):
        nu = np.asarray(nu, dtype=float)
        if nu.ndim == 1:  # constant per realization
            nu = np.broadcast_to(nu[:, None, None],
                                 (len(nu),) + space.wdet.shape).copy()
        if nu.ndim != 3 or nu.shape[1:] != space.wdet.shape:
            raise ValueError("viscosity array has wrong shape")
        if np.any(nu <= 0.0):
            j = int(np.flatnonzero(np.min(nu, axis=(1, 2)) <= 0)[0])
            raise ValueError(f"realization {j} has non-positive viscosity")
        self.nu = nu
        self.nu_bar = nu.mean(axis=0)
        self.nu_prime = nu - self.nu_bar
        self.nu_bar_min = float(self.nu_bar.min())
        self.prime_inf = np.max(np.abs(self.nu_prime), axis=(1, 2))
        self.alpha = self.nu_bar_min - self.prime_inf

    @property
    def J(self) -> int:
        return len(self.nu)

    @classmethod
    def from_constants(cls, space: FESpace, values) -> "ViscosityEnsemble":
        return cls(space, np.asarray(values, dtype=float))

    @classmethod
    def constant(cls, space: FESpace, value: float, J: int) -> "ViscosityEnsemble":
        return cls(space, np.full(J, float(value)))

    @classmethod
    def from_field(cls, space: FESpace, fields) -> "ViscosityEnsemble":
        """fields: iterable of callables (m, 2) points -> (m,) viscosities."""
        C, Q, _ = space.qpoints.shape
        flat = space.qpoints.reshape(-1, 2)
        nu = np.stack([np.asarray(f(flat), dtype=float).reshape(C, Q)
                       for f in fields])
        return cls(space, nu)


class EnsembleState:
    """Coefficient vectors of all realizations at one time level.

    velocities holds the working fields (the intermediate velocities for the
    projection scheme); proj_velocities the projected, discretely
    divergence-free fields when the projection scheme runs. The ensemble
    mean and fluctuations are recomputed at construction.
    """

    def __init__(self, n, t, velocities, pressures, proj_velocities=None):
        self.n = n
        self.t = t
        self.velocities = np.asarray(velocities, dtype=float)
        self.pressures = np.asarray(pressures, dtype=float)
        self.proj_velocities = None if proj_velocities is None else \
            np.asarray(proj_velocities, dtype=float)
        if not np.all(np.isfinite(self.velocities)):
            raise FloatingPointError("non-finite velocity state")
        self.mean = self.velocities.mean(axis=0)
        self.fluctuations = self.velocities - self.mean

    @property
    def J(self) -> int:
        return len(self.velocities)

    @property
    def output_velocities(self) -> np.ndarray:
        """The scheme's end-of-step velocities (projected when available)."""
        return self.velocities if self.proj_velocities is None \
            else self.proj_velocities


@dataclass
class StepDiagnostics:
    div_l2_max: float
    alpha_min: float
    bdiv_residual: float = 0.0       # ||B u|| on the enforced pressure rows
    contraction_gap: float = 0.0     # max_j (||u_proj|| - ||u_hat||), spp only
    solve_residual: float = 0.0


def build_spaces(problem, nx: int, ny: int | None = None,
                 pair: str = TAYLOR_HOOD, quad_degree: int = 5):
    """Structured mesh (tagged, barycentric-refined) plus element pair."""
    ny = nx if ny is None else ny
    base = build_structured_mesh(problem.domain, nx, ny, problem.holes)
    base = classify_boundary(base, problem.tag_rules)
    mesh = barycentric_refine(base)
    vspace = FESpace(mesh, P2VEC, quad_degree)
    pspace = FESpace(mesh, P1DISC if pair == SCOTT_VOGELIUS else P1,
                     quad_degree)
    return mesh, vspace, pspace


class _StepperBase:
    def __init__(self, vspace: FESpace, pspace: FESpace, problem,
                 cfg: SchemeConfig, visc: ViscosityEnsemble):
        if visc.J != problem.J:
            raise ValueError("viscosity ensemble size differs from problem's J")
        self.vspace = vspace
        self.pspace = pspace
        self.problem = problem
        self.cfg = cfg
        self.visc = visc
        self.J = problem.J

        self.mass = assembly.assemble_mass(vspace)
        self.div = assembly.assemble_div_coupling(vspace, pspace)
        self.graddiv = assembly.assemble_graddiv(vspace)
        self.pressure_mass = assembly.assemble_mass(pspace)
        self.pressure_weights = self.pressure_mass @ np.ones(pspace.n_dofs)
        self.area = float(self.pressure_weights.sum())
        self.bd = boundary_dofs(vspace, problem.dirichlet_tags, FULL)
        self.n_u = vspace.n_dofs
        self.n_p = pspace.n_dofs
        # cache: with eddy viscosity off, the diffusion operator is constant
        self._static_diffusion = (
            assembly.assemble_diffusion(vspace, visc.nu_bar)
            if cfg.mu == 0.0 else None)

    def initial_state(self) -> EnsembleState:
        u0 = np.stack([self.vspace.interpolate(self.problem.initial_velocity(j))
                       for j in range(self.J)])
        p0 = np.zeros((self.J, self.n_p))
        proj = u0.copy() if self.cfg.scheme == SPP else None
        return EnsembleState(0, 0.0, u0, p0, proj)

    def subtract_pressure_mean(self, p: np.ndarray) -> np.ndarray:
        mean = (self.pressure_weights @ p) / self.area
        return p - mean

    def _velocity_operator(self, state: EnsembleState):
        """Shared left-hand-side velocity block at the current level."""
        A = self.mass * (1.0 / self.cfg.dt)
        A = A + assembly.assemble_convection_skew(self.vspace, state.mean)
        if self._static_diffusion is not None:
            A = A + self._static_diffusion
        else:
            nu_t = assembly.compute_eev_coefficient(
                self.vspace, state.fluctuations, self.cfg.mu, self.cfg.dt)
            A = A + assembly.assemble_diffusion(
                self.vspace, self.visc.nu_bar + 2.0 * nu_t)
        return A

    def _lagged_rhs(self, state: EnsembleState, t_new: float) -> np.ndarray:
        """Per-realization right-hand sides (n_u, J), before the mass term."""
        rhs = np.empty((self.n_u, self.J))
        for j in range(self.J):
            f = self.problem.forcing(j) if self.problem.forcing else None
            rhs[:, j] = assembly.assemble_rhs_lagged(
                self.vspace, state.velocities[j], state.fluctuations[j],
                self.visc.nu_prime[j], f, t_new)
        return rhs

    def _boundary_values(self, bd, mode_bc_map, t_new: float) -> np.ndarray:
        g = np.empty((len(bd.dofs), self.J))
        for j in range(self.J):
            g[:, j] = dirichlet_values(bd, mode_bc_map(j), t_new)
        return g

    def div_l2_max(self, velocities) -> float:
        """max_j ||div u_j||_L2, evaluated pointwise at quadrature points.

        Pointwise evaluation keeps the roundoff floor near machine epsilon;
        the assembled quadratic form would drown the divergence-free cases
        in cancellation noise.
        """
        worst = 0.0
        for u in velocities:
            d = self.vspace.eval_vector_div(u)
            worst = max(worst, math.sqrt(max(float(
                np.einsum("cq,cq->", self.vspace.wdet, d * d)), 0.0)))
        return worst


class CoupledEnsembleStepper(_StepperBase):
    """One saddle solve per step advances every realization together."""

    def __init__(self, vspace, pspace, problem, cfg, visc):
        if cfg.scheme != COUPLED:
            raise ValueError("config does not select the coupled scheme")
        super().__init__(vspace, pspace, problem, cfg, visc)
        # unknowns: [velocity dofs | pressure dofs], one pressure dof pinned
        self.pin = self.n_u  # global index of the pinned pressure dof
        self.constrained = np.concatenate([self.bd.dofs, [self.pin]])

    def step(self, state: EnsembleState) -> tuple[EnsembleState, StepDiagnostics]:
        cfg = self.cfg
        t_new = state.t + cfg.dt
        A = self._velocity_operator(state)
        saddle = compose_saddle(A, self.div)
        system = ConstrainedSystem(saddle, self.constrained)

        rhs = np.zeros((self.n_u + self.n_p, self.J))
        rhs[:self.n_u] = self.mass @ (state.velocities.T / cfg.dt)
        rhs[:self.n_u] += self._lagged_rhs(state, t_new)
        g = np.zeros((len(self.constrained), self.J))
        g[:-1] = self._boundary_values(self.bd, self.problem.bc_map, t_new)

        X = system.solve_columns(rhs, g, check=cfg.check_solves)
        velocities = X[:self.n_u].T
        pressures = self.subtract_pressure_mean(X[self.n_u:]).T
        new = EnsembleState(state.n + 1, t_new, velocities, pressures)
        diag = StepDiagnostics(
            div_l2_max=self.div_l2_max(velocities),
            alpha_min=float(self.visc.alpha.min()))
        return new, diag


class ProjectionEnsembleStepper(_StepperBase):
    """Grad-div penalized velocity solve, then a divergence-free projection.

    The projection matrix is time-independent and factorized exactly once
    for the whole simulation.
    """

    def __init__(self, vspace, pspace, problem, cfg, visc):
        if cfg.scheme != SPP:
            raise ValueError("config does not select the projection scheme")
        super().__init__(vspace, pspace, problem, cfg, visc)
        self.bd2 = (self.bd if problem.step2_mode == FULL else
                    boundary_dofs(vspace, problem.dirichlet_tags,
                                  problem.step2_mode))
        self.pin = self.n_u
        constrained2 = np.concatenate([self.bd2.dofs, [self.pin]])
        proj_matrix = compose_saddle(self.mass * (1.0 / cfg.dt), self.div)
        self.projection = ConstrainedSystem(proj_matrix, constrained2)
        # pressure rows actually enforced by the projection (pin excluded)
        mask = np.ones(self.n_p, dtype=bool)
        mask[0] = False
        self._enforced_rows = np.flatnonzero(mask)
        self._recovery = None

    def _step2_values(self, t_new: float) -> np.ndarray:
        if self.problem.step2_mode == FULL:
            return self._boundary_values(self.bd, self.problem.bc_map, t_new)
        return self._boundary_values(self.bd2, self.problem.bc_map, t_new)

    def step(self, state: EnsembleState) -> tuple[EnsembleState, StepDiagnostics]:
        cfg = self.cfg
        t_new = state.t + cfg.dt

        # Step 1: penalized velocity solve, advected by the ensemble mean
        A = self._velocity_operator(state)
        if cfg.gamma > 0.0:
            A = A + cfg.gamma * self.graddiv
        step1 = ConstrainedSystem(A, self.bd.dofs)
        rhs1 = self.mass @ (state.proj_velocities.T / cfg.dt)
        rhs1 += self._lagged_rhs(state, t_new)
        g1 = self._boundary_values(self.bd, self.problem.bc_map, t_new)
        u_hat = step1.solve_columns(rhs1, g1, check=cfg.check_solves).T

        # Step 2: projection onto the discretely divergence-free fields
        rhs2 = np.zeros((self.n_u + self.n_p, self.J))
        rhs2[:self.n_u] = self.mass @ (u_hat.T / cfg.dt)
        g2 = np.zeros((len(self.projection.constrained), self.J))
        g2[:-1] = self._step2_values(t_new)
        X = self.projection.solve_columns(rhs2, g2, check=cfg.check_solves)
        u_tilde = X[:self.n_u].T
        pressures = self.subtract_pressure_mean(X[self.n_u:]).T

        new = EnsembleState(state.n + 1, t_new, u_hat, pressures, u_tilde)
        bres = max(np.linalg.norm((self.div @ u)[self._enforced_rows])
                   for u in u_tilde)
        gap = max(
            math.sqrt(max(float(ut @ (self.mass @ ut)), 0.0))
            - math.sqrt(max(float(uh @ (self.mass @ uh)), 0.0))
            for ut, uh in zip(u_tilde, u_hat))
        diag = StepDiagnostics(
            div_l2_max=self.div_l2_max(u_tilde),
            alpha_min=float(self.visc.alpha.min()),
            bdiv_residual=float(bres),
            contraction_gap=float(gap))
        return new, diag

    def recover_gamma_pressure(self, p_prev: np.ndarray,
                               u_hat: np.ndarray) -> np.ndarray:
        if self._recovery is None:
            self._recovery = GammaPressureRecovery(
                self.vspace, self.pspace,
                div=self.div, pressure_mass=self.pressure_mass)
        return self._recovery.recover(p_prev, u_hat, self.cfg.gamma)


class GammaPressureRecovery:
    """Recovered pressure for the projection scheme.

    recover(p_prev, u_hat, gamma) returns the mean-subtracted lagged
    pressure plus the pressure-space projection of -gamma * div(u_hat),
    renormalized to zero mean.
    """

    def __init__(self, vspace: FESpace, pspace: FESpace,
                 div=None, pressure_mass=None):
        self.div = assembly.assemble_div_coupling(vspace, pspace) \
            if div is None else div
        pm = assembly.assemble_mass(pspace) if pressure_mass is None \
            else pressure_mass
        self.weights = pm @ np.ones(pspace.n_dofs)
        self.area = float(self.weights.sum())
        self.mass_factor = factorize(pm.tocsc())

    def _zero_mean(self, p):
        return p - (self.weights @ p) / self.area

    def recover(self, p_prev: np.ndarray, u_hat: np.ndarray,
                gamma: float) -> np.ndarray:
        correction = self.mass_factor.solve(-gamma * (self.div @ u_hat))
        return self._zero_mean(self._zero_mean(p_prev) + correction)


def make_stepper(vspace, pspace, problem, cfg, visc):
    cls = CoupledEnsembleStepper if cfg.scheme == COUPLED \
        else ProjectionEnsembleStepper
    return cls(vspace, pspace, problem, cfg, visc)


def ensemble_energy(mass, state_or_fields, weights=None) -> float:
    """Kinetic energy quantity of interest.

    With collocation weights: sum_j w_j * (1/2)||u_j||^2 over the ensemble
    fields. Without weights: (1/2)||<u>||^2 of the ensemble mean.
    """
    if isinstance(state_or_fields, EnsembleState):
        fields = state_or_fields.output_velocities
        mean = state_or_fields.mean if state_or_fields.proj_velocities is None \
            else state_or_fields.proj_velocities.mean(axis=0)
    else:
        fields = np.asarray(state_or_fields, dtype=float)
        mean = fields.mean(axis=0)
    if weights is None:
        return 0.5 * float(mean @ (mass @ mean))
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(fields):
        raise ValueError("one weight per ensemble member required")
    return 0.5 * float(sum(w * (u @ (mass @ u))
                           for w, u in zip(weights, fields)))


@dataclass
class StabilityReport:
    alpha: np.ndarray
    flagged: np.ndarray          # alpha_j <= 0
    max_div_fluct: np.ndarray    # max over qp of |div u'_j|
    dt_bounds: np.ndarray        # alpha_j / max_div_fluct^2 (C treated as 1)

    @property
    def alpha_min(self) -> float:
        return float(self.alpha.min())


def stability_diagnostics(visc: ViscosityEnsemble, state: EnsembleState,
                          space: FESpace) -> StabilityReport:
    """Report the viscosity margins and the implied time-step bounds.

    Nothing is enforced; callers decide what to do with flagged entries.
    """
    max_div = np.empty(state.J)
    for j in range(state.J):
        d = space.eval_vector_div(state.fluctuations[j])
        max_div[j] = float(np.max(np.abs(d)))
    with np.errstate(divide="ignore"):
        bounds = np.where(max_div > 0, visc.alpha / max_div ** 2, np.inf)
    return StabilityReport(visc.alpha.copy(), visc.alpha <= 0.0,
                           max_div, bounds)
