"""Random inputs: truncated spectral viscosity fields, affine perturbation
ensembles, and sparse-grid collocation on nested Clenshaw-Curtis points.

Collocation points live in [-sqrt(3), sqrt(3)]^N with weights normalized for
the uniform density, so the coordinates have zero mean and unit variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

SQRT3 = math.sqrt(3.0)


def affine_perturbation_ensemble(J: int, variant: str) -> np.ndarray:
    """Perturbation coefficients k_j for the affine noise ensembles.

    variant "ceil": k_j = (-1)^(j+1) * 4*ceil(j/2)/J (alternating pairs);
    variant "linear": k_j = (2j - 1 - J) / floor(J/2), a symmetric ramp.
    """
    if J < 1:
        raise ValueError("need J >= 1")
    j = np.arange(1, J + 1)
    if variant == "ceil":
        return (-1.0) ** (j + 1) * 4.0 * np.ceil(j / 2.0) / J
    if variant == "linear":
        if J == 1:
            return np.zeros(1)
        return (2.0 * j - 1.0 - J) / np.floor(J / 2.0)
    raise ValueError(f"unknown perturbation variant {variant!r}")


def uniform_viscosity_sample(low: float, high: float, J: int,
                             seed: int = 42) -> np.ndarray:
    """Seeded U(low, high) draw of J constant viscosities."""
    if not (0.0 < low < high):
        raise ValueError("need 0 < low < high")
    rng = np.random.default_rng(seed)
    return rng.uniform(low, high, J)


# -- Karhunen-Loeve style viscosity field ------------------------------------

def kl_eigenvalue(k: int, l: float) -> float:
    """sqrt(xi_k) = (sqrt(pi)*l)^(1/2) * exp(-(k*pi*l)^2 / 8)."""
    if k < 1 or l <= 0:
        raise ValueError("need k >= 1 and l > 0")
    return math.sqrt(math.sqrt(math.pi) * l) * math.exp(-((k * math.pi * l) ** 2) / 8.0)


@dataclass(frozen=True)
class KLViscosity:
    """Truncated expansion nu(x, y) = scale * psi(x, y).

    psi(x, y) = c + (sqrt(pi) l / 2)^(1/2) y_1
              + sum_k sqrt(xi_k) [sin(k pi x1/L) sin(k pi x2/L) y_{2k}
                                  + cos(k pi x1/L) cos(k pi x2/L) y_{2k+1}]
    with q terms, stochastic dimension N = 2q + 1.
    """

    scale: float
    c: float = 1.0
    l: float = 0.01
    L: float = math.pi
    q: int = 2

    @property
    def dim(self) -> int:
        return 2 * self.q + 1

    def eigenvalues(self) -> np.ndarray:
        return np.array([kl_eigenvalue(k, self.l) for k in range(1, self.q + 1)])

    def mean(self) -> float:
        return self.scale * self.c

    def evaluate(self, x, y) -> np.ndarray:
        """Viscosity at points x (m, 2) for one sample y in R^N.

        Rejects samples that produce a non-positive viscosity anywhere.
        """
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dim,):
            raise ValueError(f"sample must have dimension {self.dim}")
        if np.any(np.abs(y) > SQRT3 + 1e-12):
            raise ValueError("sample coordinate outside [-sqrt(3), sqrt(3)]")
        x = np.asarray(x, dtype=float)
        psi = np.full(len(x), self.c)
        psi += math.sqrt(math.sqrt(math.pi) * self.l / 2.0) * y[0]
        for k in range(1, self.q + 1):
            ek = kl_eigenvalue(k, self.l)
            a1 = k * math.pi * x[:, 0] / self.L
            a2 = k * math.pi * x[:, 1] / self.L
            psi += ek * (np.sin(a1) * np.sin(a2) * y[2 * k - 1]
                         + np.cos(a1) * np.cos(a2) * y[2 * k])
        nu = self.scale * psi
        if np.any(nu <= 0.0):
            raise ValueError(
                f"non-positive viscosity (min {nu.min():.3e}) for sample {y}")
        return nu


def kl_viscosity_eval(kl: KLViscosity, x, y) -> np.ndarray:
    return kl.evaluate(x, y)


# -- Clenshaw-Curtis sparse grids ---------------------------------------------

@dataclass(frozen=True)
class SparseGrid:
    """Collocation points (n_points, N) and weights summing to one."""

    dim: int
    level: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.weights)

    def export_csv(self, path):
        header = "w," + ",".join(f"y{i+1}" for i in range(self.dim))
        lines = [header]
        for w, y in zip(self.weights, self.points):
            lines.append(",".join([f"{w:.17g}"] + [f"{v:.17g}" for v in y]))
        with open(path, "w", newline="\n") as f:
            f.write("\n".join(lines) + "\n")


def _cc_points(m: int) -> np.ndarray:
    if m == 1:
        return np.array([0.0])
    n = m - 1
    x = np.cos(np.arange(m) * np.pi / n)
    x[np.abs(x) < 1e-15] = 0.0
    return 0.5 * (x - x[::-1])  # enforce exact sign symmetry


def _cc_weights(m: int) -> np.ndarray:
    """Expectation weights (sum 1) of the m-point rule for U(-1, 1).

    Interpolatory weights are recovered exactly from the Chebyshev moments
    integral of T_k over [-1, 1]; rule sizes here stay small (m <= 17).
    """
    if m == 1:
        return np.array([1.0])
    x = _cc_points(m)
    V = np.polynomial.chebyshev.chebvander(x, m - 1).T
    moments = np.array([0.0 if k % 2 else 2.0 / (1.0 - k * k) for k in range(m)])
    w = np.linalg.lstsq(V, moments, rcond=None)[0]
    w = 0.5 * (w + w[::-1])  # symmetrize
    return 0.5 * w  # normalize: integral weights sum to 2


def _rule_size(level_1d: int) -> int:
    return 1 if level_1d == 0 else 2 ** level_1d + 1


def clenshaw_curtis_sparse_grid(N: int, level: int) -> SparseGrid:
    """Smolyak combination of nested Clenshaw-Curtis rules on [-sqrt3, sqrt3]^N.

    1D rule sizes grow 1, 3, 5, 9, 17 with the per-dimension level; the
    classic combination coefficients (-1)^(L-|l|) C(N-1, L-|l|) apply on the
    simplex max(0, L-N+1) <= |l| <= L.
    """
    if N < 1:
        raise ValueError("dimension must be >= 1")
    if level < 0 or level > 4:
        raise ValueError(f"unsupported sparse-grid level {level}")
    rules = {lv: (_cc_points(_rule_size(lv)), _cc_weights(_rule_size(lv)))
             for lv in range(level + 1)}

    acc: dict[tuple, float] = {}
    for idx in product(range(level + 1), repeat=N):
        s = sum(idx)
        if s > level or s < level - N + 1:
            continue
        coeff = (-1.0) ** (level - s) * math.comb(N - 1, level - s)
        pts = [rules[i][0] for i in idx]
        wts = [rules[i][1] for i in idx]
        for combo in product(*(range(len(p)) for p in pts)):
            key = tuple(pts[d][combo[d]] for d in range(N))
            w = coeff
            for d in range(N):
                w *= wts[d][combo[d]]
            acc[key] = acc.get(key, 0.0) + w

    keys = sorted(acc)
    points = SQRT3 * np.array(keys).reshape(len(keys), N)
    weights = np.array([acc[k] for k in keys])
    return SparseGrid(N, level, points, weights)


def expect_qoi(values, grid: SparseGrid) -> float:
    """Weighted quadrature expectation of a per-point quantity of interest."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_points,):
        raise ValueError(
            f"need {grid.n_points} values, got shape {values.shape}")
    return float(grid.weights @ values)
