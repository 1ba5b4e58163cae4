import math

import numpy as np
import pytest

from ensflow.stochastic import KLViscosity, SQRT3, \
    affine_perturbation_ensemble, clenshaw_curtis_sparse_grid, expect_qoi, \
    kl_eigenvalue, kl_viscosity_eval, uniform_viscosity_sample


# -- eigenvalues -----------------------------------------------------------------

def test_kl_eigenvalue_value():
    # (sqrt(pi)*0.01)^(1/2) * exp(-(pi*0.01)^2/8)
    assert kl_eigenvalue(1, 0.01) == pytest.approx(0.13311711270144751,
                                                   rel=1e-12)


def test_kl_eigenvalue_monotone():
    for l in (0.005, 0.01, 0.3, 1.0):
        assert kl_eigenvalue(2, l) < kl_eigenvalue(1, l)


def test_kl_eigenvalue_vanishes_with_correlation_length():
    assert kl_eigenvalue(1, 1e-12) < 1e-5


def test_kl_eigenvalue_rejects_bad_args():
    with pytest.raises(ValueError):
        kl_eigenvalue(0, 0.01)


# -- viscosity field --------------------------------------------------------------

def make_kl(scale=1e-3, L=math.pi):
    return KLViscosity(scale=scale, c=1.0, l=0.01, L=L, q=2)


def test_kl_mean_sample():
    kl = make_kl()
    x = np.array([[0.3, 0.7], [1.0, 2.0]])
    nu = kl.evaluate(x, np.zeros(kl.dim))
    assert np.allclose(nu, 1e-3, atol=1e-18)
    assert kl.mean() == pytest.approx(1e-3)


def test_kl_origin_reduces_to_cosine_terms():
    kl = make_kl()
    y = np.array([0.5, 0.3, -0.2, 0.9, 0.4])
    nu = kl.evaluate(np.array([[0.0, 0.0]]), y)[0]
    expected = kl.scale * (1.0
                           + math.sqrt(math.sqrt(math.pi) * kl.l / 2) * y[0]
                           + kl_eigenvalue(1, kl.l) * y[2]
                           + kl_eigenvalue(2, kl.l) * y[4])
    assert nu == pytest.approx(expected, rel=1e-14)


def test_kl_rejects_nonpositive_sample():
    kl = KLViscosity(scale=1e-3, c=0.01, l=0.3, L=math.pi, q=2)
    y = np.full(kl.dim, -SQRT3)
    with pytest.raises(ValueError, match="non-positive viscosity"):
        kl.evaluate(np.array([[0.5, 0.5]]), y)


def test_kl_rejects_out_of_range_sample():
    kl = make_kl()
    with pytest.raises(ValueError):
        kl.evaluate(np.array([[0.0, 0.0]]), np.full(kl.dim, 2.0))


def test_kl_truncation_increment_bound():
    """Adding term q+1 changes psi by at most 2*sqrt(3)*scale*sqrt(xi_{q+1})."""
    x = np.random.default_rng(0).uniform(0, math.pi, (50, 2))
    y6 = np.random.default_rng(1).uniform(-SQRT3, SQRT3, 7)
    kl2 = KLViscosity(scale=1e-3, c=1.0, l=0.01, L=math.pi, q=2)
    kl3 = KLViscosity(scale=1e-3, c=1.0, l=0.01, L=math.pi, q=3)
    nu2 = kl2.evaluate(x, y6[:5])
    nu3 = kl3.evaluate(x, y6)
    bound = 2 * SQRT3 * 1e-3 * kl_eigenvalue(3, 0.01)
    assert np.abs(nu3 - nu2).max() <= bound + 1e-18


def test_kl_viscosity_eval_wrapper():
    kl = make_kl()
    x = np.array([[0.1, 0.2]])
    y = np.zeros(kl.dim)
    assert kl_viscosity_eval(kl, x, y)[0] == pytest.approx(1e-3)


# -- sparse grids -----------------------------------------------------------------

def test_grid_point_count_dim5_level1():
    grid = clenshaw_curtis_sparse_grid(5, 1)
    assert grid.n_points == 11


def test_grid_weights_sum_to_one():
    for N, level in ((1, 0), (1, 2), (3, 1), (5, 1), (2, 3), (5, 2)):
        grid = clenshaw_curtis_sparse_grid(N, level)
        assert abs(grid.weights.sum() - 1.0) <= 1e-13


def test_grid_1d_level1_matches_simpson():
    grid = clenshaw_curtis_sparse_grid(1, 1)
    order = np.argsort(grid.points[:, 0])
    pts = grid.points[order, 0]
    assert np.allclose(pts, [-SQRT3, 0.0, SQRT3], atol=1e-15)
    assert np.allclose(grid.weights[order], [1 / 6, 2 / 3, 1 / 6], atol=1e-15)
    # unit variance of U(-sqrt3, sqrt3) reproduced exactly
    assert expect_qoi(pts ** 2, grid) == pytest.approx(1.0, abs=1e-14)


def test_grid_symmetry():
    grid = clenshaw_curtis_sparse_grid(3, 2)
    table = {tuple(np.round(p, 12)): w
             for p, w in zip(grid.points, grid.weights)}
    for p, w in zip(grid.points, grid.weights):
        assert table[tuple(np.round(-p, 12))] == pytest.approx(w, abs=1e-15)


def test_grid_nestedness():
    for N in (1, 2, 3):
        coarse = clenshaw_curtis_sparse_grid(N, 1)
        fine = clenshaw_curtis_sparse_grid(N, 2)
        fine_set = {tuple(np.round(p, 12)) for p in fine.points}
        for p in coarse.points:
            assert tuple(np.round(p, 12)) in fine_set


def test_grid_moment_exactness():
    # level 1: all moments of total degree <= 1; level 2: degree <= 3
    g1 = clenshaw_curtis_sparse_grid(4, 1)
    assert abs(expect_qoi(np.ones(g1.n_points), g1) - 1.0) <= 1e-13
    for i in range(4):
        assert abs(expect_qoi(g1.points[:, i], g1)) <= 1e-13
        assert expect_qoi(g1.points[:, i] ** 2, g1) == pytest.approx(
            1.0, abs=1e-12)
    g2 = clenshaw_curtis_sparse_grid(3, 2)
    y = g2.points
    assert abs(expect_qoi(y[:, 0] ** 3, g2)) <= 1e-12
    assert abs(expect_qoi(y[:, 0] ** 2 * y[:, 1], g2)) <= 1e-12
    assert abs(expect_qoi(y[:, 0] * y[:, 1] * y[:, 2], g2)) <= 1e-12


def test_grid_rejects_unsupported_level():
    with pytest.raises(ValueError):
        clenshaw_curtis_sparse_grid(2, 5)


def test_grid_csv_export(tmp_path):
    grid = clenshaw_curtis_sparse_grid(2, 1)
    path = tmp_path / "grid.csv"
    grid.export_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "w,y1,y2"
    assert len(lines) == 1 + grid.n_points


# -- QoI expectation ---------------------------------------------------------------

def test_expect_constant():
    grid = clenshaw_curtis_sparse_grid(5, 1)
    assert expect_qoi(np.full(grid.n_points, 4.2), grid) == pytest.approx(4.2)


def test_expect_odd_function_vanishes():
    grid = clenshaw_curtis_sparse_grid(5, 1)
    assert abs(expect_qoi(grid.points[:, 0], grid)) <= 1e-13


def test_expect_length_mismatch():
    grid = clenshaw_curtis_sparse_grid(2, 1)
    with pytest.raises(ValueError):
        expect_qoi(np.ones(3), grid)


# -- perturbation coefficients ------------------------------------------------------

def test_ceil_formula_values():
    k = affine_perturbation_ensemble(20, "ceil")
    assert k[0] == pytest.approx(0.2)
    assert k[1] == pytest.approx(-0.2)
    assert k[18] == pytest.approx(4 * 10 / 20)  # j=19: ceil(19/2)=10, +sign
    assert abs(k.sum()) <= 1e-14


def test_linear_formula_values():
    k = affine_perturbation_ensemble(11, "linear")
    assert k[0] == pytest.approx(-2.0)
    assert k[5] == pytest.approx(0.0)
    assert k[10] == pytest.approx(2.0)


def test_unknown_variant():
    with pytest.raises(ValueError):
        affine_perturbation_ensemble(4, "geometric")


def test_zero_eps_gives_identical_realizations():
    k = affine_perturbation_ensemble(6, "ceil")
    data = (1.0 + 0.0 * k) * 2.5
    assert np.ptp(data) == 0.0


# -- uniform sampling ---------------------------------------------------------------

def test_uniform_sample_seeded_and_bounded():
    a = uniform_viscosity_sample(0.009, 0.011, 20, seed=42)
    b = uniform_viscosity_sample(0.009, 0.011, 20, seed=42)
    assert np.array_equal(a, b)
    assert a.min() >= 0.009 and a.max() <= 0.011
    c = uniform_viscosity_sample(0.009, 0.011, 20, seed=7)
    assert not np.array_equal(a, c)


def test_uniform_sample_rejects_bad_interval():
    with pytest.raises(ValueError):
        uniform_viscosity_sample(0.011, 0.009, 5)
