import math

import numpy as np
import pytest

from ensflow.experiments import run_benchmark, run_gamma_sweep, \
    run_scm_benchmark, run_spatial_sweep, run_temporal_sweep
from ensflow.norms import compute_rate, grad_error_sq
from ensflow.problems import manufactured_problem
from ensflow.schemes import build_spaces
from ensflow.stochastic import KLViscosity, uniform_viscosity_sample


# -- rate arithmetic -------------------------------------------------------------

def test_compute_rate_halving():
    assert compute_rate(4e-2, 1e-2, 0.25, 0.125) == pytest.approx(2.0)
    assert compute_rate(2e-3, 1e-3, 0.1, 0.05) == pytest.approx(1.0)


def test_compute_rate_equal_errors():
    assert compute_rate(5e-3, 5e-3, 0.1, 0.05) == pytest.approx(0.0)


def test_compute_rate_undefined_cases():
    assert compute_rate(0.0, 1e-3, 0.1, 0.05) is None
    assert compute_rate(1e-3, 1e-3, 0.1, 0.1) is None


# -- sweeps ----------------------------------------------------------------------

def test_gamma_sweep_rates_positive():
    result = run_gamma_sweep([1e1, 1e2], nx=4, dt=0.25, T=0.5, J=4,
                             eps=0.01, e_nu=0.01)
    assert result.rows[0].rate_u is None
    assert 0.7 <= result.rows[1].rate_u <= 1.2
    assert result.rows[1].err_u < result.rows[0].err_u
    # raw series: one entry per (gamma, step)
    assert len(result.series) == 2 * 2


def test_gamma_sweep_zero_gamma_row_blank():
    result = run_gamma_sweep([0.0, 1e1], nx=3, dt=0.5, T=0.5, J=2,
                             eps=0.01, e_nu=0.01)
    assert result.rows[0].rate_u is None
    assert result.rows[1].rate_u is None  # previous gamma is zero


def test_spatial_sweep_second_order():
    result = run_spatial_sweep([2, 4, 8], T=0.001, J=4, eps=0.01,
                               e_nu=0.01, gamma=1e6)
    rates = [r.rate_u for r in result.rows[1:]]
    for rate in rates:
        assert 1.8 <= rate <= 2.1
    assert result.rows[0].param == pytest.approx(0.5)


def test_temporal_sweep_first_order():
    result = run_temporal_sweep([0.5, 0.25, 0.125], nx=8, T=1.0, J=4,
                                eps=0.01, e_nu=0.01, gamma=1e5)
    for rate in (r.rate_u for r in result.rows[1:]):
        assert 0.8 <= rate <= 1.3


def test_gamma_sweep_same_pair_mode():
    """Same-pair comparison stays first order on the divergence-free pair.

    (With Taylor-Hood on both sides the discrepancy saturates instead: the
    large-gamma projection limit is pointwise divergence-free, which only
    coincides with the coupled solution when div X_h is contained in the
    pressure space.)
    """
    result = run_gamma_sweep([1e1, 1e2], nx=4, dt=0.25, T=0.5, J=4,
                             eps=0.01, e_nu=0.01,
                             coupled_pair="scott-vogelius",
                             spp_pair="scott-vogelius")
    assert 0.8 <= result.rows[1].rate_u <= 1.2


def test_sweep_threads_match_serial():
    kwargs = dict(nx=3, dt=0.5, T=0.5, J=2, eps=0.01, e_nu=0.01)
    serial = run_gamma_sweep([1e1, 1e2], threads=1, **kwargs)
    parallel = run_gamma_sweep([1e1, 1e2], threads=2, **kwargs)
    for a, b in zip(serial.rows, parallel.rows):
        assert a.err_u == b.err_u and a.err_p == b.err_p


def test_sweep_determinism():
    kwargs = dict(T=0.001, J=3, eps=0.01, e_nu=0.01, gamma=1e6, seed=7)
    r1 = run_spatial_sweep([2, 4], **kwargs)
    r2 = run_spatial_sweep([2, 4], **kwargs)
    assert [r.err_u for r in r1.rows] == [r.err_u for r in r2.rows]


def test_interpolation_only_pipeline_rate():
    """Interpolant of the exact solution as 'numerical solution': the error
    is pure interpolation error and must converge at second order."""
    nu = uniform_viscosity_sample(0.009, 0.011, 3)
    problem = manufactured_problem(0.01, 3, nu)
    fac = problem.mean_noise_factor()
    g0 = problem.exact_velocity_grad(0)
    a0 = 1.0 + problem.k[0] * problem.eps

    def grad_mean(x, t):
        return (fac / a0) * g0(x, t)

    errs = []
    for nx in (2, 4):
        mesh, vspace, _ = build_spaces(problem, nx)
        u0 = problem.exact_velocity(0)

        def mean_exact(x):
            return (fac / a0) * u0(x, 0.5)

        interp = vspace.interpolate(mean_exact)
        errs.append(math.sqrt(grad_error_sq(vspace, interp, grad_mean, 0.5)))
    rate = compute_rate(errs[0], errs[1], 0.5, 0.25)
    assert 1.8 <= rate <= 2.2


# -- benchmark drivers --------------------------------------------------------------

def test_benchmark_constant_viscosity_runs():
    sim, spaces, problem = run_benchmark(
        "tgv", "coupled", nx=4, dt=0.25, T=0.5, viscosity="constant",
        nu=0.01, J=1)
    assert sim.completed
    assert len(sim.energy) == 3
    assert sim.energy[-1] < sim.energy[0]


def test_benchmark_uniform_ensemble_runs():
    sim, spaces, problem = run_benchmark(
        "cavity", "spp", nx=4, dt=0.5, T=1.0, gamma=1e3, viscosity="uniform",
        e_nu=0.01, J=3, eps=0.01)
    assert sim.completed
    assert sim.bdiv_max <= 1e-10
    assert sim.contraction_gap_max <= 1e-12


def test_scm_benchmark_weighted_energy():
    kl = KLViscosity(scale=1e-3, c=1.0, l=0.01, L=math.pi, q=2)
    sim, grid, spaces, problem = run_scm_benchmark(
        "tgv", "coupled", nx=4, dt=0.5, T=1.0, level=1, kl=kl)
    assert grid.n_points == 11
    assert sim.completed
    assert len(sim.energy) == 3
    assert all(np.isfinite(sim.energy))


def test_scm_benchmark_rejects_nonpositive_viscosity():
    kl = KLViscosity(scale=1e-3, c=1e-4, l=0.5, L=math.pi, q=2)
    with pytest.raises(ValueError, match="collocation viscosity rejected"):
        run_scm_benchmark("tgv", "coupled", nx=3, dt=0.5, T=0.5,
                          level=1, kl=kl)


def test_timeseries_rows_shape():
    sim, _, _ = run_benchmark("tgv", "coupled", nx=3, dt=0.5, T=1.0,
                              viscosity="constant", nu=0.01, J=1)
    rows = sim.timeseries_rows()
    assert rows[0][0] == 0 and rows[-1][0] == 2
    assert len(rows[0]) == 5


def test_blowup_detection_reports_step(monkeypatch):
    """A run that turns non-finite stops and records the offending step."""
    import ensflow.experiments as exp

    calls = {"n": 0}
    real_energy = exp.ensemble_energy

    def exploding(mass, state, weights=None):
        calls["n"] += 1
        if calls["n"] >= 3:  # initial state + first step fine, then boom
            return float("inf")
        return real_energy(mass, state, weights)

    monkeypatch.setattr(exp, "ensemble_energy", exploding)
    sim, _, _ = run_benchmark("tgv", "coupled", nx=3, dt=0.25, T=1.0,
                              viscosity="constant", nu=0.01, J=1,
                              detect_blowup=True)
    assert sim.blowup_step == 2
    assert len(sim.energy) == 2  # rows up to the last finite step
