import math

import numpy as np
import pytest

from ensflow.problems import cavity_problem, manufactured_problem, \
    step_channel_problem, tgv_problem
from ensflow.stochastic import uniform_viscosity_sample

from oracles import fd_momentum_residual, integrate_2d, tgv_exact_energy


@pytest.fixture(scope="module")
def manufactured():
    nu = uniform_viscosity_sample(0.009, 0.011, 6, seed=42)
    return manufactured_problem(0.01, 6, nu), nu


def test_manufactured_point_value(manufactured):
    prob, _ = manufactured
    u = prob.exact_velocity(0)(np.array([[0.0, 0.0]]), 0.0)[0]
    a0 = 1.0 + prob.k[0] * prob.eps
    assert u == pytest.approx([a0 * 1.0, a0 * 2.0], rel=1e-14)


def test_manufactured_divergence_free(manufactured):
    prob, _ = manufactured
    g = prob.exact_velocity_grad(2)(
        np.random.default_rng(0).uniform(0, 1, (40, 2)), 0.7)
    div = g[:, 0, 0] + g[:, 1, 1]
    assert np.abs(div).max() == 0.0


def test_manufactured_forcing_residual(manufactured):
    """The hard-coded forcing satisfies the momentum equation pointwise."""
    prob, nu = manufactured
    rng = np.random.default_rng(1)
    for j in (0, 3, 5):
        u, p, f = (prob.exact_velocity(j), prob.exact_pressure(j),
                   prob.forcing(j))
        for _ in range(20):
            x = rng.uniform(0.05, 0.95, 2)
            t = rng.uniform(0.0, 1.0)
            res = fd_momentum_residual(u, p, f, nu[j], x, t)
            assert np.abs(res).max() <= 1e-6


def test_manufactured_boundary_matches_exact(manufactured):
    prob, _ = manufactured
    x = np.array([[0.0, 0.25], [1.0, 0.5]])
    bc = prob.boundary_value("dirichlet", 1)(x, 0.3)
    assert np.allclose(bc, prob.exact_velocity(1)(x, 0.3), atol=1e-15)


def test_manufactured_mean_noise_factor(manufactured):
    prob, _ = manufactured
    assert prob.mean_noise_factor() == pytest.approx(1.0, abs=1e-15)


# -- decaying vortex ----------------------------------------------------------------

def test_tgv_point_value():
    prob = tgv_problem(0.01)
    u = prob.exact_velocity(0)(np.array([[math.pi / 2, 0.0]]), 0.0)[0]
    assert u == pytest.approx([1.0, 0.0], abs=1e-15)


def test_tgv_divergence_cancellation():
    prob = tgv_problem(0.01)
    u_fn = prob.exact_velocity(0)
    h = 1e-6
    x = np.random.default_rng(2).uniform(0.2, 3.0, (20, 2))
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    div = (u_fn(x + ex, 0.5)[:, 0] - u_fn(x - ex, 0.5)[:, 0]
           + u_fn(x + ey, 0.5)[:, 1] - u_fn(x - ey, 0.5)[:, 1]) / (2 * h)
    assert np.abs(div).max() <= 1e-9


def test_tgv_solves_momentum_with_zero_forcing():
    nu = 0.004
    prob = tgv_problem(nu)
    u, p = prob.exact_velocity(0), prob.exact_pressure(0)
    rng = np.random.default_rng(3)
    for _ in range(15):
        x = rng.uniform(0.3, 2.8, 2)
        t = rng.uniform(0.0, 2.0)
        res = fd_momentum_residual(u, p, None, nu, x, t)
        assert np.abs(res).max() <= 1e-6


def test_tgv_energy_decay_factor():
    nu = 0.003
    prob = tgv_problem(nu)
    u_fn = prob.exact_velocity(0)
    for t in (0.0, 1.0, 2.5):
        energy = 0.5 * integrate_2d(
            lambda pts: (u_fn(pts, t) ** 2).sum(axis=1), prob.domain)
        assert energy == pytest.approx(tgv_exact_energy(nu, t), rel=1e-12)
    # decay by exp(-4 nu dt) over any interval
    assert tgv_exact_energy(nu, 2.0) / tgv_exact_energy(nu, 1.0) \
        == pytest.approx(math.exp(-4 * nu))


# -- channel over a step --------------------------------------------------------------

def test_step_inflow_profile():
    prob = step_channel_problem(0.01, 11)
    j_mid = 5  # k_6 = 0
    assert prob.k[j_mid] == pytest.approx(0.0)
    g = prob.boundary_value("inlet", j_mid)(np.array([[0.0, 5.0]]), 0.0)[0]
    assert g == pytest.approx([-1.0, 0.0])


def test_step_no_slip_compatibility_at_corners():
    prob = step_channel_problem(0.01, 11)
    x = np.array([[0.0, 0.0], [0.0, 10.0]])
    g = prob.boundary_value("inlet", 0)(x, 0.0)
    assert np.abs(g).max() <= 1e-14


def test_step_realization_span():
    prob = step_channel_problem(0.01, 11)
    x = np.array([[0.0, 5.0]])
    vals = [prob.boundary_value("inlet", j)(x, 0.0)[0, 0] for j in range(11)]
    assert min(vals) == pytest.approx(-1.02)
    assert max(vals) == pytest.approx(-0.98)


def test_step_initial_condition_extends_profile():
    prob = step_channel_problem(0.01, 11)
    x = np.array([[17.3, 5.0], [3.0, 2.0]])
    u0 = prob.initial_velocity(5)(x)
    assert u0[0] == pytest.approx([-1.0, 0.0])
    assert u0[1, 0] == pytest.approx(2.0 * (2.0 - 10.0) / 25.0)


def test_step_domain_and_hole():
    prob = step_channel_problem(0.01, 11)
    assert (prob.domain.width, prob.domain.height) == (40.0, 10.0)
    hole = prob.holes[0]
    assert (hole.x0, hole.x1) == (5.0, 6.0)


# -- lid-driven cavity -----------------------------------------------------------------

def test_cavity_lid_profile():
    prob = cavity_problem(0.01, 11)
    x = np.array([[0.0, 1.0], [-1.0, 1.0], [1.0, 1.0]])
    g = prob.boundary_value("lid", 7)(x, 0.0)
    amp = 1.0 + prob.k[7] * prob.eps
    assert g[0] == pytest.approx([amp, 0.0])
    assert np.abs(g[1:]).max() <= 1e-14


def test_cavity_boundary_continuity_at_corners():
    prob = cavity_problem(0.01, 5)
    corners = np.array([[-1.0, 1.0], [1.0, 1.0]])
    for j in range(5):
        lid = prob.boundary_value("lid", j)(corners, 0.0)
        wall = prob.boundary_value("wall", j)(corners, 0.0)
        assert np.abs(lid - wall).max() <= 1e-14


def test_cavity_zero_initial_state():
    prob = cavity_problem(0.01, 3)
    u0 = prob.initial_velocity(1)(np.random.uniform(-1, 1, (10, 2)))
    assert not u0.any()


def test_cavity_reynolds_scaling():
    # E[nu] = 2/15000 with L = 2 and U = 1 gives E[Re] = 15000
    e_nu = 2.0 / 15000.0
    assert 2.0 * 1.0 / e_nu == pytest.approx(15000.0)
