import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tikhonov_pd import diagnostics as dg
from tikhonov_pd.dynamics import PrimalDualState, SystemParams, TikhonovSchedule, tikhonov_field
from tikhonov_pd.errors import InsufficientDataError, InvalidArgumentError, PreconditionError
from tikhonov_pd.integrator import IntegrationConfig, integrate
from tikhonov_pd.problem import QuadraticProblem, ReferenceSolution, make_example1, make_random_qp, solve_reference_qp

ONES = np.ones(3)
finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@pytest.fixture(scope="module")
def e1():
    return make_example1(5, 1, 1)


@pytest.fixture(scope="module")
def e1_refs(e1):
    return e1.reference()


def params(alpha=13.0, rho=1.0, c=3.0, r=0.5):
    return SystemParams(alpha, rho, TikhonovSchedule(c, r))


def short_run(problem, p, t_end=10.0, samples=60, tol=(1e-8, 1e-6)):
    grid = np.geomspace(1.0, t_end, samples)
    y0 = np.ones(2 * problem.dim_primal + problem.dim_dual)
    return integrate(tikhonov_field(p, problem), y0, IntegrationConfig(1.0, t_end, *tol, sample_times=grid[1:-1]))


def test_energy_examples(e1, e1_refs):
    s = PrimalDualState(ONES, ONES, [1.0])
    assert dg.energy_E(1.0, s, e1_refs, params(), e1) == 325.5
    assert dg.energy_tilde(1.0, s, e1_refs, params(), e1) == 325.5
    assert dg.energy_hat(1.0, s, e1_refs, params(), e1) == 325.5
    rest = PrimalDualState(np.zeros(3), np.zeros(3), [0.0])
    assert dg.energy_E(3.0, rest, e1_refs, params(), e1) == 0.0
    assert dg.energy_tilde(3.0, rest, e1_refs, params(), e1) == 0.0


def test_energy_dimension_mismatch(e1, e1_refs):
    with pytest.raises(InvalidArgumentError):
        dg.energy_E(1.0, PrimalDualState(np.ones(2), np.ones(2), [1.0]), e1_refs, params(), e1)


def test_metrics_row_example(e1, e1_refs):
    row = dg.metrics_row(1.0, PrimalDualState(ONES, ONES, [1.0]), e1_refs, params(), e1)
    assert row.gap == 61.5
    assert row.obj_err == 49.0
    assert row.feas == 5.0
    assert row.vel_norm == pytest.approx(math.sqrt(3), rel=1e-15)
    assert row.grad_dev == pytest.approx(np.linalg.norm([70, 14, 14]), rel=1e-15)
    assert row.dist_min_norm == pytest.approx(math.sqrt(3), rel=1e-15)
    assert (row.energy_E, row.energy_tilde, row.energy_hat) == (325.5, 325.5, 325.5)
    assert dg.MetricRow.columns()[0] == "t" and len(row.values()) == 10


def test_metrics_row_zero_at_solution():
    qp = QuadraticProblem(2 * np.eye(2), [-2, -2], [[1, 1]], [1])
    refs = solve_reference_qp(qp)
    row = dg.metrics_row(2.0, PrimalDualState(refs.x_bar_star, np.zeros(2), refs.lambda_bar_star), refs,
                         params(), qp)
    for name in ("gap", "obj_err", "feas", "vel_norm", "grad_dev", "dist_min_norm"):
        assert abs(getattr(row, name)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(1.0, 200.0), st.integers(1, 5), arrays(float, 12, elements=finite),
       arrays(float, 12, elements=finite), arrays(float, 4, elements=finite))
def test_energy_identities(t, seed, x, v, lam):
    qp = make_random_qp(4, 12, seed)
    refs = solve_reference_qp(qp)
    p = params(alpha=5.0, c=2.0, r=1.3)
    s = PrimalDualState(x, v, lam)
    E, Et = dg.energy_E(t, s, refs, p, qp), dg.energy_tilde(t, s, refs, p, qp)
    assert E >= -1e-10
    assert abs(E - t * t * Et) <= 1e-12 * abs(E)

    bar = ReferenceSolution(refs.x_bar_star, refs.lambda_bar_star, refs.x_bar_star, refs.lambda_bar_star, refs.f_star)
    eps = p.schedule.epsilon(t)
    expected = dg.energy_tilde(t, s, bar, p, qp) - 0.5 * eps * float(refs.x_bar_star @ refs.x_bar_star)
    got = dg.energy_hat(t, s, refs, p, qp)
    assert abs(got - expected) <= 1e-12 * max(abs(expected), dg.energy_tilde(t, s, bar, p, qp))

    row = dg.metrics_row(t, s, refs, p, qp)
    assert row.gap >= -1e-10
    assert row.grad_dev**2 <= 2 * qp.lipschitz * row.gap + 1e-8 * (1 + row.gap)


def test_tikhonov_path_examples(e1, e1_refs):
    qp = e1.quadratic()
    for eps in (1.0, 1e-3):
        np.testing.assert_array_equal(dg.tikhonov_path_point(qp, e1_refs, 1.0, eps), 0.0)
    scalar = QuadraticProblem([[1.0]], [-1.0], np.zeros((0, 1)), [])
    refs = solve_reference_qp(scalar)
    for eps in (0.5, 2.0):
        for rho in (0.0, 3.0):
            assert dg.tikhonov_path_point(scalar, refs, rho, eps)[0] == pytest.approx(1 / (1 + eps), rel=1e-15)
    with pytest.raises(InvalidArgumentError):
        dg.tikhonov_path_point(scalar, refs, 1.0, 0.0)


@pytest.mark.parametrize("seed", range(1, 6))
def test_tikhonov_path_approaches_minimal_norm(seed):
    # a rank-deficient objective keeps the primal solution set non-trivial
    qp0 = make_random_qp(4, 10, seed)
    H = np.random.default_rng(seed).normal(size=(5, 10))
    qp = QuadraticProblem(H.T @ H, H.T @ np.ones(5), qp0.A, qp0.b)
    refs = solve_reference_qp(qp)
    grid = (1.0, 0.1, 0.01, 0.001)
    xs = [dg.tikhonov_path_point(qp, refs, 1.0, eps) for eps in grid]
    norms = [np.linalg.norm(x) for x in xs]
    bar = np.linalg.norm(refs.x_bar_star)
    for a, b in zip(norms, norms[1:]):
        assert a <= b + 1e-10
    assert max(norms) <= bar + 1e-10
    assert np.linalg.norm(xs[-1] - refs.x_bar_star) < np.linalg.norm(xs[0] - refs.x_bar_star)


def test_energy_bound_fast_run(e1, e1_refs):
    p = params(c=1.0, r=3.0)
    traj = short_run(e1, p)
    rep = dg.certificate_energy_bound(traj, e1_refs, p, e1)
    assert rep.holds and rep.max_violation <= rep.slack
    single = short_run(e1, p, t_end=1.5, samples=2)
    single.times, single.states = single.times[:1], single.states[:1]
    assert dg.certificate_energy_bound(single, e1_refs, p, e1).max_violation == 0.0


def test_energy_bound_on_qp_uses_nonzero_solution():
    qp = make_random_qp(3, 6, 2)
    refs = solve_reference_qp(qp)
    p = params(alpha=4.0, c=0.5, r=1.0)
    traj = short_run(qp, p, t_end=20.0)
    assert np.linalg.norm(refs.x_star) > 0.1
    assert dg.certificate_energy_bound(traj, refs, p, qp).holds
    assert dg.certificate_power_rate(traj, refs, p, qp, window=(1.0, 20.0)).holds


def test_certificate_preconditions(e1, e1_refs):
    traj = short_run(e1, params(alpha=2.5), t_end=2.0, samples=5)
    with pytest.raises(PreconditionError):
        dg.certificate_energy_bound(traj, e1_refs, params(alpha=2.5), e1)
    with pytest.raises(PreconditionError):
        dg.certificate_power_rate(traj, e1_refs, params(r=3.0), e1)
    with pytest.raises(PreconditionError):
        dg.certificate_viscosity(traj, e1.quadratic(), e1_refs, params(c=0.0))
    with pytest.raises(InsufficientDataError):
        dg.certificate_power_rate(traj, e1_refs, params(), e1, window=(50.0, 60.0))


def test_viscosity_slow_run(e1, e1_refs):
    p = params()
    rep = dg.certificate_viscosity(short_run(e1, p), e1.quadratic(), e1_refs, p)
    assert rep.holds


def test_viscosity_on_qp():
    qp = make_random_qp(3, 6, 5)
    refs = solve_reference_qp(qp)
    p = params(alpha=5.0, c=2.0, r=0.8)
    assert dg.certificate_viscosity(short_run(qp, p, t_end=20.0), qp, refs, p).holds


def test_rate_fit_examples():
    t = np.geomspace(1, 100, 50)
    assert dg.rate_fit(t, t**-2.0, (10, 100)) == pytest.approx(-2.0, abs=1e-10)
    assert dg.rate_fit(t, np.full_like(t, 3.0), (1, 100)) == pytest.approx(0.0, abs=1e-12)
    assert dg.rate_fit(t, 5 / t, (1, 100)) == pytest.approx(-1.0, abs=1e-10)
    with pytest.raises(InsufficientDataError):
        dg.rate_fit(t[:4], t[:4], (0, 100))


@settings(max_examples=50)
@given(st.floats(-4, 4), st.floats(0.01, 100))
def test_rate_fit_recovers_power(p, scale):
    t = np.geomspace(1, 100, 40)
    assert dg.rate_fit(t, scale * t**p, (1, 100)) == pytest.approx(p, abs=1e-9)


def test_tail_sup_and_running_integral():
    t = np.array([1.0, 10.0, 20.0, 40.0])
    v = np.array([5.0, 0.01, 0.005, 0.001])
    assert dg.tail_sup(t, v, 2.0, (10, 40)) == pytest.approx(2.0)
    with pytest.raises(InsufficientDataError):
        dg.tail_sup(t, v, 2.0, (50, 60))
    assert dg.running_integral([0.0, 1.0, 3.0], [0.0, 2.0, 2.0]) == 5.0
    assert dg.running_integral([1.0], [4.0]) == 0.0


def test_integration_slack():
    assert dg.integration_slack(0.0, 1e-3) == 1e-6
    assert dg.integration_slack(100.0, 1e-3) == pytest.approx(1.0 + 1.01e-4)
