"""Lyapunov energies, convergence metrics and inequality certificates.

Three energies are tracked along a trajectory of the regularized system, for
a primal-dual optimal pair ``(x*, lam*)``::

    E(t)     = t^2 (gap + eps/2 |x|^2) + 1/2 |(alpha-1)(x - x*) + t v|^2
               + (alpha-1)/2 |lam - lam*|^2
    Etil(t)  = E(t) / t^2
    Ehat(t)  = Leps(x) - Leps(xbar) + 1/2 |(alpha-1)/t (x - xbar) + v|^2
               + (alpha-1)/(2 t^2) |lam - lambar|^2

with ``gap = L_rho(x, lam*) - L_rho(x*, lam*)`` and
``Leps(x) = L_rho(x, lambar) + eps/2 |x|^2`` built on the minimal-norm pair.
Certificates compare these against the bounds the convergence theory
guarantees, with an explicit slack for integration error.
"""

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .dynamics import PrimalDualState, SystemParams
from .errors import InsufficientDataError, InvalidArgumentError, NumericalError, PreconditionError
from .integrator import Trajectory
from .problem import ConstrainedProblem, QuadraticProblem, ReferenceSolution, augmented_lagrangian

VALUE_FLOOR = 1e-300


@dataclass(frozen=True)
class MetricRow:
    t: float
    gap: float
    obj_err: float
    feas: float
    vel_norm: float
    grad_dev: float
    dist_min_norm: float
    energy_E: float
    energy_tilde: float
    energy_hat: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def values(self):
        return [getattr(self, name) for name in self.columns()]


@dataclass(frozen=True)
class CertificateReport:
    holds: bool
    max_violation: float
    slack: float

    def to_dict(self):
        return asdict(self)


def _sq(v) -> float:
    return float(v @ v)


def _check_dims(state: PrimalDualState, problem: ConstrainedProblem):
    if state.x.shape != (problem.dim_primal,) or state.lam.shape != (problem.dim_dual,):
        raise InvalidArgumentError("state dimensions do not match the problem")


def _gap(problem, x, refs, rho):
    lam = refs.lambda_star
    return augmented_lagrangian(problem, x, lam, rho) - augmented_lagrangian(problem, refs.x_star, lam, rho)


def energy_E(t, state: PrimalDualState, refs: ReferenceSolution, params: SystemParams,
             problem: ConstrainedProblem) -> float:
    _check_dims(state, problem)
    a1 = params.alpha - 1.0
    eps = params.schedule.epsilon(t)
    gap = _gap(problem, state.x, refs, params.rho)
    mixed = a1 * (state.x - refs.x_star) + t * state.v
    return (t * t * (gap + 0.5 * eps * _sq(state.x)) + 0.5 * _sq(mixed)
            + 0.5 * a1 * _sq(state.lam - refs.lambda_star))


def _tilde(t, x, v, lam, x_ref, lam_ref, a1, offset):
    """Kinetic and dual parts shared by the two scaled energies."""
    mixed = (a1 / t) * (x - x_ref) + v
    return offset + 0.5 * _sq(mixed) + (a1 / (2.0 * t * t)) * _sq(lam - lam_ref)


def energy_tilde(t, state: PrimalDualState, refs: ReferenceSolution, params: SystemParams,
                 problem: ConstrainedProblem) -> float:
    _check_dims(state, problem)
    eps = params.schedule.epsilon(t)
    gap = _gap(problem, state.x, refs, params.rho)
    return _tilde(t, state.x, state.v, state.lam, refs.x_star, refs.lambda_star,
                  params.alpha - 1.0, gap + 0.5 * eps * _sq(state.x))


def regularized_lagrangian(problem, x, refs: ReferenceSolution, rho: float, eps: float) -> float:
    """``L_rho(x, lambar) + eps/2 |x|^2``."""
    return augmented_lagrangian(problem, x, refs.lambda_bar_star, rho) + 0.5 * eps * _sq(np.asarray(x))


def energy_hat(t, state: PrimalDualState, refs: ReferenceSolution, params: SystemParams,
               problem: ConstrainedProblem) -> float:
    _check_dims(state, problem)
    eps = params.schedule.epsilon(t)
    lam_bar = refs.lambda_bar_star
    offset = (augmented_lagrangian(problem, state.x, lam_bar, params.rho)
              - augmented_lagrangian(problem, refs.x_bar_star, lam_bar, params.rho)
              + 0.5 * eps * (_sq(state.x) - _sq(refs.x_bar_star)))
    return _tilde(t, state.x, state.v, state.lam, refs.x_bar_star, lam_bar, params.alpha - 1.0, offset)


def metrics_row(t, state: PrimalDualState, refs: ReferenceSolution, params: SystemParams,
                problem: ConstrainedProblem) -> MetricRow:
    _check_dims(state, problem)
    x = state.x
    return MetricRow(
        t=float(t),
        gap=_gap(problem, x, refs, params.rho),
        obj_err=abs(float(problem.objective(x)) - refs.f_star),
        feas=float(np.linalg.norm(problem.residual(x))),
        vel_norm=float(np.linalg.norm(state.v)),
        grad_dev=float(np.linalg.norm(problem.gradient(x) - problem.gradient(refs.x_star))),
        dist_min_norm=float(np.linalg.norm(x - refs.x_bar_star)),
        energy_E=energy_E(t, state, refs, params, problem),
        energy_tilde=energy_tilde(t, state, refs, params, problem),
        energy_hat=energy_hat(t, state, refs, params, problem),
    )


def metrics_table(trajectory: Trajectory, refs, params, problem) -> list:
    return [metrics_row(t, trajectory.state(i), refs, params, problem)
            for i, t in enumerate(trajectory.times)]


# --------------------------------------------------------------------------
# Tikhonov path


def tikhonov_path_point(qp: QuadraticProblem, refs: ReferenceSolution, rho: float, eps: float) -> np.ndarray:
    """Minimizer of ``L_rho(., lambar) + eps/2 |.|^2`` for a quadratic problem.

    Solves ``(M + rho A'A + eps I) x = -q - A'lambar + rho A'b``.
    """
    if not eps > 0:
        raise InvalidArgumentError(f"eps must be > 0, got {eps}")
    if not rho >= 0:
        raise InvalidArgumentError(f"rho must be >= 0, got {rho}")
    n = qp.dim_primal
    K = qp.M + rho * (qp.AT @ qp.A) + eps * np.eye(n)
    rhs = -qp.q - qp.AT @ refs.lambda_bar_star + rho * (qp.AT @ qp.b)
    try:
        return np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Tikhonov path solve failed at eps={eps}: {exc}") from exc


# --------------------------------------------------------------------------
# Certificates


def _rel_tol(trajectory):
    cfg = trajectory.config
    return cfg.rel_tol if cfg is not None else 1e-3


def integration_slack(base: float, rel_tol: float) -> float:
    """Slack for a bound anchored at ``base``: ``1e-6 (1 + base) + 10 rel_tol base``."""
    return 1e-6 * (1.0 + abs(base)) + 10.0 * rel_tol * abs(base)


def certificate_energy_bound(trajectory: Trajectory, refs: ReferenceSolution, params: SystemParams,
                             problem: ConstrainedProblem) -> CertificateReport:
    """Check ``E(t) <= E(t0) + (alpha-1)|x*|^2/2 * int_{t0}^t s eps(s) ds`` at every sample."""
    if params.alpha < 3:
        raise PreconditionError(f"energy bound requires alpha >= 3, got {params.alpha}")
    times = trajectory.times
    t0 = float(times[0])
    energies = np.array([energy_E(t, trajectory.state(i), refs, params, problem) for i, t in enumerate(times)])
    weight = 0.5 * (params.alpha - 1.0) * _sq(refs.x_star)
    bound = energies[0] + weight * np.array([params.schedule.integral_s_eps(t0, t) for t in times])
    slack = integration_slack(energies[0], _rel_tol(trajectory))
    worst = float(np.max(energies - bound))
    return CertificateReport(worst <= slack, worst, slack)


def certificate_power_rate(trajectory: Trajectory, refs: ReferenceSolution, params: SystemParams,
                           problem: ConstrainedProblem, window=(10.0, math.inf)) -> CertificateReport:
    """Rate bound for ``eps = c/t^r`` with ``0 < r <= 2`` over ``window``.

    For ``r < 2``: ``t^r Etil(t) <= t0^2 Etil(t0) + c (alpha-1) |x*|^2 / (2 (2 - r))``.
    For ``r = 2``: ``t^2 Etil(t) <= t0^2 Etil(t0) + c (alpha-1) |x*|^2 / 2 * ln(t/t0)``.
    """
    s = params.schedule
    if params.alpha < 3:
        raise PreconditionError(f"rate bound requires alpha >= 3, got {params.alpha}")
    if not (s.c > 0 and 0 < s.r <= 2):
        raise PreconditionError(f"rate bound requires c > 0 and 0 < r <= 2, got c={s.c}, r={s.r}")
    times = trajectory.times
    t0 = float(times[0])
    base = t0 * t0 * energy_tilde(t0, trajectory.state(0), refs, params, problem)
    weight = 0.5 * s.c * (params.alpha - 1.0) * _sq(refs.x_star)
    worst = -math.inf
    for i, t in enumerate(times):
        if not window[0] <= t <= window[1]:
            continue
        et = energy_tilde(t, trajectory.state(i), refs, params, problem)
        if s.r < 2:
            lhs, bound = t**s.r * et, base + weight / (2.0 - s.r)
        else:
            lhs, bound = t * t * et, base + weight * math.log(t / t0)
        worst = max(worst, lhs - bound)
    if worst == -math.inf:
        raise InsufficientDataError(f"no samples inside window {window}")
    slack = integration_slack(base, _rel_tol(trajectory))
    return CertificateReport(worst <= slack, worst, slack)


def certificate_viscosity(trajectory: Trajectory, qp: QuadraticProblem, refs: ReferenceSolution,
                          params: SystemParams) -> CertificateReport:
    """Check ``eps/2 (|x - x_eps|^2 + |x_eps|^2 - |xbar|^2) <= Leps(x) - Leps(xbar)``.

    Each sample may exceed by at most ``1e-8 (1 + |rhs|)``; the reported
    slack is the one at the worst sample.
    """
    if not params.schedule.c > 0:
        raise PreconditionError("viscosity certificate requires a schedule with c > 0")
    n = qp.dim_primal
    x_bar = refs.x_bar_star
    worst, worst_slack, holds = -math.inf, 0.0, True
    for t, y in zip(trajectory.times, trajectory.states):
        x = y[:n]
        eps = params.schedule.epsilon(t)
        x_eps = tikhonov_path_point(qp, refs, params.rho, eps)
        lhs = 0.5 * eps * (_sq(x - x_eps) + _sq(x_eps) - _sq(x_bar))
        rhs = (regularized_lagrangian(qp, x, refs, params.rho, eps)
               - regularized_lagrangian(qp, x_bar, refs, params.rho, eps))
        slack = 1e-8 * (1.0 + abs(rhs))
        holds = holds and lhs - rhs <= slack
        if lhs - rhs > worst:
            worst, worst_slack = lhs - rhs, slack
    return CertificateReport(holds, float(worst), worst_slack)


# --------------------------------------------------------------------------
# Rates


def rate_fit(times, values, window) -> float:
    """Least-squares slope of ``log(value)`` against ``log(t)`` inside ``window``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = (t >= window[0]) & (t <= window[1])
    if int(mask.sum()) < 5:
        raise InsufficientDataError(f"{int(mask.sum())} samples in window {tuple(window)}; need >= 5")
    lx = np.log(t[mask])
    ly = np.log(np.maximum(v[mask], VALUE_FLOOR))
    dx = lx - lx.mean()
    return float(dx @ (ly - ly.mean()) / (dx @ dx))


def tail_sup(times, values, power: float, window) -> float:
    """``sup t^power * value`` over samples inside ``window``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = (t >= window[0]) & (t <= window[1])
    if not mask.any():
        raise InsufficientDataError(f"no samples in window {tuple(window)}")
    return float(np.max(t[mask] ** power * v[mask]))


def running_integral(times, integrand) -> float:
    """Trapezoid rule over the samples."""
    t = np.asarray(times, dtype=float)
    g = np.asarray(integrand, dtype=float)
    if t.size < 2:
        return 0.0
    return float(np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(t)))


