"""Vector fields of the Tikhonov regularized primal-dual system and two comparators.

All systems are reduced to first order with ``v = x'``. The regularized system
and He-AVD carry ``(x, v, lam)``; Z-AVD is second order in the dual variable
as well and carries ``mu = lam'``.

Regularized system::

    x'' + (alpha/t) x' = -grad f(x) - A'lam - rho A'(Ax - b) - eps(t) x
    lam'               = t (A(x + t/(alpha-1) x') - b)
"""

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InvalidArgumentError
from .problem import ConstrainedProblem


class Regime(str, enum.Enum):
    FAST = "FAST"
    CRITICAL = "CRITICAL"
    SLOW = "SLOW"
    NONE = "NONE"


@dataclass(frozen=True)
class TikhonovSchedule:
    """Power-law regularization ``eps(t) = c / t**r``."""

    c: float
    r: float

    def __post_init__(self):
        if not self.c >= 0:
            raise InvalidArgumentError(f"schedule coefficient c must be >= 0, got {self.c}")
        if not self.r > 0:
            raise InvalidArgumentError(f"schedule exponent r must be > 0, got {self.r}")

    def evaluate(self, t: float) -> tuple:
        if not t > 0:
            raise DomainError(f"schedule evaluated at t={t}; requires t > 0")
        eps = self.c / t**self.r
        return eps, -self.r * eps / t

    def epsilon(self, t: float) -> float:
        return self.c / t**self.r

    def integral_s_eps(self, t0: float, t: float) -> float:
        """Closed form of the integral of ``s * eps(s)`` over ``[t0, t]``."""
        if self.r == 2:
            return self.c * np.log(t / t0)
        p = 2.0 - self.r
        return self.c * (t**p - t0**p) / p


def schedule_eval(s: TikhonovSchedule, t: float) -> tuple:
    """``(eps(t), eps'(t))``."""
    return s.evaluate(t)


def classify_schedule(s: TikhonovSchedule) -> Regime:
    if s.c == 0:
        return Regime.NONE
    if s.r > 2:
        return Regime.FAST
    if s.r == 2:
        return Regime.CRITICAL
    return Regime.SLOW


@dataclass(frozen=True)
class SystemParams:
    alpha: float
    rho: float
    schedule: TikhonovSchedule
    t0: float = 1.0

    def __post_init__(self):
        if not self.alpha > 1:
            raise InvalidArgumentError(f"alpha must be > 1, got {self.alpha}")
        if not self.rho >= 0:
            raise InvalidArgumentError(f"rho must be >= 0, got {self.rho}")
        if not self.t0 > 0:
            raise InvalidArgumentError(f"t0 must be > 0, got {self.t0}")


@dataclass(frozen=True, eq=False)
class PrimalDualState:
    """Phase point ``(x, v, lam)``, with ``mu = lam'`` for second-order duals.

    Also used for derivatives, in which case the fields hold ``(x', v', lam', mu')``.
    """

    x: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    mu: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("x", "v", "lam", "mu"):
            val = getattr(self, name)
            if val is None:
                continue
            arr = np.atleast_1d(np.asarray(val, dtype=float))
            if not np.all(np.isfinite(arr)):
                raise InvalidArgumentError(f"state component {name} has non-finite entries")
            object.__setattr__(self, name, arr)
        if self.v.shape != self.x.shape:
            raise InvalidArgumentError("x and v must have the same shape")
        if self.mu is not None and self.mu.shape != self.lam.shape:
            raise InvalidArgumentError("lam and mu must have the same shape")

    @property
    def has_mu(self) -> bool:
        return self.mu is not None

    def pack(self) -> np.ndarray:
        parts = [self.x, self.v, self.lam]
        if self.mu is not None:
            parts.append(self.mu)
        return np.concatenate(parts)

    @classmethod
    def unpack(cls, y, n: int, m: int, with_mu: bool = False) -> "PrimalDualState":
        y = np.asarray(y, dtype=float)
        expected = 2 * n + (2 if with_mu else 1) * m
        if y.shape != (expected,):
            raise InvalidArgumentError(f"packed state has shape {y.shape}, expected ({expected},)")
        mu = y[2 * n + m:] if with_mu else None
        return cls(y[:n], y[n:2 * n], y[2 * n:2 * n + m], mu)

    def __eq__(self, other):
        if not isinstance(other, PrimalDualState) or self.has_mu != other.has_mu:
            return NotImplemented
        return bool(np.array_equal(self.pack(), other.pack()))


# --------------------------------------------------------------------------
# Arithmetic kernels. The public rhs_* functions and the packed vector fields
# both go through these, so both paths produce identical floating point.


def _tikhonov(t, x, v, lam, alpha, rho, eps, problem):
    A, AT, b = problem.A, problem.AT, problem.b
    grad_l = problem.gradient(x) + AT @ lam
    dv = -(alpha / t) * v - grad_l - rho * (AT @ (A @ x - b)) - eps * x
    dlam = t * (A @ (x + (t / (alpha - 1.0)) * v) - b)
    return dv, dlam


def _he_avd(t, x, v, lam, alpha, beta, problem):
    A, AT, b = problem.A, problem.AT, problem.b
    grad_l = problem.gradient(x) + AT @ lam
    dv = -(alpha / t) * v - beta * grad_l
    dlam = beta * (t * (A @ (x + (t / (alpha - 1.0)) * v) - b))
    return dv, dlam


def _z_avd(t, x, v, lam, mu, alpha, theta, problem):
    A, AT, b = problem.A, problem.AT, problem.b
    damp = alpha / t
    dv = -damp * v - problem.gradient(x) - AT @ (lam + (theta * t) * mu) - AT @ (A @ x - b)
    dmu = -damp * mu + (A @ (x + (theta * t) * v) - b)
    return dv, dmu


def _check(t, state, problem, with_mu=False):
    if not t > 0:
        raise DomainError(f"vector field evaluated at t={t}; requires t > 0")
    n, m = problem.dim_primal, problem.dim_dual
    if state.x.shape != (n,) or state.lam.shape != (m,):
        raise InvalidArgumentError(
            f"state dimensions (n={state.x.shape[0]}, m={state.lam.shape[0]}) do not match problem (n={n}, m={m})"
        )
    if with_mu and state.mu is None:
        raise InvalidArgumentError("Z-AVD requires a state carrying mu = lam'")


def _check_positive(name, value):
    if not value > 0:
        raise InvalidArgumentError(f"{name} must be > 0, got {value}")


def rhs_tikhonov(t: float, state: PrimalDualState, params: SystemParams,
                 problem: ConstrainedProblem) -> PrimalDualState:
    """Time derivative of ``(x, v, lam)`` under the regularized system."""
    _check(t, state, problem)
    eps = params.schedule.epsilon(t)
    dv, dlam = _tikhonov(t, state.x, state.v, state.lam, params.alpha, params.rho, eps, problem)
    return PrimalDualState(state.v, dv, dlam)


def rhs_he_avd(t: float, state: PrimalDualState, alpha: float, beta: float,
               problem: ConstrainedProblem) -> PrimalDualState:
    """He-AVD with constant scaling ``beta`` and zero perturbation."""
    _check(t, state, problem)
    if not alpha > 1:
        raise InvalidArgumentError(f"alpha must be > 1, got {alpha}")
    _check_positive("beta", beta)
    dv, dlam = _he_avd(t, state.x, state.v, state.lam, alpha, beta, problem)
    return PrimalDualState(state.v, dv, dlam)


def rhs_z_avd(t: float, state: PrimalDualState, alpha: float, theta: float,
              problem: ConstrainedProblem) -> PrimalDualState:
    """Z-AVD; the returned derivative carries ``(x', v', lam', mu')``."""
    _check(t, state, problem, with_mu=True)
    _check_positive("alpha", alpha)
    _check_positive("theta", theta)
    dv, dmu = _z_avd(t, state.x, state.v, state.lam, state.mu, alpha, theta, problem)
    return PrimalDualState(state.v, dv, state.mu, dmu)


# --------------------------------------------------------------------------
# Packed vector fields for the integrator


def tikhonov_field(params: SystemParams, problem: ConstrainedProblem):
    n, m = problem.dim_primal, problem.dim_dual
    alpha, rho, epsilon = params.alpha, params.rho, params.schedule.epsilon

    def field(t, y):
        x, v, lam = y[:n], y[n:2 * n], y[2 * n:]
        dv, dlam = _tikhonov(t, x, v, lam, alpha, rho, epsilon(t), problem)
        return np.concatenate((v, dv, dlam))

    field.layout = (n, m, False)
    return field


def he_avd_field(alpha: float, beta: float, problem: ConstrainedProblem):
    if not alpha > 1:
        raise InvalidArgumentError(f"alpha must be > 1, got {alpha}")
    _check_positive("beta", beta)
    n, m = problem.dim_primal, problem.dim_dual

    def field(t, y):
        x, v, lam = y[:n], y[n:2 * n], y[2 * n:]
        dv, dlam = _he_avd(t, x, v, lam, alpha, beta, problem)
        return np.concatenate((v, dv, dlam))

    field.layout = (n, m, False)
    return field


def z_avd_field(alpha: float, theta: float, problem: ConstrainedProblem):
    _check_positive("alpha", alpha)
    _check_positive("theta", theta)
    n, m = problem.dim_primal, problem.dim_dual

    def field(t, y):
        x, v, lam, mu = y[:n], y[n:2 * n], y[2 * n:2 * n + m], y[2 * n + m:]
        dv, dmu = _z_avd(t, x, v, lam, mu, alpha, theta, problem)
        return np.concatenate((v, dv, mu, dmu))

    field.layout = (n, m, True)
    return field
