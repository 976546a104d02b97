"""Explicit Runge-Kutta integration.

``integrate`` is the Bogacki-Shampine 3(2) pair (the method of MATLAB's
``ode23``) with FSAL, local extrapolation and cubic Hermite dense output.
``integrate_fixed_rk4`` is the classical fixed-step RK4, kept as an
independent oracle for order and cross-method checks.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import PrimalDualState
from .errors import DivergenceError, InvalidArgumentError, StepLimitError

# Bogacki-Shampine tableau
_C2, _C3 = 0.5, 0.75
_A21 = 0.5
_A32 = 0.75
_B1, _B2, _B3 = 2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0
# third-order weights minus embedded second-order weights (7/24, 1/4, 1/3, 1/8)
_E1, _E2, _E3, _E4 = -5.0 / 72.0, 1.0 / 12.0, 1.0 / 9.0, -1.0 / 8.0

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass
class IntegrationConfig:
    t_start: float
    t_end: float
    abs_tol: float = 1e-6
    rel_tol: float = 1e-3
    initial_step: Optional[float] = None
    max_steps: int = 10**6
    sample_times: Sequence[float] = ()

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise InvalidArgumentError(f"t_end={self.t_end} must exceed t_start={self.t_start}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise InvalidArgumentError("abs_tol and rel_tol must be positive")
        if self.initial_step is None:
            self.initial_step = (self.t_end - self.t_start) / 100.0
        if not self.initial_step > 0:
            raise InvalidArgumentError("initial_step must be positive")
        if int(self.max_steps) < 1:
            raise InvalidArgumentError("max_steps must be positive")
        s = np.asarray(self.sample_times, dtype=float).reshape(-1)
        if s.size:
            if s[0] <= self.t_start or s[-1] >= self.t_end:
                raise InvalidArgumentError("sample_times must lie strictly inside (t_start, t_end)")
            if np.any(np.diff(s) <= 0):
                raise InvalidArgumentError("sample_times must be strictly increasing")
        self.sample_times = s


@dataclass
class Trajectory:
    """Samples of an integrated trajectory.

    ``states[i]`` is the packed state at ``times[i]``; ``layout`` is
    ``(n, m, with_mu)`` when the vector field declared one.
    """

    times: np.ndarray
    states: np.ndarray
    accepted_steps: int = 0
    rejected_steps: int = 0
    layout: Optional[tuple] = None
    config: Optional[IntegrationConfig] = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> PrimalDualState:
        if self.layout is None:
            raise InvalidArgumentError("trajectory has no state layout")
        n, m, with_mu = self.layout
        return PrimalDualState.unpack(self.states[i], n, m, with_mu)

    def final(self) -> PrimalDualState:
        return self.state(len(self.times) - 1)


def _as_vector(state0):
    if isinstance(state0, PrimalDualState):
        return state0.pack()
    y = np.array(state0, dtype=float).reshape(-1)
    if not np.all(np.isfinite(y)):
        raise InvalidArgumentError("initial state has non-finite entries")
    return y


def integrate(rhs: Callable, state0, config: IntegrationConfig) -> Trajectory:
    """Adaptive Bogacki-Shampine integration sampled at ``config.sample_times``.

    Steps are accepted when ``max_i |err_i| / (abs_tol + rel_tol * max(|y_i|, |y_new_i|)) <= 1``.
    The returned trajectory holds ``t_start``, every sample time and ``t_end``.

    Raises
    ------
    StepLimitError
        ``max_steps`` attempts were used before reaching ``t_end``.
    DivergenceError
        A non-finite value appeared; ``last_time`` is the last accepted time.
    """
    y = _as_vector(state0)
    layout = getattr(rhs, "layout", None)
    t0, t_end = float(config.t_start), float(config.t_end)
    atol, rtol = config.abs_tol, config.rel_tol
    targets = list(config.sample_times) + [t_end]

    out_t = [t0]
    out_y = [y.copy()]
    counts = [0, 0]

    def partial():
        return Trajectory(np.array(out_t), np.array(out_y), counts[0], counts[1], layout, config)

    t = t0
    f = rhs(t, y)
    if not np.all(np.isfinite(f)):
        raise DivergenceError(f"non-finite derivative at t={t}", partial(), t)
    h = float(config.initial_step)
    k = 0
    attempts = 0
    while t < t_end:
        if attempts >= config.max_steps:
            raise StepLimitError(f"max_steps={config.max_steps} exhausted at t={t}", partial(), t)
        attempts += 1
        last = t + h >= t_end
        if last:
            h = t_end - t
        elif t + h == t:
            raise StepLimitError(f"step size underflow at t={t}", partial(), t)

        k1 = f
        k2 = rhs(t + _C2 * h, y + (_A21 * h) * k1)
        k3 = rhs(t + _C3 * h, y + (_A32 * h) * k2)
        y_new = y + h * (_B1 * k1 + _B2 * k2 + _B3 * k3)
        t_new = t_end if last else t + h
        k4 = rhs(t_new, y_new)

        err_vec = h * (_E1 * k1 + _E2 * k2 + _E3 * k3 + _E4 * k4)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float((np.abs(err_vec) / scale).max())
        if not (math.isfinite(err) and math.isfinite(float(y_new.sum()))):
            raise DivergenceError(f"non-finite state produced after t={t}", partial(), t)

        if err <= 1.0:
            while k < len(targets) and targets[k] <= t_new:
                s = targets[k]
                if s == t_new:
                    out_y.append(y_new.copy())
                else:
                    th = (s - t) / h
                    th2, th3 = th * th, th * th * th
                    out_y.append(
                        (2 * th3 - 3 * th2 + 1) * y
                        + ((th3 - 2 * th2 + th) * h) * k1
                        + (3 * th2 - 2 * th3) * y_new
                        + ((th3 - th2) * h) * k4
                    )
                out_t.append(s)
                k += 1
            t, y, f = t_new, y_new, k4
            counts[0] += 1
        else:
            counts[1] += 1

        if err == 0.0:
            factor = MAX_FACTOR
        else:
            factor = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** (-1.0 / 3.0)))
        h *= factor

    return Trajectory(np.array(out_t), np.array(out_y), counts[0], counts[1], layout, config)


def integrate_fixed_rk4(rhs: Callable, state0, t_start: float, t_end: float, step_count: int):
    """Classical RK4 with ``step_count`` uniform steps; returns the final state."""
    if int(step_count) < 1:
        raise InvalidArgumentError(f"step_count must be >= 1, got {step_count}")
    y = _as_vector(state0)
    N = int(step_count)
    h = (t_end - t_start) / N
    for i in range(N):
        t = t_start + i * h
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
        k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h * ((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite state at t={t + h}", None, t)
    if isinstance(state0, PrimalDualState):
        return PrimalDualState.unpack(y, state0.x.size, state0.lam.size, state0.has_mu)
    return y
