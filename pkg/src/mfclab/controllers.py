"""Model-free control core: ultra-local model bookkeeping, the intelligent
proportional (iP) law, two sliding-window estimators of the lumped dynamics
term F, and a classic PI baseline with conditional-integration anti-windup.

Everything here is a pure function over explicit state values; nothing reads
clocks, sockets or global RNGs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InsufficientSamples, ValidationError
from .kernels import algebraic_f, closedloop_f

_SPACING_TOL = 1e-9


@dataclass(frozen=True)
class UltraLocalConfig:
    """Tuning of the ultra-local model ydot = F + alpha*u and its iP loop.

    alpha scales the control channel, kp is the proportional gain on the
    tracking error, tau is the length of the estimation window in seconds,
    ts the sampling period.  u_min/u_max bound the control after the iP law.
    """

    alpha: float
    kp: float
    tau: float
    ts: float
    u_min: float
    u_max: float

    def __post_init__(self):
        if not all(map(math.isfinite, (self.alpha, self.kp, self.tau,
                                       self.ts, self.u_min, self.u_max))):
            raise ConfigError("non-finite controller configuration")
        if self.alpha == 0.0:
            raise ConfigError("alpha must be nonzero")
        if self.tau <= 0.0 or self.ts <= 0.0:
            raise ConfigError("tau and ts must be positive")
        if self.tau < 2.0 * self.ts - 1e-12:
            raise ConfigError("tau must cover at least two sampling periods")
        if self.u_min >= self.u_max:
            raise ConfigError("u_min must be below u_max")
        # The estimators integrate over a uniform grid, so the horizon must
        # be an integer number of sampling periods.
        ratio = self.tau / self.ts
        if abs(ratio - round(ratio)) > 1e-6:
            raise ConfigError("tau must be an integer multiple of ts")

    @property
    def window_intervals(self) -> int:
        return round(self.tau / self.ts)

    def saturate(self, u: float) -> float:
        return min(max(u, self.u_min), self.u_max)


class SampleWindow:
    """Rolling buffer of uniformly spaced (t, y, u, e, ydot_star) samples.

    Holds one sample per sampling instant across the estimation horizon,
    endpoints included, so a full window spans exactly tau seconds.  A push
    whose timestamp is not one period after the previous sample clears the
    buffer first: the estimators only ever see a contiguous record.

    Storage is a mirrored ring (each value written twice, cap apart), which
    keeps the ordered window available as a contiguous zero-copy view.
    """

    def __init__(self, tau: float, ts: float):
        if tau <= 0 or ts <= 0:
            raise ConfigError("tau and ts must be positive")
        ratio = tau / ts
        if abs(ratio - round(ratio)) > 1e-6 or round(ratio) < 2:
            raise ConfigError("tau must be an integer multiple (>= 2) of ts")
        self.tau = float(tau)
        self.ts = float(ts)
        self.capacity = round(ratio) + 1
        n = self.capacity
        self._t = np.empty(2 * n)
        self._y = np.empty(2 * n)
        self._u = np.empty(2 * n)
        self._e = np.empty(2 * n)
        self._yds = np.empty(2 * n)
        self._tail = 0
        self._count = 0

    def __len__(self) -> int:
        return self._count

    @property
    def full(self) -> bool:
        return self._count == self.capacity

    def clear(self) -> None:
        self._tail = 0
        self._count = 0

    def push(self, t: float, y: float, u: float, e: float,
             ydot_star: float) -> None:
        if not all(map(math.isfinite, (t, y, u, e, ydot_star))):
            raise ValidationError("non-finite sample rejected")
        if self._count:
            last_t = self._t[(self._tail - 1) % self.capacity]
            if t <= last_t:
                raise ValidationError("sample timestamps must increase")
            if abs((t - last_t) - self.ts) > _SPACING_TOL:
                self.clear()
        slot = self._tail % self.capacity
        for arr, v in ((self._t, t), (self._y, y), (self._u, u),
                       (self._e, e), (self._yds, ydot_star)):
            arr[slot] = v
            arr[slot + self.capacity] = v
        self._tail += 1
        self._count = min(self._count + 1, self.capacity)

    def _view(self, arr: np.ndarray) -> np.ndarray:
        head = (self._tail - self._count) % self.capacity
        return arr[head:head + self._count]

    @property
    def times(self) -> np.ndarray:
        return self._view(self._t)

    @property
    def y(self) -> np.ndarray:
        return self._view(self._y)

    @property
    def u(self) -> np.ndarray:
        return self._view(self._u)

    @property
    def e(self) -> np.ndarray:
        return self._view(self._e)

    @property
    def ydot_star(self) -> np.ndarray:
        return self._view(self._yds)


@dataclass
class ControllerState:
    """Mutable state of one iP controller instance.

    While frozen (no fresh measurement delivered), f_est and last_u are left
    untouched by ticks.
    """

    window: SampleWindow
    f_est: float = 0.0
    last_u: float = 0.0
    frozen: bool = False


def ip_control(f_est: float, ydot_star: float, e: float,
               cfg: UltraLocalConfig) -> float:
    """Intelligent-proportional law u = -(f_est - ydot_star + kp*e)/alpha.

    Returns the raw control; the caller saturates to [u_min, u_max].
    """
    if not all(map(math.isfinite, (f_est, ydot_star, e))):
        raise ValidationError("non-finite input to ip_control")
    return -(f_est - ydot_star + cfg.kp * e) / cfg.alpha


def estimate_f_algebraic(window: SampleWindow, cfg: UltraLocalConfig) -> float:
    """Low-pass integral estimator of F from windowed y and u.

    F_est = -(6/tau^3) * integral_0^tau [(tau-2s)y(s) + alpha*s*(tau-s)u(s)] ds
    with s the local window coordinate and trapezoid quadrature on the
    uniformly sampled grid.
    """
    if not window.full:
        raise InsufficientSamples("window does not span the full horizon")
    return algebraic_f(window.y, window.u, window.ts, window.tau, cfg.alpha)


def estimate_f_closedloop(window: SampleWindow, cfg: UltraLocalConfig) -> float:
    """Windowed average F_est = (1/tau) * integral of (ydot* - alpha*u - kp*e)."""
    if not window.full:
        raise InsufficientSamples("window does not span the full horizon")
    return closedloop_f(window.ydot_star, window.u, window.e,
                        window.ts, window.tau, cfg.alpha, cfg.kp)


ESTIMATORS = {
    "algebraic": estimate_f_algebraic,
    "closedloop": estimate_f_closedloop,
}


@dataclass
class PiState:
    """State of the PI baseline u = kp_pi*e + ki_pi*integral(e).

    guard_enabled selects conditional-integration anti-windup: the integral
    is held on any step where the raw output is already past a bound and the
    current error would push it further out.
    """

    kp_pi: float
    ki_pi: float
    u_min: float
    u_max: float
    integral: float = 0.0
    windup_guard_active: bool = False
    guard_enabled: bool = True

    def __post_init__(self):
        if self.u_min >= self.u_max:
            raise ConfigError("u_min must be below u_max")


def pi_control(e: float, dt: float, state: PiState) -> float:
    """One PI step; returns the saturated control and updates the state."""
    if not math.isfinite(e):
        raise ValidationError("non-finite error input to pi_control")
    if dt <= 0:
        raise ValidationError("dt must be positive")
    raw = state.kp_pi * e + state.ki_pi * state.integral
    u = min(max(raw, state.u_min), state.u_max)
    winding_out = (raw > state.u_max and e > 0) or (raw < state.u_min and e < 0)
    if state.guard_enabled and winding_out:
        state.windup_guard_active = True
    else:
        state.windup_guard_active = False
        state.integral += e * dt
    return u
