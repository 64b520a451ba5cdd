"""Discrete-time plant simulators and reference machinery.

Contains the single-tank level process, a half-quadrotor surrogate (two
counter-rotating propellers on an arm, driven through a differential voltage
mixer), piecewise-constant schedules for setpoints and the outlet valve, and
the second-order joystick shaping filter.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, ScheduleError

TANK_LEVEL_MAX = 60.0


@dataclass
class TankState:
    """Tank level (clamped to [0, 60]) and simulation time."""

    y: float = 0.0
    t: float = 0.0


@dataclass(frozen=True)
class TankParams:
    """Single-tank process parameters.

    Level dynamics: ydot = (u - outflow_coeff * r * sqrt(y)) / inertia with
    r the outlet valve opening in percent.  Measurement noise is Gaussian
    with per-sample sigma = sqrt(noise_power / ts); set noise_sigma to
    override that convention directly.
    """

    outflow_coeff: float = 0.2700
    inertia: float = 5.0
    noise_power: float = 0.025
    noise_sigma: float | None = None
    ts: float = 0.1
    u_min: float = 0.0
    u_max: float = 70.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.outflow_coeff <= 0 or self.inertia <= 0 or self.ts <= 0:
            raise ConfigError("tank parameters must be positive")
        if self.noise_power < 0:
            raise ConfigError("noise power must be nonnegative")
        if self.u_min >= self.u_max:
            raise ConfigError("u_min must be below u_max")

    @property
    def sigma(self) -> float:
        if self.noise_sigma is not None:
            return self.noise_sigma
        return math.sqrt(self.noise_power / self.ts)


def tank_step(state: TankState, u: float, r: float, params: TankParams,
              noise_sample: float) -> tuple[TankState, float]:
    """Forward-Euler tank update; returns the new state and the measured level.

    The caller clamps u to [u_min, u_max] beforehand; the sqrt argument is
    clamped at zero to be robust against the level sitting on its bound.
    Noise corrupts the measurement only, never the stored state.
    """
    if not math.isfinite(state.y):
        raise FloatingPointError("tank state is not finite")
    ydot = (u - params.outflow_coeff * r * math.sqrt(max(state.y, 0.0))) \
        / params.inertia
    y_new = min(max(state.y + params.ts * ydot, 0.0), TANK_LEVEL_MAX)
    new_state = TankState(y=y_new, t=state.t + params.ts)
    return new_state, y_new + noise_sample


def sample_noise(params: TankParams, rng: np.random.Generator) -> float:
    """One measurement-noise draw from the dedicated seeded stream."""
    if params.sigma == 0.0:
        return 0.0
    return float(rng.normal(0.0, params.sigma))


class StepSchedule:
    """Right-continuous step function given as ordered (t_start, value) pairs."""

    def __init__(self, entries: Sequence[tuple[float, float]],
                 value_range: tuple[float, float] | None = None):
        if not entries:
            raise ScheduleError("schedule needs at least one entry")
        times = [t for t, _ in entries]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScheduleError("schedule times must strictly increase")
        if value_range is not None:
            lo, hi = value_range
            if any(not (lo < v < hi) for _, v in entries):
                raise ScheduleError(
                    f"schedule values must lie in ({lo}, {hi})")
        self.entries = tuple((float(t), float(v)) for t, v in entries)
        self._times = tuple(times)

    def value(self, t: float) -> float:
        idx = bisect_right(self._times, t)
        if idx == 0:
            raise ScheduleError(f"t={t} precedes the first schedule entry")
        return self.entries[idx - 1][1]


def schedule_value(schedule: StepSchedule, t: float) -> float:
    """Value of the last entry with t_start <= t."""
    return schedule.value(t)


def reference_schedule(entries: Sequence[tuple[float, float]]) -> StepSchedule:
    return StepSchedule(entries)


def valve_schedule(entries: Sequence[tuple[float, float]]) -> StepSchedule:
    """Outlet valve schedule; openings are percentages in (0, 100)."""
    return StepSchedule(entries, value_range=(0.0, 100.0))


@dataclass(frozen=True)
class AeroParams:
    """Half-quadrotor surrogate parameters.

    The arm obeys
        theta_ddot = gain_b*(v1 - v2) - damping_c*omega
                     - spring_k*theta + dist(t).

    gain_b defaults to a negative value: with the +/-10 V spin bias of the
    voltage mixer, a positive control must swing the measured angle negative
    for the production gain pair (alpha = 5, K_P = -10) to close a stable
    loop, mirroring the rig's encoder polarity.  spring_k models the pendulum
    restoring of the rig body; without it the mixer bias (|v1 - v2| >= 20 for
    every u) leaves the arm with no zero-torque input at all and any outage
    lets it drift without bound.
    """

    gain_b: float = -0.05
    damping_c: float = 1.0
    spring_k: float = 3.0
    ts: float = 0.01
    u_min: float = -14.0
    u_max: float = 14.0
    v_limit: float = 24.0
    noise_sigma: float = 0.0
    disturbance: Callable[[float], float] | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.damping_c <= 0 or self.ts <= 0 or self.v_limit <= 0:
            raise ConfigError("aero parameters must be positive")
        if self.spring_k < 0:
            raise ConfigError("spring_k must be nonnegative")
        if self.u_min >= self.u_max:
            raise ConfigError("u_min must be below u_max")

    @property
    def sigma(self) -> float:
        return self.noise_sigma


@dataclass
class AeroSurrogateState:
    """Arm angle (rad), angular rate (rad/s) and simulation time."""

    theta: float = 0.0
    omega: float = 0.0
    t: float = 0.0


def aero_voltage_map(u: float, v_limit: float = 24.0) -> tuple[float, float]:
    """Differential mixing of the single control onto both motor supplies.

    u >= 0 -> (10 + u, -10 - u); u < 0 -> (-10 + u, 10 - u); each voltage is
    then clamped to +/- v_limit.
    """
    if not math.isfinite(u):
        raise ConfigError("voltage map requires finite u")
    if u >= 0.0:
        v1, v2 = 10.0 + u, -10.0 - u
    else:
        v1, v2 = -10.0 + u, 10.0 - u
    v1 = min(max(v1, -v_limit), v_limit)
    v2 = min(max(v2, -v_limit), v_limit)
    return v1, v2


def aero_step(state: AeroSurrogateState, v1: float, v2: float, dt: float,
              params: AeroParams) -> AeroSurrogateState:
    """Semi-implicit Euler step of the surrogate arm dynamics."""
    dist = params.disturbance(state.t) if params.disturbance else 0.0
    acc = (params.gain_b * (v1 - v2) - params.damping_c * state.omega
           - params.spring_k * state.theta + dist)
    omega = state.omega + dt * acc
    theta = state.theta + dt * omega
    return AeroSurrogateState(theta=theta, omega=omega, t=state.t + dt)


@dataclass
class JoystickFilterState:
    """Two cascaded first-order lags shaping the operator input.

    Realizes the transfer function 1/(T s + 1)^2; x2 is the reference output
    and (x1 - x2)/T its exact derivative.
    """

    T: float
    x1: float = 0.0
    x2: float = 0.0

    def __post_init__(self):
        if self.T <= 0:
            raise ConfigError("joystick filter time constant must be positive")


def joystick_filter_step(state: JoystickFilterState, value: float,
                         dt: float) -> tuple[float, float, JoystickFilterState]:
    """Advance the shaping filter by dt under a constant input.

    Uses the exact zero-order-hold discretization of the double lag, so the
    sampled step response matches 1 - (1 + t/T) * exp(-t/T) to rounding.
    Returns (y_star, ydot_star, new_state).
    """
    T = state.T
    if T <= 0:
        raise ConfigError("joystick filter time constant must be positive")
    if dt > T / 10.0 + 1e-12:
        raise ConfigError("joystick filter requires dt <= T/10")
    q = math.exp(-dt / T)
    d1 = state.x1 - value
    d2 = state.x2 - value
    x1 = value + d1 * q
    x2 = value + (d2 + d1 * (dt / T)) * q
    new_state = JoystickFilterState(T=T, x1=x1, x2=x2)
    return x2, (x1 - x2) / T, new_state


# Production schedules for the tank testbed: the reference sweeps the whole
# admissible range while the outlet valve acts as an unmeasured disturbance.
TANK_REFERENCE = reference_schedule(
    [(0.0, 0.0), (10.0, 15.0), (80.0, 40.0), (100.0, 55.0),
     (130.0, 10.0), (180.0, 0.0)])
TANK_VALVE = valve_schedule([(0.0, 10.0), (30.0, 50.0), (120.0, 20.0)])

# Piecewise-constant arm-angle reference used by the aero scenarios.
AERO_REFERENCE = reference_schedule(
    [(0.0, 0.0), (50.0, 0.5), (100.0, -0.5), (150.0, 0.5), (200.0, 0.0)])
