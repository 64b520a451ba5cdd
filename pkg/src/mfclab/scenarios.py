"""Scenario catalog, run driver, metrics and CSV export.

Each named scenario is fully self-describing: the spec plus a seed fixes the
reference and valve schedules, loss pattern, gains and plant parameters, so
a run reproduces bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import plants
from .controllers import PiState, UltraLocalConfig
from .errors import ScenarioError
from .link import LinkEmulator, LossModel
from .loop import (AeroNode, JoystickReference, LoopSession, MfcController,
                   PiControllerNode, ScheduleReference, TankNode, TraceRecord,
                   UdpChannel, VirtualChannel, run_loop)

TANK_ALPHA = 0.1
TANK_KP = 0.5
TANK_TS = 0.1
TANK_TAU = 2.0
TANK_DURATION = 200.0
PI_KP = 29.69
PI_KI = 2.27009
PI_VALVE = 30.0

AERO_ALPHA = 5.0
AERO_KP = -10.0
AERO_TS = 0.01
AERO_TAU = 1.0
AERO_DURATION = 250.0

JOY_SCALE = 0.8
JOY_SCRIPT = ((0.0, 0.0), (20.0, 0.75), (70.0, -0.75), (120.0, 0.4),
              (170.0, 0.0))

# Invented outage placement for the aero/joystick cut scenarios (the rig
# experiments report "long cuts" without printing times).
AERO_CUTS_F1 = ((60.0, 80.0), (150.0, 170.0))
AERO_CUTS_F2 = ((110.0, 125.0),)


@dataclass(frozen=True)
class JoystickConfig:
    T: float
    scale: float = JOY_SCALE
    script: tuple[tuple[float, float], ...] = JOY_SCRIPT


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    testbed: str                    # "tank" | "aero"
    controller: str                 # "mfc" | "pi"
    duration: float
    seed: int = 0
    # Default to the integral estimator: feeding the loop's own iP output
    # back through the closed-loop average makes its integrand collapse to
    # F_est identically, so that estimator cannot anchor the steady state.
    estimator: str = "algebraic"
    loss: LossModel = field(default_factory=LossModel)
    ulc: UltraLocalConfig | None = None
    pi_gains: tuple[float, float] | None = None
    reference: tuple[tuple[float, float], ...] | None = None
    valve: tuple[tuple[float, float], ...] | None = None
    joystick: JoystickConfig | None = None
    tank: plants.TankParams | None = None
    aero: plants.AeroParams | None = None
    description: str = ""

    def as_text(self) -> str:
        lines = [
            f"name: {self.name}",
            f"description: {self.description}",
            f"testbed: {self.testbed}",
            f"controller: {self.controller}",
            f"estimator: {self.estimator}",
            f"duration_s: {self.duration:.9g}",
            f"seed: {self.seed}",
            f"loss.p_fault1: {self.loss.p_fault1:.9g}",
            f"loss.p_fault2: {self.loss.p_fault2:.9g}",
            f"loss.cuts_fault1: {list(self.loss.cuts_fault1)}",
            f"loss.cuts_fault2: {list(self.loss.cuts_fault2)}",
        ]
        if self.ulc:
            lines += [f"ulc.alpha: {self.ulc.alpha:.9g}",
                      f"ulc.kp: {self.ulc.kp:.9g}",
                      f"ulc.tau: {self.ulc.tau:.9g}",
                      f"ulc.ts: {self.ulc.ts:.9g}",
                      f"ulc.u_min: {self.ulc.u_min:.9g}",
                      f"ulc.u_max: {self.ulc.u_max:.9g}"]
        if self.pi_gains:
            lines += [f"pi.kp: {self.pi_gains[0]:.9g}",
                      f"pi.ki: {self.pi_gains[1]:.9g}"]
        if self.reference:
            lines.append(f"reference: {list(self.reference)}")
        if self.valve:
            lines.append(f"valve: {list(self.valve)}")
        if self.joystick:
            lines += [f"joystick.T: {self.joystick.T:.9g}",
                      f"joystick.scale: {self.joystick.scale:.9g}",
                      f"joystick.script: {list(self.joystick.script)}"]
        return "\n".join(lines) + "\n"

    @property
    def period(self) -> float:
        return TANK_TS if self.testbed == "tank" else AERO_TS


def _tank_ulc() -> UltraLocalConfig:
    return UltraLocalConfig(alpha=TANK_ALPHA, kp=TANK_KP, tau=TANK_TAU,
                            ts=TANK_TS, u_min=0.0, u_max=70.0)


def _aero_ulc() -> UltraLocalConfig:
    return UltraLocalConfig(alpha=AERO_ALPHA, kp=AERO_KP, tau=AERO_TAU,
                            ts=AERO_TS, u_min=-14.0, u_max=14.0)


def _tank_spec(name: str, loss: LossModel, desc: str) -> ScenarioSpec:
    return ScenarioSpec(
        name=name, testbed="tank", controller="mfc",
        duration=TANK_DURATION, loss=loss, ulc=_tank_ulc(),
        reference=plants.TANK_REFERENCE.entries,
        valve=plants.TANK_VALVE.entries,
        tank=plants.TankParams(), description=desc)


def _tank_pi_spec(name: str, loss: LossModel, desc: str) -> ScenarioSpec:
    return ScenarioSpec(
        name=name, testbed="tank", controller="pi",
        duration=TANK_DURATION, loss=loss,
        ulc=_tank_ulc(), pi_gains=(PI_KP, PI_KI),
        reference=plants.TANK_REFERENCE.entries,
        valve=((0.0, PI_VALVE),),
        tank=plants.TankParams(), description=desc)


def _aero_spec(name: str, loss: LossModel, desc: str) -> ScenarioSpec:
    return ScenarioSpec(
        name=name, testbed="aero", controller="mfc",
        duration=AERO_DURATION, loss=loss, ulc=_aero_ulc(),
        reference=plants.AERO_REFERENCE.entries,
        aero=plants.AeroParams(), description=desc)


def _joy_spec(name: str, T: float, loss: LossModel, desc: str) -> ScenarioSpec:
    return ScenarioSpec(
        name=name, testbed="aero", controller="mfc",
        duration=AERO_DURATION, loss=loss, ulc=_aero_ulc(),
        joystick=JoystickConfig(T=T),
        aero=plants.AeroParams(), description=desc)


def _catalog() -> dict[str, ScenarioSpec]:
    no_loss = LossModel()
    specs = [
        _tank_spec("tank-1", no_loss, "tank tracking, lossless link"),
        _tank_spec("tank-2", LossModel(cuts_fault1=((140.0, 150.0),),
                                       cuts_fault2=((50.0, 60.0),)),
                   "tank with one 10 s cut per direction"),
        _tank_spec("tank-3", LossModel(p_fault1=0.3, p_fault2=0.3),
                   "tank with 30% loss both directions"),
        _tank_spec("tank-4", LossModel(p_fault1=0.5, p_fault2=0.5),
                   "tank with 50% loss both directions"),
        _tank_spec("tank-5", LossModel(p_fault1=0.7, p_fault2=0.7),
                   "tank with 70% loss both directions"),
        _tank_pi_spec("tank-2-pi", LossModel(cuts_fault1=((140.0, 150.0),),
                                             cuts_fault2=((50.0, 60.0),)),
                      "PI baseline under the tank-2 cuts, fixed valve"),
        _tank_pi_spec("tank-5-pi", LossModel(p_fault1=0.7, p_fault2=0.7),
                      "PI baseline under 70% loss, fixed valve"),
        _aero_spec("aero-1", LossModel(cuts_fault1=AERO_CUTS_F1,
                                       cuts_fault2=AERO_CUTS_F2),
                   "arm tracking with long transmission cuts"),
        _aero_spec("aero-2", LossModel(p_fault1=0.2402, p_fault2=0.2485),
                   "arm tracking with ~24% loss both directions"),
        _aero_spec("aero-3", LossModel(p_fault1=0.3927004, p_fault2=0.3964),
                   "arm tracking with ~39% loss both directions"),
        _joy_spec("joy-4", 4.0, no_loss, "joystick steering, T = 4 s"),
        _joy_spec("joy-5", 2.0, no_loss, "joystick steering, T = 2 s"),
        _joy_spec("joy-6", 0.5, no_loss, "joystick steering, T = 0.5 s"),
        _joy_spec("joy-7", 2.0, LossModel(cuts_fault1=AERO_CUTS_F1,
                                          cuts_fault2=AERO_CUTS_F2),
                  "joystick steering with long cuts, T = 2 s"),
        _joy_spec("joy-8", 2.0, LossModel(p_fault1=0.2356, p_fault2=0.2527),
                  "joystick steering with ~24% loss, T = 2 s"),
        _joy_spec("joy-9", 2.0, LossModel(p_fault1=0.3879, p_fault2=0.4050),
                  "joystick steering with ~40% loss, T = 2 s"),
    ]
    return {s.name: s for s in specs}


CATALOG = _catalog()


def scenario_names() -> list[str]:
    return list(CATALOG)


def build_scenario(name: str) -> ScenarioSpec:
    try:
        return CATALOG[name]
    except KeyError:
        known = ", ".join(CATALOG)
        raise ScenarioError(
            f"unknown scenario {name!r}; available: {known}") from None


def build_session(spec: ScenarioSpec, mode: str = "sim",
                  udp_ports: tuple[int, int] = (0, 0)) -> LoopSession:
    """Assemble nodes, link and channel for one run of the given spec."""
    loss = replace(spec.loss, rng_seed=spec.seed)
    link = LinkEmulator(loss)
    noise_key = [spec.seed, 3]

    if spec.joystick is not None:
        reference = JoystickReference(T=spec.joystick.T,
                                      scale=spec.joystick.scale)
    else:
        reference = ScheduleReference(plants.StepSchedule(spec.reference))

    if spec.controller == "pi":
        kp, ki = spec.pi_gains
        pi = PiState(kp_pi=kp, ki_pi=ki, u_min=spec.ulc.u_min,
                     u_max=spec.ulc.u_max)
        controller = PiControllerNode(pi, reference, ts=spec.period)
    else:
        controller = MfcController(spec.ulc, reference,
                                   estimator=spec.estimator)

    if spec.testbed == "tank":
        plant = TankNode(spec.tank, plants.StepSchedule(spec.valve),
                         noise_key)
    else:
        plant = AeroNode(spec.aero, noise_key)

    channel = (UdpChannel(port_plant=udp_ports[0],
                          port_controller=udp_ports[1])
               if mode == "udp" else VirtualChannel())
    return LoopSession(plant, controller, link, period=spec.period,
                       channel=channel, mode="virtual")


@dataclass
class RunResult:
    spec: ScenarioSpec
    trace: list[TraceRecord]
    realized_rates: tuple[float, float]


def _script_commands(spec: ScenarioSpec) -> list[tuple[int, str, tuple]]:
    """Scripted joystick input as (tick, set_axis, value) command rows."""
    if spec.joystick is None:
        return []
    cmds = []
    for t, axis in spec.joystick.script:
        cmds.append((round(t / spec.period), "set_axis", (float(axis),)))
    return cmds


def run_with_commands(spec: ScenarioSpec,
                      commands: Sequence[tuple[int, str, tuple]],
                      mode: str = "sim") -> RunResult:
    """Run a scenario applying live commands at their tick boundaries."""
    session = build_session(spec, mode=mode)
    try:
        pending = sorted(commands, key=lambda c: c[0])
        n = round(spec.duration / spec.period)
        trace = []
        idx = 0
        for k in range(n):
            while idx < len(pending) and pending[idx][0] <= k:
                _, cmd, values = pending[idx]
                session.apply_command(cmd, values)
                idx += 1
            trace.append(session.tick())
        rates = session.link.realized_rates()
    finally:
        session.close()
    return RunResult(spec=spec, trace=trace, realized_rates=rates)


def run_scenario(spec: ScenarioSpec, mode: str = "sim",
                 seed: int | None = None,
                 estimator: str | None = None) -> RunResult:
    if seed is not None:
        spec = replace(spec, seed=seed)
    if estimator is not None:
        spec = replace(spec, estimator=estimator)
    return run_with_commands(spec, _script_commands(spec), mode=mode)


@dataclass
class SegmentMetrics:
    y_star: float
    t_start: float
    t_end: float
    steady_abs_error: float          # mean |e| over the segment's last 5 s
    saturation_duty: float           # percent of segment ticks at a u bound


@dataclass
class RunMetrics:
    rmse: float
    iae: float
    segments: list[SegmentMetrics]
    saturation_duty: float
    realized_loss_1: float
    realized_loss_2: float

    def as_text(self) -> str:
        lines = [
            f"rmse={self.rmse:.9g}",
            f"iae={self.iae:.9g}",
            f"saturation_duty_pct={self.saturation_duty:.9g}",
            f"realized_loss_fault1_pct={self.realized_loss_1:.9g}",
            f"realized_loss_fault2_pct={self.realized_loss_2:.9g}",
        ]
        for i, seg in enumerate(self.segments, 1):
            prefix = f"segment{i}"
            lines += [
                f"{prefix}.y_star={seg.y_star:.9g}",
                f"{prefix}.t_start={seg.t_start:.9g}",
                f"{prefix}.t_end={seg.t_end:.9g}",
                f"{prefix}.steady_abs_error={seg.steady_abs_error:.9g}",
                f"{prefix}.saturation_duty_pct={seg.saturation_duty:.9g}",
            ]
        return "\n".join(lines) + "\n"


def _segment_bounds(trace: list[TraceRecord]) -> list[tuple[int, int]]:
    bounds = []
    start = 0
    for i in range(1, len(trace)):
        if trace[i].y_star != trace[i - 1].y_star:
            bounds.append((start, i))
            start = i
    bounds.append((start, len(trace)))
    return bounds


def evaluate(trace: list[TraceRecord], spec: ScenarioSpec,
             realized_rates: tuple[float, float] = (0.0, 0.0)) -> RunMetrics:
    """Tracking metrics over a full trace."""
    if not trace:
        raise ScenarioError("cannot evaluate an empty trace")
    t = np.array([r.t for r in trace])
    e = np.array([r.y - r.y_star for r in trace])
    u = np.array([r.u_sent for r in trace])
    u_min, u_max = spec.ulc.u_min, spec.ulc.u_max
    at_bound = (u == u_min) | (u == u_max)
    rmse = float(np.sqrt(np.mean(e ** 2)))
    iae = float(np.trapezoid(np.abs(e), t))
    segments = []
    for lo, hi in _segment_bounds(trace):
        seg_t = t[lo:hi]
        t_end = seg_t[-1] + spec.period
        tail = seg_t >= t_end - 5.0
        steady = float(np.mean(np.abs(e[lo:hi][tail])))
        duty = float(100.0 * np.mean(at_bound[lo:hi]))
        segments.append(SegmentMetrics(
            y_star=trace[lo].y_star, t_start=float(seg_t[0]),
            t_end=float(t_end), steady_abs_error=steady,
            saturation_duty=duty))
    return RunMetrics(rmse=rmse, iae=iae, segments=segments,
                      saturation_duty=float(100.0 * np.mean(at_bound)),
                      realized_loss_1=realized_rates[0],
                      realized_loss_2=realized_rates[1])


CSV_HEADER = "t,y,y_star,ydot_star,u_sent,u_applied,f_est,fault,v1,v2"


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.9g}"


def trace_to_csv(trace: list[TraceRecord]) -> str:
    rows = [CSV_HEADER]
    for r in trace:
        rows.append(",".join([
            _fmt(r.t), _fmt(r.y), _fmt(r.y_star), _fmt(r.ydot_star),
            _fmt(r.u_sent), _fmt(r.u_applied), _fmt(r.f_est),
            str(r.fault), _fmt(r.v1), _fmt(r.v2)]))
    return "\n".join(rows) + "\n"


def export_csv(trace: list[TraceRecord], path) -> None:
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(trace_to_csv(trace))
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def export_summary(metrics: RunMetrics, path) -> None:
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(metrics.as_text())
    except OSError as exc:
        raise OSError(f"cannot write summary to {path}: {exc}") from exc


def load_joystick_script(path) -> tuple[tuple[float, float], ...]:
    """Scripted axis input: 't,axis' lines with axis in [-1, 1], ZOH."""
    rows = []
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#") or line.lower() == "t,axis":
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ScenarioError(f"{path}:{i}: expected 't,axis'")
        t, axis = float(parts[0]), float(parts[1])
        if not -1.0 <= axis <= 1.0:
            raise ScenarioError(f"{path}:{i}: axis outside [-1, 1]")
        rows.append((t, axis))
    if not rows:
        raise ScenarioError(f"{path}: empty joystick script")
    return tuple(rows)
