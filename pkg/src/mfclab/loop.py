"""Networked loop: plant node, controller node, channels, tick driver.

Per tick (period ts): the controller consumes whatever sensor datagrams the
fault-1 gate let through, computes or holds u, and emits one control
datagram; the fault-2 gate decides whether that datagram reaches the plant;
the plant applies its latest accepted control, steps, and emits the next
measurement, which passes the fault-1 gate on its way to the next tick.

Freeze semantics: with no fresh measurement the controller re-emits its held
u and leaves F_est untouched (Fault 1); the plant holds its last accepted u
whenever nothing arrives (Fault 2).  During Fault 2 the controller keeps
estimating from the u values it sent, since a connectionless link gives it
no way to observe the loss.
"""

from __future__ import annotations

import math
import socket
from dataclasses import dataclass
from collections import deque
from typing import Iterable

import numpy as np

from . import plants
from .controllers import (ControllerState, ESTIMATORS, PiState, SampleWindow,
                          UltraLocalConfig, ip_control, pi_control)
from .errors import DecodeError
from .link import (Datagram, Direction, KIND_CONTROL, KIND_SENSOR,
                   LinkEmulator, StaleGuard, decode, encode)


def _us(t: float) -> int:
    return int(round(t * 1e6))


@dataclass
class TraceRecord:
    """One tick of loop telemetry; v1/v2 are populated on the aero testbed."""

    t: float
    y: float
    y_star: float
    ydot_star: float
    u_sent: float
    u_applied: float
    f_est: float
    fault: int
    v1: float | None = None
    v2: float | None = None


@dataclass
class TickClock:
    """Tick bookkeeping; virtual mode derives time purely from the index."""

    period: float
    mode: str = "virtual"
    tick: int = 0

    @property
    def now(self) -> float:
        return self.tick * self.period


class ScheduleReference:
    """Piecewise-constant setpoint; derivative is zero between jumps."""

    kind = "schedule"

    def __init__(self, schedule: plants.StepSchedule):
        self.schedule = schedule
        self._override: float | None = None

    def set_setpoint(self, value: float) -> None:
        self._override = float(value)

    def tick(self, t: float, dt: float) -> tuple[float, float]:
        if self._override is not None:
            return self._override, 0.0
        return self.schedule.value(t), 0.0


class JoystickReference:
    """Operator axis in [-1, 1], scaled to output units and shaped by the
    double-lag filter, yielding both the reference and its derivative."""

    kind = "joystick"

    def __init__(self, T: float, scale: float):
        self.scale = float(scale)
        self.axis = 0.0
        self._filter = plants.JoystickFilterState(T=T)

    def set_axis(self, value: float) -> None:
        self.axis = float(value)

    def set_T(self, T: float) -> None:
        old = self._filter
        self._filter = plants.JoystickFilterState(T=float(T), x1=old.x1,
                                                  x2=old.x2)

    def tick(self, t: float, dt: float) -> tuple[float, float]:
        y_star, ydot_star, self._filter = plants.joystick_filter_step(
            self._filter, self.axis * self.scale, dt)
        return y_star, ydot_star


class MfcController:
    """iP controller node with sliding-window F estimation.

    While starved of measurements it queues held samples (latest measured y
    against the advancing reference); the queue backfills the window the
    moment a fresh measurement arrives, so estimation resumes within one
    tick after an outage.
    """

    def __init__(self, cfg: UltraLocalConfig, reference,
                 estimator: str = "closedloop", fault1_reemit: bool = True):
        self.cfg = cfg
        self.reference = reference
        self.estimate = ESTIMATORS[estimator]
        self.fault1_reemit = fault1_reemit
        self.state = ControllerState(window=SampleWindow(cfg.tau, cfg.ts))
        self.guard = StaleGuard()
        self.seq_out = 0
        self.malformed = 0
        self._last_y: float | None = None
        self._pending: deque = deque(maxlen=self.state.window.capacity)

    def _freshest(self, inbound: Iterable[bytes]) -> Datagram | None:
        fresh = None
        for raw in inbound:
            try:
                d = decode(raw)
            except DecodeError:
                self.malformed += 1
                continue
            if d.kind != KIND_SENSOR:
                self.malformed += 1
                continue
            if self.guard.accept(d.seq):
                fresh = d
        return fresh

    def tick(self, t: float, dt: float,
             inbound: Iterable[bytes]) -> tuple[Datagram | None, dict]:
        st = self.state
        y_star, ydot_star = self.reference.tick(t, dt)
        fresh = self._freshest(inbound)
        if fresh is not None:
            for sample in self._pending:
                st.window.push(*sample)
            self._pending.clear()
            y = fresh.value
            e = y - y_star
            st.window.push(t, y, st.last_u, e, ydot_star)
            if st.window.full:
                st.f_est = self.estimate(st.window, self.cfg)
            u = self.cfg.saturate(ip_control(st.f_est, ydot_star, e, self.cfg))
            st.last_u = u
            st.frozen = False
            self._last_y = y
        else:
            st.frozen = True
            if self._last_y is not None:
                self._pending.append((t, self._last_y, st.last_u,
                                      self._last_y - y_star, ydot_star))
        dgram = None
        if not st.frozen or self.fault1_reemit:
            dgram = Datagram(kind=KIND_CONTROL, seq=self.seq_out,
                             timestamp_us=_us(t), value=st.last_u)
            self.seq_out += 1
        info = {"u_sent": st.last_u, "f_est": st.f_est, "y_star": y_star,
                "ydot_star": ydot_star, "frozen": st.frozen}
        return dgram, info


class PiControllerNode:
    """PI baseline node with the same freeze-and-hold transport behavior.

    Feeds pi_control the conventional error y* - y: with the positive
    Broida-tuned gains, u = kp*(y - y*) would be positive feedback and pin
    the plant against a bound.
    """

    def __init__(self, pi: PiState, reference, ts: float,
                 fault1_reemit: bool = True):
        self.pi = pi
        self.reference = reference
        self.ts = ts
        self.fault1_reemit = fault1_reemit
        self.guard = StaleGuard()
        self.seq_out = 0
        self.malformed = 0
        self.last_u = 0.0
        self.frozen = False

    def _freshest(self, inbound: Iterable[bytes]) -> Datagram | None:
        fresh = None
        for raw in inbound:
            try:
                d = decode(raw)
            except DecodeError:
                self.malformed += 1
                continue
            if d.kind != KIND_SENSOR:
                self.malformed += 1
                continue
            if self.guard.accept(d.seq):
                fresh = d
        return fresh

    def tick(self, t: float, dt: float,
             inbound: Iterable[bytes]) -> tuple[Datagram | None, dict]:
        y_star, ydot_star = self.reference.tick(t, dt)
        fresh = self._freshest(inbound)
        if fresh is not None:
            e = y_star - fresh.value
            self.last_u = pi_control(e, self.ts, self.pi)
            self.frozen = False
        else:
            self.frozen = True
        dgram = None
        if not self.frozen or self.fault1_reemit:
            dgram = Datagram(kind=KIND_CONTROL, seq=self.seq_out,
                             timestamp_us=_us(t), value=self.last_u)
            self.seq_out += 1
        info = {"u_sent": self.last_u, "f_est": 0.0, "y_star": y_star,
                "ydot_star": ydot_star, "frozen": self.frozen}
        return dgram, info


class TankNode:
    """Plant node wrapping the tank process and the outlet-valve schedule."""

    def __init__(self, params: plants.TankParams, valve: plants.StepSchedule,
                 seed_key):
        self.params = params
        self.valve = valve
        self.state = plants.TankState()
        self.guard = StaleGuard()
        self.seq_out = 0
        self.malformed = 0
        self.last_applied_u = 0.0
        self.last_voltages: tuple[float | None, float | None] = (None, None)
        self._rng = np.random.default_rng(seed_key)
        self._measured = self.state.y + plants.sample_noise(params, self._rng)

    def _accept_u(self, inbound: Iterable[bytes]) -> None:
        for raw in inbound:
            try:
                d = decode(raw)
            except DecodeError:
                self.malformed += 1
                continue
            if d.kind != KIND_CONTROL:
                self.malformed += 1
                continue
            if self.guard.accept(d.seq):
                self.last_applied_u = min(max(d.value, self.params.u_min),
                                          self.params.u_max)

    def apply_and_step(self, t: float, inbound: Iterable[bytes]) -> None:
        self._accept_u(inbound)
        noise = plants.sample_noise(self.params, self._rng)
        r = self.valve.value(t)
        self.state, self._measured = plants.tank_step(
            self.state, self.last_applied_u, r, self.params, noise)

    def measurement(self, t: float) -> Datagram:
        d = Datagram(kind=KIND_SENSOR, seq=self.seq_out, timestamp_us=_us(t),
                     value=self._measured)
        self.seq_out += 1
        return d


class AeroNode:
    """Plant node wrapping the half-quadrotor surrogate and voltage mixer."""

    def __init__(self, params: plants.AeroParams, seed_key):
        self.params = params
        self.state = plants.AeroSurrogateState()
        self.guard = StaleGuard()
        self.seq_out = 0
        self.malformed = 0
        self.last_applied_u = 0.0
        self.last_voltages: tuple[float | None, float | None] = (None, None)
        self._rng = np.random.default_rng(seed_key)
        self._measured = self.state.theta + self._noise()

    def _noise(self) -> float:
        if self.params.sigma == 0.0:
            return 0.0
        return float(self._rng.normal(0.0, self.params.sigma))

    def _accept_u(self, inbound: Iterable[bytes]) -> None:
        for raw in inbound:
            try:
                d = decode(raw)
            except DecodeError:
                self.malformed += 1
                continue
            if d.kind != KIND_CONTROL:
                self.malformed += 1
                continue
            if self.guard.accept(d.seq):
                self.last_applied_u = min(max(d.value, self.params.u_min),
                                          self.params.u_max)

    def apply_and_step(self, t: float, inbound: Iterable[bytes]) -> None:
        self._accept_u(inbound)
        v1, v2 = plants.aero_voltage_map(self.last_applied_u,
                                         self.params.v_limit)
        self.last_voltages = (v1, v2)
        self.state = plants.aero_step(self.state, v1, v2, self.params.ts,
                                      self.params)
        self._measured = self.state.theta + self._noise()

    def measurement(self, t: float) -> Datagram:
        d = Datagram(kind=KIND_SENSOR, seq=self.seq_out, timestamp_us=_us(t),
                     value=self._measured)
        self.seq_out += 1
        return d


class VirtualChannel:
    """In-process transport: bytes pass straight through."""

    def transfer(self, direction: Direction, payload: bytes) -> bytes:
        return payload

    def close(self) -> None:
        pass


class UdpChannel:
    """Loopback UDP transport driven in lockstep.

    Loss is decided by the link emulator before send, so the OS never gets
    to influence the drop pattern; a datagram that was sent but not received
    within the timeout is a hard error rather than a silent divergence.
    """

    def __init__(self, host: str = "127.0.0.1", port_plant: int = 0,
                 port_controller: int = 0, timeout: float = 2.0):
        self.plant_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.ctrl_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.plant_sock.bind((host, port_plant))
        self.ctrl_sock.bind((host, port_controller))
        self.plant_sock.settimeout(timeout)
        self.ctrl_sock.settimeout(timeout)
        self.plant_addr = self.plant_sock.getsockname()
        self.ctrl_addr = self.ctrl_sock.getsockname()

    def transfer(self, direction: Direction, payload: bytes) -> bytes:
        if direction == Direction.FAULT1:  # sensor -> controller
            self.plant_sock.sendto(payload, self.ctrl_addr)
            data, _ = self.ctrl_sock.recvfrom(4096)
        else:  # control -> plant
            self.ctrl_sock.sendto(payload, self.plant_addr)
            data, _ = self.plant_sock.recvfrom(4096)
        if not data:
            raise RuntimeError("loopback datagram lost")
        return data

    def close(self) -> None:
        self.plant_sock.close()
        self.ctrl_sock.close()


class LoopSession:
    """Tick-by-tick driver binding controller, link emulator and plant.

    Construction publishes the initial measurement (sequence 0) through the
    fault-1 gate at t=0 so the controller starts from live data; afterwards
    each node emits exactly one datagram per tick.
    """

    def __init__(self, plant, controller, link: LinkEmulator, period: float,
                 channel=None, mode: str = "virtual"):
        self.plant = plant
        self.controller = controller
        self.link = link
        self.clock = TickClock(period=period, mode=mode)
        self.channel = channel or VirtualChannel()
        self._next_inbox = self._gate_sensor(plant.measurement(0.0), 0.0)

    def _gate_sensor(self, dgram: Datagram, t: float):
        if self.link.gate(Direction.FAULT1, t):
            payload = self.channel.transfer(Direction.FAULT1, encode(dgram))
            return dgram.value, True, [payload]
        return dgram.value, False, []

    def tick(self) -> TraceRecord:
        t = self.clock.now
        period = self.clock.period
        y_meas, delivered1, inbox = self._next_inbox
        if not math.isfinite(y_meas):
            raise RuntimeError(
                f"contract violation: measurement not finite at t={t:.3f}")

        dgram, info = self.controller.tick(t, period, inbox)
        fault2_dropped = False
        plant_inbox: list[bytes] = []
        if dgram is not None:
            if self.link.gate(Direction.FAULT2, t):
                plant_inbox = [self.channel.transfer(Direction.FAULT2,
                                                     encode(dgram))]
            else:
                fault2_dropped = True

        self.plant.apply_and_step(t, plant_inbox)
        sensor = self.plant.measurement(t + period)
        self._next_inbox = self._gate_sensor(sensor, t + period)

        fault = 1 if not delivered1 else (2 if fault2_dropped else 0)
        v1, v2 = self.plant.last_voltages
        rec = TraceRecord(t=t, y=y_meas, y_star=info["y_star"],
                          ydot_star=info["ydot_star"], u_sent=info["u_sent"],
                          u_applied=self.plant.last_applied_u,
                          f_est=info["f_est"], fault=fault, v1=v1, v2=v2)
        for name in ("y", "u_sent", "u_applied", "f_est"):
            if not math.isfinite(getattr(rec, name)):
                raise RuntimeError(
                    f"contract violation: {name} is not finite at t={t:.3f}")
        self.clock.tick += 1
        return rec

    def apply_command(self, cmd: str, values) -> None:
        """State-changing live command, applied at a tick boundary."""
        ref = self.controller.reference
        if cmd == "set_axis":
            if ref.kind != "joystick":
                raise ValueError("set_axis needs a joystick reference")
            ref.set_axis(values[0])
        elif cmd == "set_setpoint":
            if ref.kind != "schedule":
                raise ValueError("set_setpoint needs a schedule reference")
            ref.set_setpoint(values[0])
        elif cmd == "set_loss":
            self.link.set_probabilities(values[0], values[1])
        elif cmd == "set_T":
            if ref.kind != "joystick":
                raise ValueError("set_T needs a joystick reference")
            ref.set_T(values[0])
        else:
            raise ValueError(f"unknown command {cmd!r}")

    def close(self) -> None:
        self.channel.close()


def run_loop(session: LoopSession, duration: float) -> list[TraceRecord]:
    """Run for round(duration/period) ticks and return the full trace."""
    n = round(duration / session.clock.period)
    return [session.tick() for _ in range(n)]
