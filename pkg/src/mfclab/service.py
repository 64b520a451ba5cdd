"""Live steering service: one authoritative loop, many viewers, one driver.

The simulation ticks on a dedicated thread (paced to wall time or flat out);
clients attach over a WebSocket at /stream.  Telemetry frames flow
server-to-client as JSON objects; commands flow client-to-server the same
way and are applied at the next tick boundary.  Every applied command is
recorded with its tick index, making any interactive session replayable as
a batch run.

Only one client may steer at a time: the steering token goes to the first
claimant and is released on disconnect.  Slow consumers lose old frames
rather than ever stalling the ticker.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import threading
import time
from collections import deque
from dataclasses import replace

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from . import scenarios
from .loop import TraceRecord

DECIMATION = 5
CLIENT_BUFFER = 512

TANK_SETPOINT_RANGE = (0.0, 60.0)
AERO_SETPOINT_RANGE = (-1.5, 1.5)


def _frame(rec: TraceRecord, tick: int, rates: tuple[float, float]) -> dict:
    return {
        "frame": tick,
        "t": rec.t,
        "y": rec.y,
        "y_star": rec.y_star,
        "u": rec.u_sent,
        "f_est": rec.f_est,
        "fault": rec.fault,
        "v1": rec.v1,
        "v2": rec.v2,
        "loss_realized_1": rates[0],
        "loss_realized_2": rates[1],
    }


class _Client:
    _ids = itertools.count(1)

    def __init__(self, loop: asyncio.AbstractEventLoop):
        self.id = next(self._ids)
        self.loop = loop
        self.queue: deque = deque(maxlen=CLIENT_BUFFER)
        self.event = asyncio.Event()

    def push(self, frame: dict) -> None:
        self.queue.append(frame)
        self.loop.call_soon_threadsafe(self.event.set)


class SteeringService:
    """Owns the session, the ticker thread and all client bookkeeping."""

    def __init__(self, spec: scenarios.ScenarioSpec, pace: str = "realtime"):
        self.spec = spec
        self.pace = pace
        self._lock = threading.Lock()
        self._commands: deque = deque()
        self._clients: dict[int, _Client] = {}
        self._token_holder: int | None = None
        self._stop = threading.Event()
        self._paused = False
        self._last_fault = 0
        self._reset(spec.seed)
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _reset(self, seed: int) -> None:
        self.spec = replace(self.spec, seed=seed)
        self.session = scenarios.build_session(self.spec)
        self.trace: list[TraceRecord] = []
        self.replay_log: list[tuple[int, str, tuple]] = []
        self._last_fault = 0

    # -- lifecycle -----------------------------------------------------

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=5.0)

    @property
    def finished(self) -> bool:
        return self.session.clock.tick >= round(self.spec.duration
                                                / self.spec.period)

    def _run(self) -> None:
        period = self.spec.period
        t_next = time.monotonic() + period
        while not self._stop.is_set():
            with self._lock:
                while self._commands:
                    cmd, values = self._commands.popleft()
                    if cmd == "pause":
                        self._paused = True
                    elif cmd == "resume":
                        self._paused = False
                    elif cmd == "reset":
                        self._reset(int(values[0]))
                    else:
                        tick = self.session.clock.tick
                        self.session.apply_command(cmd, values)
                        self.replay_log.append((tick, cmd, values))
            if self._paused or self.finished:
                time.sleep(0.01 if self.pace == "realtime" else 0.0005)
                t_next = time.monotonic() + period
                continue
            with self._lock:
                tick = self.session.clock.tick
                rec = self.session.tick()
                self.trace.append(rec)
                emit = (tick % DECIMATION == 0
                        or rec.fault != self._last_fault)
                self._last_fault = rec.fault
            if emit:
                frame = _frame(rec, tick, self.session.link.realized_rates())
                for client in list(self._clients.values()):
                    client.push(frame)
            if self.pace == "realtime":
                delay = t_next - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                t_next += period
            else:
                time.sleep(0)

    # -- clients and commands -------------------------------------------

    def attach(self, loop: asyncio.AbstractEventLoop) -> _Client:
        client = _Client(loop)
        self._clients[client.id] = client
        return client

    def detach(self, client: _Client) -> None:
        self._clients.pop(client.id, None)
        if self._token_holder == client.id:
            self._token_holder = None

    def claim_token(self, client: _Client) -> bool:
        if self._token_holder in (None, client.id):
            self._token_holder = client.id
            return True
        return False

    def release_token(self, client: _Client) -> None:
        if self._token_holder == client.id:
            self._token_holder = None

    def submit(self, client: _Client, msg: dict) -> dict:
        """Validate one command message; enqueue it if acceptable."""
        cmd = msg.get("cmd")
        if cmd == "claim":
            return {"event": "token", "granted": self.claim_token(client)}
        if cmd == "release":
            self.release_token(client)
            return {"event": "token", "granted": False}
        if self._token_holder != client.id:
            return {"event": "error", "cmd": cmd, "reason": "no steering token"}
        try:
            values = self._validate(cmd, msg)
        except (KeyError, TypeError, ValueError) as exc:
            return {"event": "error", "cmd": cmd, "reason": str(exc)}
        with self._lock:
            self._commands.append((cmd, values))
        return {"event": "ack", "cmd": cmd}

    def _validate(self, cmd: str, msg: dict) -> tuple:
        joystick = self.spec.joystick is not None
        if cmd == "set_axis":
            if not joystick:
                raise ValueError("scenario has no joystick reference")
            v = float(msg["value"])
            if not -1.0 <= v <= 1.0:
                raise ValueError("axis must lie in [-1, 1]")
            return (v,)
        if cmd == "set_setpoint":
            if joystick:
                raise ValueError("joystick scenario takes no setpoint")
            v = float(msg["value"])
            lo, hi = (TANK_SETPOINT_RANGE if self.spec.testbed == "tank"
                      else AERO_SETPOINT_RANGE)
            if not lo <= v <= hi:
                raise ValueError(f"setpoint must lie in [{lo}, {hi}]")
            return (v,)
        if cmd == "set_loss":
            p1 = float(msg["p_fault1"])
            p2 = float(msg["p_fault2"])
            if not (0.0 <= p1 <= 1.0 and 0.0 <= p2 <= 1.0):
                raise ValueError("probabilities must lie in [0, 1]")
            return (p1, p2)
        if cmd == "set_T":
            if not joystick:
                raise ValueError("scenario has no joystick filter")
            v = float(msg["value"])
            if v < 10.0 * self.spec.period:
                raise ValueError("T must be at least 10 sampling periods")
            return (v,)
        if cmd == "pause" or cmd == "resume":
            return ()
        if cmd == "reset":
            return (int(msg.get("seed", self.spec.seed)),)
        raise ValueError(f"unknown command {cmd!r}")

    # -- exports ---------------------------------------------------------

    def replay_text(self) -> str:
        lines = ["tick,cmd,value"]
        for tick, cmd, values in self.replay_log:
            lines.append(f"{tick},{cmd},{' '.join(f'{v:.9g}' for v in values)}")
        return "\n".join(lines) + "\n"

    def trace_csv(self) -> str:
        with self._lock:
            return scenarios.trace_to_csv(list(self.trace))


def create_app(spec: scenarios.ScenarioSpec,
               pace: str = "realtime") -> FastAPI:
    from contextlib import asynccontextmanager

    service = SteeringService(spec, pace=pace)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        service.start()
        try:
            yield
        finally:
            service.stop()

    app = FastAPI(title="mfclab steering service", lifespan=lifespan)
    app.state.service = service

    @app.get("/health", response_class=PlainTextResponse)
    def health():
        status = "finished" if service.finished else (
            "paused" if service._paused else "running")
        return f"ok {status} tick={service.session.clock.tick}\n"

    @app.get("/spec", response_class=PlainTextResponse)
    def spec_text():
        return service.spec.as_text()

    @app.get("/replay", response_class=PlainTextResponse)
    def replay_text():
        return service.replay_text()

    @app.get("/trace", response_class=PlainTextResponse)
    def trace_text():
        return service.trace_csv()

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        client = service.attach(asyncio.get_running_loop())
        send_lock = asyncio.Lock()

        async def pump_telemetry():
            while True:
                await client.event.wait()
                client.event.clear()
                while client.queue:
                    frame = client.queue.popleft()
                    async with send_lock:
                        await ws.send_text(json.dumps(frame))

        pump = asyncio.create_task(pump_telemetry())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    reply = {"event": "error", "reason": "malformed message"}
                else:
                    reply = service.submit(client, msg)
                async with send_lock:
                    await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()
            service.detach(client)

    return app


def serve(spec: scenarios.ScenarioSpec, host: str = "127.0.0.1",
          port: int = 8700, pace: str = "realtime") -> None:
    import uvicorn

    uvicorn.run(create_app(spec, pace=pace), host=host, port=port,
                log_level="warning")
