"""Datagram wire codec and lossy-channel emulation.

The 24-byte datagram layout (little-endian) is:

    offset  size  field
    0       2     magic 0x4D 0x46 ("MF")
    2       1     version (1)
    3       1     kind (0x01 sensor / 0x02 control)
    4       4     sequence number, uint32
    8       8     timestamp, uint64 microseconds
    16      8     value, IEEE-754 binary64

Loss is decided above the socket by LinkEmulator (scheduled cut intervals
plus a per-direction seeded Bernoulli draw), so drop patterns are
reproducible whether datagrams travel in-process or over real UDP.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from .errors import BadKind, ConfigError, ForeignPacket, TruncatedDatagram

MAGIC = b"MF"
VERSION = 1
KIND_SENSOR = 0x01
KIND_CONTROL = 0x02

_LAYOUT = struct.Struct("<2sBBIQd")
WIRE_SIZE = _LAYOUT.size  # 24


class Direction(IntEnum):
    """Loss directions: FAULT1 drops sensor->server, FAULT2 server->plant."""

    FAULT1 = 1
    FAULT2 = 2


@dataclass(frozen=True)
class Datagram:
    kind: int
    seq: int
    timestamp_us: int
    value: float


def encode(d: Datagram) -> bytes:
    if d.kind not in (KIND_SENSOR, KIND_CONTROL):
        raise BadKind(f"unknown datagram kind {d.kind:#x}")
    if not 0 <= d.seq < 2 ** 32:
        raise ConfigError("sequence number out of uint32 range")
    if not 0 <= d.timestamp_us < 2 ** 64:
        raise ConfigError("timestamp out of uint64 range")
    return _LAYOUT.pack(MAGIC, VERSION, d.kind, d.seq, d.timestamp_us, d.value)


def decode(buf: bytes) -> Datagram:
    if len(buf) != WIRE_SIZE:
        raise TruncatedDatagram(
            f"expected {WIRE_SIZE} bytes, got {len(buf)}")
    magic, version, kind, seq, ts_us, value = _LAYOUT.unpack(buf)
    if magic != MAGIC or version != VERSION:
        raise ForeignPacket("magic or version mismatch")
    if kind not in (KIND_SENSOR, KIND_CONTROL):
        raise BadKind(f"unknown datagram kind {kind:#x}")
    return Datagram(kind=kind, seq=seq, timestamp_us=ts_us, value=value)


def _check_cuts(cuts) -> tuple[tuple[float, float], ...]:
    out = tuple((float(a), float(b)) for a, b in cuts)
    for a, b in out:
        if b <= a:
            raise ConfigError(f"empty cut interval [{a}, {b})")
    ordered = sorted(out)
    for (_, b0), (a1, _) in zip(ordered, ordered[1:]):
        if a1 < b0:
            raise ConfigError("cut intervals overlap")
    return out


@dataclass(frozen=True)
class LossModel:
    """Per-direction Bernoulli drop probabilities plus scheduled cuts."""

    p_fault1: float = 0.0
    p_fault2: float = 0.0
    cuts_fault1: tuple[tuple[float, float], ...] = ()
    cuts_fault2: tuple[tuple[float, float], ...] = ()
    rng_seed: int = 0

    def __post_init__(self):
        for p in (self.p_fault1, self.p_fault2):
            if not 0.0 <= p <= 1.0:
                raise ConfigError("loss probability must lie in [0, 1]")
        object.__setattr__(self, "cuts_fault1", _check_cuts(self.cuts_fault1))
        object.__setattr__(self, "cuts_fault2", _check_cuts(self.cuts_fault2))

    def probability(self, direction: Direction) -> float:
        return self.p_fault1 if direction == Direction.FAULT1 else self.p_fault2

    def cuts(self, direction: Direction):
        return (self.cuts_fault1 if direction == Direction.FAULT1
                else self.cuts_fault2)

    def with_probabilities(self, p_fault1: float, p_fault2: float) -> "LossModel":
        return replace(self, p_fault1=p_fault1, p_fault2=p_fault2)


def loss_gate(direction: Direction, t: float, model: LossModel,
              rng: np.random.Generator) -> bool:
    """Delivery decision: False inside a scheduled cut, else Bernoulli(1-p)."""
    for a, b in model.cuts(direction):
        if a <= t < b:
            return False
    p = model.probability(direction)
    if p <= 0.0:
        return True
    if p >= 1.0:
        return False
    return float(rng.random()) >= p


@dataclass
class GateStats:
    calls: int = 0
    dropped: int = 0

    @property
    def drop_rate(self) -> float:
        return self.dropped / self.calls if self.calls else 0.0


class LinkEmulator:
    """Owns the per-direction RNG streams and realized-loss accounting.

    Each direction draws from an independent stream derived from
    (rng_seed, direction), so retuning one direction never reshuffles the
    other's pattern.
    """

    def __init__(self, model: LossModel):
        self.model = model
        self._rng = {
            d: np.random.default_rng([model.rng_seed, int(d)])
            for d in Direction
        }
        self.stats = {d: GateStats() for d in Direction}

    def gate(self, direction: Direction, t: float) -> bool:
        delivered = loss_gate(direction, t, self.model, self._rng[direction])
        s = self.stats[direction]
        s.calls += 1
        if not delivered:
            s.dropped += 1
        return delivered

    def set_probabilities(self, p_fault1: float, p_fault2: float) -> None:
        self.model = self.model.with_probabilities(p_fault1, p_fault2)

    def realized_rates(self) -> tuple[float, float]:
        """Realized drop percentage per direction."""
        return (100.0 * self.stats[Direction.FAULT1].drop_rate,
                100.0 * self.stats[Direction.FAULT2].drop_rate)


@dataclass
class StaleGuard:
    """Drops any datagram not strictly newer than the last accepted one."""

    last_seq_accepted: int | None = None

    def accept(self, seq: int) -> bool:
        if self.last_seq_accepted is not None and seq <= self.last_seq_accepted:
            return False
        self.last_seq_accepted = seq
        return True


def stale_check(guard: StaleGuard, seq: int) -> bool:
    return guard.accept(seq)
