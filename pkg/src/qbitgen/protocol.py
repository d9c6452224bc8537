"""Round-by-round bit-string generation between Alice and Bob.

Each round: Alice sends a coherent pulse encoding a private bit, Bob
announces a bit, Alice reveals hers, Bob checks the pulse with a displaced
single-photon test. After n rounds Bob aborts if the click rate exceeds
kappa, otherwise both output x_i = a_i XOR b_i.

Pulses in transit are symbolic (their coherent amplitude), so a round costs
O(1). Rounds are processed in fixed-size batches; every batch draws from its
own counter-derived Philox streams, one per party plus one for the detector,
which makes a transcript a pure function of (seed, trial).
"""
from __future__ import annotations

import csv
import enum
import os
import warnings
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .optics import ChannelModel, click_prob, honest_click_prob

BATCH_SIZE = 1 << 18
TRANSCRIPT_FIELDS = ("round", "a", "b", "k", "x")

_ALICE, _BOB, _DETECTOR = 0, 1, 2


class ProtocolFault(RuntimeError):
    """A party implementation broke the message contract."""


class MessageKind(enum.IntEnum):
    STATE_PREPARED = 0
    BOB_BIT = 1
    ALICE_REVEAL = 2
    VERIFY_RESULT = 3


@dataclass(frozen=True)
class RoundMessage:
    kind: MessageKind
    payload: object
    round_index: int


@dataclass(frozen=True)
class RoundRecord:
    a: int
    b: int
    k: int
    x: int

    def __post_init__(self) -> None:
        for name in ("a", "b", "k", "x"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be a bit")
        if self.x != self.a ^ self.b:
            raise ValueError("x must equal a XOR b")


@dataclass(frozen=True)
class Pulses:
    """Pulses Alice puts on the line for a batch of rounds."""

    amplitude: np.ndarray

    def __len__(self) -> int:
        return len(self.amplitude)


class MessageLog:
    """Enforces StatePrepared -> BobBit -> AliceReveal -> VerifyResult.

    The driver posts one message per kind per batch, so the order holds for
    each round in the batch. With ``keep=True`` the per-round messages are
    retained for inspection (small n only).
    """

    def __init__(self, keep: bool = False):
        self.keep = keep
        self._expected = MessageKind.STATE_PREPARED
        self._start = 0
        self._size = 0
        self._batch: dict[MessageKind, object] = {}
        self._messages: list[RoundMessage] = []

    def open_batch(self, start: int, size: int) -> None:
        if self._expected is not MessageKind.STATE_PREPARED:
            raise ProtocolFault(f"batch opened while waiting for {self._expected.name}")
        self._start, self._size = start, size
        self._batch = {}

    def post(self, kind: MessageKind, payload) -> None:
        if kind is not self._expected:
            raise ProtocolFault(f"got {kind.name} while waiting for {self._expected.name}")
        if len(payload) != self._size:
            raise ProtocolFault(f"{kind.name} carries {len(payload)} entries, expected {self._size}")
        self._batch[kind] = payload
        self._expected = MessageKind((kind + 1) % len(MessageKind))
        if self.keep and self._expected is MessageKind.STATE_PREPARED:
            self._flush()

    def _flush(self) -> None:
        for j in range(self._size):
            for kind in MessageKind:
                payload = self._batch[kind]
                item = (
                    complex(payload.amplitude[j])
                    if kind is MessageKind.STATE_PREPARED
                    else int(payload[j])
                )
                self._messages.append(RoundMessage(kind, item, self._start + j))

    @property
    def messages(self) -> list[RoundMessage]:
        return list(self._messages)


# ---------------------------------------------------------------------------
# parties


class Alice(ABC):
    """Alice's side: prepare pulses, then reveal bits after hearing Bob."""

    @abstractmethod
    def prepare(self, size: int, rng: np.random.Generator) -> Pulses: ...

    @abstractmethod
    def reveal(self, b: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...


class Bob(ABC):
    """Bob's side: announce bits, then verify the revealed pulses."""

    @abstractmethod
    def respond(self, pulses: Pulses, rng: np.random.Generator) -> np.ndarray: ...

    @abstractmethod
    def verify(self, pulses: Pulses, a: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...


def nominal_amplitude(a: np.ndarray, ch: ChannelModel) -> np.ndarray:
    """Amplitude of the honest pulse |(-1)^a alpha>."""
    return ch.alpha * (1.0 - 2.0 * np.asarray(a, dtype=float))


class HonestAlice(Alice):
    def __init__(self, channel: ChannelModel):
        self.channel = channel
        self._a: Optional[np.ndarray] = None

    def prepare(self, size, rng):
        self._a = rng.integers(0, 2, size=size, dtype=np.uint8)
        return Pulses(nominal_amplitude(self._a, self.channel).astype(complex))

    def reveal(self, b, rng):
        a, self._a = self._a, None
        return a


class HonestBob(Bob):
    def __init__(self, channel: ChannelModel):
        self.channel = channel

    def respond(self, pulses, rng):
        return rng.integers(0, 2, size=len(pulses), dtype=np.uint8)

    def verify(self, pulses, a, rng):
        residual = np.abs(pulses.amplitude - nominal_amplitude(a, self.channel)) ** 2
        p = click_prob(residual, self.channel)
        return (rng.random(len(pulses)) < p).astype(np.uint8)


# ---------------------------------------------------------------------------
# configuration and outcome


@dataclass(frozen=True)
class ProtocolConfig:
    n: int
    kappa: float
    channel: ChannelModel = field(default_factory=ChannelModel)
    seed: int = 0
    batch_size: int = BATCH_SIZE

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 <= self.kappa < 1.0:
            raise ValueError(f"kappa must lie in [0, 1), got {self.kappa!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        object.__setattr__(self, "n", int(self.n))
        p_h = honest_click_prob(self.channel)
        if self.kappa <= p_h:
            warnings.warn(
                f"kappa={self.kappa:.4g} does not exceed the honest click probability "
                f"{p_h:.4g}; honest runs will abort often",
                stacklevel=3,
            )


@dataclass(frozen=True)
class Outcome:
    bits: Optional[np.ndarray]
    click_rate: float
    reason: Optional[str] = None

    @property
    def aborted(self) -> bool:
        return self.bits is None


class RoundRecords(Sequence):
    """Array-backed sequence of RoundRecord."""

    def __init__(self, a, b, k):
        self.a = np.asarray(a, dtype=np.uint8)
        self.b = np.asarray(b, dtype=np.uint8)
        self.k = np.asarray(k, dtype=np.uint8)
        self.x = self.a ^ self.b

    def __len__(self) -> int:
        return len(self.a)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return RoundRecords(self.a[i], self.b[i], self.k[i])
        return RoundRecord(int(self.a[i]), int(self.b[i]), int(self.k[i]), int(self.x[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, RoundRecords):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in "abk")

    @property
    def click_rate(self) -> float:
        return float(self.k.mean()) if len(self) else 0.0


# ---------------------------------------------------------------------------
# driver


def _stream(key: int, party: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, party, batch]))


def _bits(value, size: int, what: str) -> np.ndarray:
    arr = np.asarray(value)
    if arr.shape != (size,):
        raise ProtocolFault(f"{what}: expected shape ({size},), got {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ProtocolFault(f"{what}: entries must be bits")
    out = arr.astype(np.uint8)
    out.setflags(write=False)
    return out


def _exchange(alice: Alice, bob: Bob, size: int, streams, log: MessageLog):
    ra, rb, rd = streams
    pulses = alice.prepare(size, ra)
    if not isinstance(pulses, Pulses):
        raise ProtocolFault("Alice must send Pulses")
    log.post(MessageKind.STATE_PREPARED, pulses)
    b = _bits(bob.respond(pulses, rb), size, "Bob's bit")
    log.post(MessageKind.BOB_BIT, b)
    a = _bits(alice.reveal(b, ra), size, "Alice's reveal")
    log.post(MessageKind.ALICE_REVEAL, a)
    k = _bits(bob.verify(pulses, a, rd), size, "verification")
    log.post(MessageKind.VERIFY_RESULT, k)
    return a, b, k


def run_round(alice: Alice, bob: Bob, ch: ChannelModel, rng: np.random.Generator) -> RoundRecord:
    """Play a single round with one shared random stream."""
    log = MessageLog()
    log.open_batch(0, 1)
    a, b, k = _exchange(alice, bob, 1, (rng, rng, rng), log)
    return RoundRecord(int(a[0]), int(b[0]), int(k[0]), int(a[0] ^ b[0]))


def run_protocol(
    cfg: ProtocolConfig,
    alice: Alice,
    bob: Bob,
    *,
    trial: int = 0,
    log: Optional[MessageLog] = None,
) -> tuple[Outcome, RoundRecords]:
    """Run all n rounds and apply Bob's abort rule.

    ``trial`` selects an independent execution under the same seed.
    """
    log = log if log is not None else MessageLog()
    key = cfg.seed + (int(trial) << 64)
    a_all = np.empty(cfg.n, dtype=np.uint8)
    b_all = np.empty(cfg.n, dtype=np.uint8)
    k_all = np.empty(cfg.n, dtype=np.uint8)
    for batch, start in enumerate(range(0, cfg.n, cfg.batch_size)):
        size = min(cfg.batch_size, cfg.n - start)
        log.open_batch(start, size)
        streams = tuple(_stream(key, p, batch) for p in (_ALICE, _BOB, _DETECTOR))
        a, b, k = _exchange(alice, bob, size, streams, log)
        a_all[start:start + size] = a
        b_all[start:start + size] = b
        k_all[start:start + size] = k
    records = RoundRecords(a_all, b_all, k_all)
    clicks = int(k_all.sum(dtype=np.int64))
    click_rate = clicks / cfg.n
    # strict: a click rate equal to kappa does not abort
    if clicks > cfg.kappa * cfg.n:
        reason = f"click rate {click_rate:.6g} exceeds kappa {cfg.kappa:.6g}"
        return Outcome(None, click_rate, reason), records
    return Outcome(records.x.copy(), click_rate), records


# ---------------------------------------------------------------------------
# transcript export


def write_transcript(records: RoundRecords, path, extra: Optional[dict] = None) -> None:
    """Write ``round,a,b,k,x`` lines, plus optional per-round extra columns."""
    extra = extra or {}
    for name, col in extra.items():
        if len(col) != len(records):
            raise ValueError(f"extra column {name!r} has wrong length")
    path = os.fspath(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRANSCRIPT_FIELDS + tuple(extra))
        cols = [records.a, records.b, records.k, records.x]
        extras = [np.asarray(v) for v in extra.values()]
        for i in range(len(records)):
            w.writerow([i] + [int(c[i]) for c in cols] + [f"{float(e[i]):.6g}" for e in extras])


def read_transcript(path) -> tuple[RoundRecords, dict[str, np.ndarray]]:
    with open(os.fspath(path), newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if tuple(header[:5]) != TRANSCRIPT_FIELDS:
            raise ValueError(f"{path}: not a transcript (header {header!r})")
        rows = list(reader)
    a = [int(r["a"]) for r in rows]
    b = [int(r["b"]) for r in rows]
    k = [int(r["k"]) for r in rows]
    records = RoundRecords(a, b, k)
    if any(int(r["x"]) != xi for r, xi in zip(rows, records.x)):
        raise ValueError(f"{path}: x column is not a XOR b")
    extra = {name: np.array([float(r[name]) for r in rows]) for name in header[5:]}
    return records, extra
