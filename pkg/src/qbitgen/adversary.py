"""Dishonest parties and Monte-Carlo bias estimation.

Only round-by-round attacks are simulated. A dishonest Bob measures the
pulse as soon as it arrives with the optimal two-state discrimination; a
dishonest Alice sends a pulse midway between the two honest states and
picks her reveal after hearing Bob.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .optics import ChannelModel, click_prob, helstrom_success, overlap_angle
from .protocol import (
    Alice,
    Bob,
    HonestAlice,
    HonestBob,
    ProtocolConfig,
    Pulses,
    nominal_amplitude,
    run_protocol,
)

ALICE, BOB = "alice", "bob"
HONEST, BOB_EARLY, ALICE_STRADDLE = "honest", "bob_early", "alice_straddle"
ADVERSARIES = ("none", BOB_EARLY, ALICE_STRADDLE)


def parse_target(pattern: str) -> np.ndarray:
    """Bit pattern string such as ``"0"`` or ``"0110"``."""
    pattern = pattern.strip()
    if not pattern or set(pattern) - {"0", "1"}:
        raise ValueError(f"target must be a non-empty string of 0/1, got {pattern!r}")
    return np.frombuffer(pattern.encode(), dtype=np.uint8) - ord("0")


class _Target:
    """Cyclic target pattern consumed in round order."""

    def __init__(self, pattern: str):
        self.bits = parse_target(pattern)
        self._pos = 0

    def take(self, size: int) -> np.ndarray:
        idx = (self._pos + np.arange(size)) % len(self.bits)
        self._pos += size
        return self.bits[idx]


def early_measure_bob(theta, a, target_bit, rng: np.random.Generator):
    """Bob's bit after discriminating Alice's pulse before the reveal.

    The guess of ``a`` is right with probability (1 + sin theta)/2; Bob then
    announces guess XOR target so that x = target whenever the guess is right.
    """
    a = np.asarray(a, dtype=np.uint8)
    wrong = (rng.random(a.shape) >= helstrom_success(theta)).astype(np.uint8)
    b = (a ^ wrong) ^ np.asarray(target_bit, dtype=np.uint8)
    return int(b) if b.ndim == 0 else b


def straddle_amplitude(ch: ChannelModel, phi: float = math.pi / 2) -> complex:
    return ch.alpha * complex(math.cos(phi), math.sin(phi))


def straddle_alice(ch: ChannelModel, b, target_bit, phi: float = math.pi / 2):
    """Reveal and per-round click probability for the straddling Alice."""
    a = np.asarray(b, dtype=np.uint8) ^ np.asarray(target_bit, dtype=np.uint8)
    residual = np.abs(straddle_amplitude(ch, phi) - nominal_amplitude(a, ch)) ** 2
    p = click_prob(residual, ch)
    if a.ndim == 0:
        return int(a), float(p)
    return a, p


class EarlyMeasureBob(Bob):
    def __init__(self, channel: ChannelModel, target: str = "0"):
        self.channel = channel
        self.theta = overlap_angle(channel.alpha2)
        self.target = _Target(target)

    def respond(self, pulses, rng):
        # sign of the real part is the bit an ideal discriminator would aim for
        a = (pulses.amplitude.real < 0).astype(np.uint8)
        return early_measure_bob(self.theta, a, self.target.take(len(pulses)), rng)

    def verify(self, pulses, a, rng):
        # the pulse was consumed by the measurement; Bob has no reason to abort
        return np.zeros(len(pulses), dtype=np.uint8)


class StraddleAlice(Alice):
    def __init__(self, channel: ChannelModel, target: str = "0", phi: float = math.pi / 2):
        if not 0.0 <= phi <= math.pi:
            raise ValueError(f"phi must lie in [0, pi], got {phi!r}")
        self.channel = channel
        self.phi = phi
        self.target = _Target(target)
        self._c: Optional[np.ndarray] = None

    def prepare(self, size, rng):
        self._c = self.target.take(size)
        amp = np.full(size, straddle_amplitude(self.channel, self.phi), dtype=complex)
        return Pulses(amp)

    def reveal(self, b, rng):
        c, self._c = self._c, None
        return np.asarray(b, dtype=np.uint8) ^ c


@dataclass(frozen=True)
class Strategy:
    party: str
    kind: str = HONEST
    target: str = "0"
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.party not in (ALICE, BOB):
            raise ValueError(f"party must be {ALICE!r} or {BOB!r}")
        allowed = {ALICE: (HONEST, ALICE_STRADDLE), BOB: (HONEST, BOB_EARLY)}[self.party]
        if self.kind not in allowed:
            raise ValueError(f"{self.party} cannot play {self.kind!r}")
        parse_target(self.target)

    @property
    def honest(self) -> bool:
        return self.kind == HONEST

    def build(self, channel: ChannelModel):
        if self.kind == HONEST:
            return HonestAlice(channel) if self.party == ALICE else HonestBob(channel)
        if self.kind == BOB_EARLY:
            return EarlyMeasureBob(channel, self.target)
        return StraddleAlice(channel, self.target, self.params.get("phi", math.pi / 2))


def strategies_for(adversary: str, target: str = "0", phi: float = math.pi / 2):
    """(alice, bob) strategies for a harness ``adversary`` key."""
    if adversary not in ADVERSARIES:
        raise ValueError(f"unknown adversary {adversary!r}; choose from {ADVERSARIES}")
    alice = Strategy(ALICE, target=target)
    bob = Strategy(BOB, target=target)
    if adversary == BOB_EARLY:
        bob = Strategy(BOB, BOB_EARLY, target)
    elif adversary == ALICE_STRADDLE:
        alice = Strategy(ALICE, ALICE_STRADDLE, target, {"phi": phi})
    return alice, bob


@dataclass(frozen=True)
class BiasEstimate:
    mean_bias: float
    std_error: float
    n_rounds: int
    abort_freq: float
    trials: int
    click_rate: float


def measure_bias(
    cfg: ProtocolConfig,
    alice: Strategy,
    bob: Strategy,
    trials: int = 1,
    workers: Optional[int] = None,
) -> BiasEstimate:
    """Empirical average bias towards the cheater's target over non-aborted runs."""
    if not (alice.honest or bob.honest):
        raise ValueError("both parties dishonest: outside the security model")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    pattern = parse_target(bob.target if alice.honest else alice.target)
    target = np.resize(pattern, cfg.n)

    def one(trial: int):
        outcome, records = run_protocol(
            cfg, alice.build(cfg.channel), bob.build(cfg.channel), trial=trial
        )
        hits = -1 if outcome.aborted else int(np.count_nonzero(outcome.bits == target))
        return hits, outcome.click_rate

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, range(trials)))
    else:
        results = [one(t) for t in range(trials)]

    completed = [h for h, _ in results if h >= 0]
    n_rounds = len(completed) * cfg.n
    abort_freq = 1.0 - len(completed) / trials
    click_rate = float(np.mean([c for _, c in results]))
    if not n_rounds:
        return BiasEstimate(math.nan, math.nan, 0, abort_freq, trials, click_rate)
    p = sum(completed) / n_rounds
    return BiasEstimate(
        mean_bias=p - 0.5,
        std_error=math.sqrt(p * (1.0 - p) / n_rounds),
        n_rounds=n_rounds,
        abort_freq=abort_freq,
        trials=trials,
        click_rate=click_rate,
    )
