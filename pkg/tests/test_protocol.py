import math
import warnings

import numpy as np
import pytest
from scipy import stats

from qbitgen.optics import ChannelModel, honest_click_prob
from qbitgen.protocol import (
    HonestAlice,
    HonestBob,
    MessageKind,
    MessageLog,
    ProtocolConfig,
    ProtocolFault,
    Pulses,
    RoundRecord,
    RoundRecords,
    read_transcript,
    run_protocol,
    run_round,
    write_transcript,
)

NOMINAL = ChannelModel()
PERFECT = ChannelModel(visibility=1.0, dark=0.0)


def honest(ch):
    return HonestAlice(ch), HonestBob(ch)


def config(n, kappa=2e-3, ch=NOMINAL, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ProtocolConfig(n=n, kappa=kappa, channel=ch, **kw)


class TestRoundRecord:
    def test_xor(self):
        with pytest.raises(ValueError):
            RoundRecord(1, 1, 0, 1)

    def test_bits(self):
        with pytest.raises(ValueError):
            RoundRecord(2, 0, 0, 0)


class TestConfig:
    def test_warns_when_kappa_too_small(self):
        with pytest.warns(UserWarning):
            ProtocolConfig(n=10, kappa=1e-4, channel=NOMINAL)

    @pytest.mark.parametrize("kw", [{"n": 0}, {"kappa": 1.0}, {"kappa": -0.1}, {"seed": -1}])
    def test_invalid(self, kw):
        args = {"n": 10, "kappa": 2e-3, **kw}
        with pytest.raises(ValueError):
            ProtocolConfig(**args)


class TestRunRound:
    def test_perfect_apparatus_never_clicks(self):
        rng = np.random.default_rng(0)
        records = [run_round(*honest(PERFECT), PERFECT, rng) for _ in range(200)]
        assert all(r.k == 0 for r in records)
        assert all(r.x == r.a ^ r.b for r in records)
        assert 60 < sum(r.x for r in records) < 140

    def test_single_round_record(self):
        r = run_round(*honest(NOMINAL), NOMINAL, np.random.default_rng(3))
        assert isinstance(r, RoundRecord)


class TestRunProtocol:
    def test_click_rate_matches_model(self):
        n = 10**6
        outcome, records = run_protocol(config(n), *honest(NOMINAL))
        p = honest_click_prob(NOMINAL)
        assert abs(records.click_rate - p) < 3 * math.sqrt(p * (1 - p) / n)
        assert outcome.click_rate == records.click_rate

    def test_x_is_fair(self):
        n = 10**6
        outcome, _ = run_protocol(config(n, seed=5), *honest(NOMINAL))
        assert not outcome.aborted
        assert abs(outcome.bits.mean() - 0.5) < 3 / (2 * math.sqrt(n))

    def test_kappa_zero_aborts(self):
        outcome, _ = run_protocol(config(10**5, kappa=0.0), *honest(NOMINAL))
        assert outcome.aborted
        assert "exceeds kappa" in outcome.reason

    def test_no_abort_at_equality(self):
        # find a seeded run, then set kappa exactly to its click rate
        cfg = config(1000, ch=ChannelModel(dark=0.01))
        _, records = run_protocol(cfg, *honest(cfg.channel))
        clicks = int(records.k.sum())
        assert clicks > 0
        at = config(1000, kappa=clicks / 1000, ch=cfg.channel)
        outcome, _ = run_protocol(at, *honest(cfg.channel))
        assert not outcome.aborted
        below = config(1000, kappa=(clicks - 0.5) / 1000, ch=cfg.channel)
        assert run_protocol(below, *honest(cfg.channel))[0].aborted

    def test_deterministic(self):
        cfg = config(5000, seed=42, batch_size=512)
        _, r1 = run_protocol(cfg, *honest(NOMINAL))
        _, r2 = run_protocol(cfg, *honest(NOMINAL))
        assert r1 == r2
        _, r3 = run_protocol(cfg, *honest(NOMINAL), trial=1)
        assert r1 != r3

    def test_batches_do_not_repeat(self):
        cfg = config(2048, seed=1, batch_size=1024)
        _, r = run_protocol(cfg, *honest(NOMINAL))
        assert not np.array_equal(r.a[:1024], r.a[1024:])

    def test_alice_bits_independent_of_bob(self):
        class LoudBob(HonestBob):
            def respond(self, pulses, rng):
                rng.random(1000)
                return np.ones(len(pulses), dtype=np.uint8)

        cfg = config(4000, seed=9)
        _, r1 = run_protocol(cfg, *honest(NOMINAL))
        _, r2 = run_protocol(cfg, HonestAlice(NOMINAL), LoudBob(NOMINAL))
        assert np.array_equal(r1.a, r2.a)
        assert abs(r2.a.mean() - 0.5) < 0.05

    def test_honest_small_n_uniform(self):
        counts = np.zeros(8)
        cfg = config(3, kappa=0.5)
        for t in range(4000):
            outcome, _ = run_protocol(cfg, *honest(NOMINAL), trial=t)
            if not outcome.aborted:
                counts[int("".join(map(str, outcome.bits)), 2)] += 1
        assert stats.chisquare(counts).pvalue > 0.01


class TestOrdering:
    def test_transcript_order(self):
        log = MessageLog(keep=True)
        run_protocol(config(6, batch_size=4), *honest(NOMINAL), log=log)
        msgs = log.messages
        assert len(msgs) == 24
        for i in range(6):
            kinds = [m.kind for m in msgs if m.round_index == i]
            assert kinds == list(MessageKind)

    def test_out_of_order_post(self):
        log = MessageLog()
        log.open_batch(0, 1)
        with pytest.raises(ProtocolFault):
            log.post(MessageKind.ALICE_REVEAL, [0])

    def test_bad_reveal_shape(self):
        class Sloppy(HonestAlice):
            def reveal(self, b, rng):
                return np.zeros(len(b) + 1)

        with pytest.raises(ProtocolFault):
            run_protocol(config(10), Sloppy(NOMINAL), HonestBob(NOMINAL))

    def test_alice_cannot_rewrite_bob_bit(self):
        class Forger(HonestAlice):
            def reveal(self, b, rng):
                b[:] = 0
                return super().reveal(b, rng)

        with pytest.raises(ValueError):
            run_protocol(config(10), Forger(NOMINAL), HonestBob(NOMINAL))

    def test_alice_must_send_pulses(self):
        class Mute(HonestAlice):
            def prepare(self, size, rng):
                super().prepare(size, rng)
                return np.zeros(size)

        with pytest.raises(ProtocolFault):
            run_protocol(config(10), Mute(NOMINAL), HonestBob(NOMINAL))

    def test_verify_sees_only_its_round(self):
        seen = []

        class Spy(HonestBob):
            def verify(self, pulses, a, rng):
                seen.append((len(pulses), len(a)))
                return super().verify(pulses, a, rng)

        run_protocol(config(10, batch_size=3), HonestAlice(NOMINAL), Spy(NOMINAL))
        assert seen == [(3, 3), (3, 3), (3, 3), (1, 1)]


class TestTranscript:
    def test_round_trip(self, tmp_path):
        _, records = run_protocol(config(50, seed=2), *honest(NOMINAL))
        extra = {"intensity": np.linspace(500, 700, 50)}
        path = tmp_path / "t.csv"
        write_transcript(records, path, extra)
        lines = path.read_text().splitlines()
        assert lines[0] == "round,a,b,k,x,intensity"
        assert len(lines) == 51
        back, back_extra = read_transcript(path)
        assert back == records
        np.testing.assert_allclose(back_extra["intensity"], extra["intensity"], rtol=1e-6)

    def test_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n0,1\n")
        with pytest.raises(ValueError):
            read_transcript(path)

    def test_sequence_api(self):
        r = RoundRecords([0, 1], [1, 1], [0, 1])
        assert list(r) == [RoundRecord(0, 1, 0, 1), RoundRecord(1, 1, 1, 0)]
        assert len(r[1:]) == 1

    def test_pulses_len(self):
        assert len(Pulses(np.zeros(3, dtype=complex))) == 3
