"""Alice's intensity consistency test and systematic-error envelopes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize
from scipy import stats as sps

from .bounds import MAX_BIAS, SecurityReport, cheat_function_F, epsilon_b_bound
from .optics import ChannelModel
from .protocol import read_transcript

MIN_SAMPLES = 100
TAP_FRACTION = 0.2


class InconclusiveTestError(ValueError):
    pass


@dataclass(frozen=True)
class IntensitySample:
    readings: np.ndarray
    noise_sigma: float

    def __post_init__(self) -> None:
        r = np.asarray(self.readings, dtype=float)
        if r.ndim != 1:
            raise ValueError("readings must be 1-d")
        if np.any(r < 0):
            raise ValueError("intensity readings must be nonnegative")
        if not self.noise_sigma > 0:
            raise ValueError("noise_sigma must be > 0")
        r.setflags(write=False)
        object.__setattr__(self, "readings", r)


@dataclass(frozen=True)
class CalibrationError:
    rel_eta: float = 0.10
    rel_alpha2: float = 0.10

    def __post_init__(self) -> None:
        if self.rel_eta < 0 or self.rel_alpha2 < 0:
            raise ValueError("relative calibration errors must be >= 0")


@dataclass(frozen=True)
class ConsistencyResult:
    passed: bool
    p_mean: float
    p_variance: float
    alpha2_estimate: Optional[float]


def expected_intensity(ch: ChannelModel, tap_fraction: float = TAP_FRACTION) -> float:
    """Mean photon number on Alice's classical detector for an honest Bob."""
    return tap_fraction * ch.att_bob_to_alice * ch.n0


def simulate_intensity(
    ch: ChannelModel,
    n: int,
    noise_sigma: float,
    rng: np.random.Generator,
    *,
    boost: float = 1.0,
    tap_fraction: float = TAP_FRACTION,
) -> IntensitySample:
    """Readings for ``n`` rounds; ``boost`` > 1 models Bob sending brighter pulses."""
    mean = boost * expected_intensity(ch, tap_fraction)
    readings = np.clip(rng.normal(mean, noise_sigma, size=n), 0.0, None)
    return IntensitySample(readings, noise_sigma)


def gaussian_consistency_test(
    s: IntensitySample,
    expected_mean: float,
    significance: float = 0.01,
    *,
    channel: Optional[ChannelModel] = None,
    tap_fraction: float = TAP_FRACTION,
) -> ConsistencyResult:
    """Check the readings against N(expected_mean, noise_sigma^2).

    Two-sided z-test on the mean and two-sided chi-square test on the
    variance; passes when both p-values exceed ``significance``. On a pass
    the mean reading is mapped back to alpha^2 through Alice's tap and
    attenuation. A failure means Alice must abort.
    """
    n = len(s.readings)
    if n < MIN_SAMPLES:
        raise InconclusiveTestError(f"need at least {MIN_SAMPLES} readings, got {n}")
    if not 0.0 < significance <= 0.1:
        raise ValueError(f"significance must lie in (0, 0.1], got {significance!r}")
    mean = float(np.mean(s.readings))
    z = (mean - expected_mean) / (s.noise_sigma / math.sqrt(n))
    p_mean = float(2.0 * sps.norm.sf(abs(z)))
    chi2 = (n - 1) * float(np.var(s.readings, ddof=1)) / s.noise_sigma**2
    p_var = float(2.0 * min(sps.chi2.cdf(chi2, n - 1), sps.chi2.sf(chi2, n - 1)))
    passed = p_mean > significance and p_var > significance
    estimate = None
    if passed:
        ch = channel if channel is not None else ChannelModel()
        estimate = mean / tap_fraction * ch.att_alice
    return ConsistencyResult(passed, p_mean, p_var, estimate)


def _eps_sum(report: SecurityReport, eta: float, alpha2: float) -> float:
    eps_b = min(MAX_BIAS, epsilon_b_bound(alpha2))
    x = max(0.0, (report.kappa - report.dark) / (report.a0t * eta))
    eps_a = min(MAX_BIAS, cheat_function_F(x, alpha2))
    return eps_a + eps_b


def propagate_systematics(report: SecurityReport, err: CalibrationError) -> tuple[float, float]:
    """Range of eps_sum over eta(1 +/- rel_eta) x alpha2(1 +/- rel_alpha2).

    Re-evaluated, never linearized: F has a square-root cusp at zero. The
    four corners alone are not enough because eps_sum has an interior
    minimum in alpha2; eps_A only decreases with eta, so the extremes sit on
    the two eta edges and are searched along alpha2 there.
    """
    eta_lo = report.eta * (1.0 - err.rel_eta)
    eta_hi = report.eta * (1.0 + err.rel_eta)
    a_lo = report.alpha2 * (1.0 - err.rel_alpha2)
    a_hi = report.alpha2 * (1.0 + err.rel_alpha2)
    if eta_lo <= 0.0:
        return min(report.eps_sum, _edge_extreme(report, eta_hi, a_lo, a_hi, -1)), 2 * MAX_BIAS
    a_lo = max(a_lo, 0.0)
    lo = _edge_extreme(report, eta_hi, a_lo, a_hi, -1)
    hi = _edge_extreme(report, eta_lo, a_lo, a_hi, +1)
    return min(lo, report.eps_sum), max(hi, report.eps_sum)


def _edge_extreme(report: SecurityReport, eta: float, a_lo: float, a_hi: float, sign: int) -> float:
    def f(a):
        return _eps_sum(report, eta, a)

    values = [f(a_lo), f(a_hi)]
    if a_hi > a_lo:
        res = optimize.minimize_scalar(
            lambda a: -sign * f(a), bounds=(a_lo, a_hi), method="bounded",
            options={"xatol": 1e-12 * max(a_hi, 1e-12)},
        )
        values.append(f(float(res.x)))
    return max(values) if sign > 0 else min(values)


def load_intensity_sample(path, noise_sigma: float, column: str = "intensity") -> IntensitySample:
    """Read per-round intensities stored next to a transcript export."""
    _, extra = read_transcript(path)
    if column not in extra:
        raise ValueError(f"{path}: no {column!r} column")
    return IntensitySample(extra[column], noise_sigma)
