"""Optical channel and Bob's verification detector.

Coherent states, their overlap, click statistics of the displaced-vacuum
test, and the Gaussian (covariance-level) attenuation map used to argue
that a strongly attenuated pulse is a mixture of coherent states.

Conventions: quadratures q, p with vacuum covariance I/2. All transmissions
and efficiencies are linear fractions.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

FOCK_CUTOFF = 32
NORM_TOL = 1e-9
PSD_TOL = 1e-12


def db_to_linear(db: float) -> float:
    """Convert an attenuation quoted in dB into a transmission fraction."""
    return 10.0 ** (-db / 10.0)


@dataclass(frozen=True)
class CoherentState:
    """Coherent state |amplitude>.

    The dark-port displacement that appears when the signal meets Bob's
    local oscillator cancels out of the click statistics, so it is not
    stored here.
    """

    amplitude: complex

    @property
    def mean_photons(self) -> float:
        return abs(self.amplitude) ** 2

    def overlap(self, other: "CoherentState") -> complex:
        """<self|other> for two coherent states."""
        a, b = self.amplitude, other.amplitude
        return cmath.exp(-0.5 * abs(a) ** 2 - 0.5 * abs(b) ** 2 + a.conjugate() * b)

    def displaced(self, shift: complex) -> "CoherentState":
        return CoherentState(self.amplitude + shift)


@dataclass(frozen=True)
class ChannelModel:
    """Apparatus parameters for one operating point.

    ``a0t`` is the combined signal transmission from Alice's output to
    Bob's detector (PBS attenuation times coupler transmission); ``eta``
    the detector efficiency; ``dark`` the dark-click probability per gate.
    ``att_bob_to_alice`` and ``att_alice`` are the signal/LO relative
    attenuation on Bob's side and Alice's total attenuation, and ``n0`` the
    photon number of Bob's bright pulse.
    """

    alpha2: float = 0.03
    a0t: float = db_to_linear(4.3)
    eta: float = 0.105
    dark: float = 9e-4
    visibility: float = 0.965
    att_bob_to_alice: float = db_to_linear(45.0)
    att_alice: float = db_to_linear(50.0)
    n0: float = 1e9

    def __post_init__(self) -> None:
        for name in ("a0t", "eta", "dark", "visibility", "att_bob_to_alice", "att_alice"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0 or math.isnan(value):
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if not self.alpha2 >= 0.0:
            raise ValueError(f"alpha2 must be >= 0, got {self.alpha2!r}")
        if not self.n0 > 0.0:
            raise ValueError(f"n0 must be > 0, got {self.n0!r}")
        if self.eta_tot <= 0.0:
            raise ValueError("effective detection efficiency a0t*eta must be > 0")

    @property
    def eta_tot(self) -> float:
        return self.a0t * self.eta

    @property
    def alpha(self) -> float:
        return math.sqrt(self.alpha2)

    @property
    def visibility_residual(self) -> float:
        """Mean photon number left at the dark port by imperfect interference."""
        return (1.0 - self.visibility) * self.alpha2 / 2.0

    @classmethod
    def matched(cls, alpha2: float = 0.03, **kwargs) -> "ChannelModel":
        """Channel whose bright pulse photon number reproduces ``alpha2``."""
        ch = cls(alpha2=alpha2, **kwargs)
        if "n0" in kwargs or alpha2 == 0:
            return ch
        return replace(ch, n0=alpha2 / (ch.att_bob_to_alice * ch.att_alice))


@dataclass(frozen=True)
class FockExpansion:
    """Alice's pulse written as D(alpha) sum_n c_n |n>."""

    coeffs: tuple[complex, ...] = field(default=(1.0,))

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a non-empty 1-d sequence")
        if c.size > FOCK_CUTOFF + 1:
            raise ValueError(f"expansion longer than Fock cutoff {FOCK_CUTOFF}")
        norm = float(np.sum(np.abs(c) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"expansion not normalized: sum |c_n|^2 = {norm!r}")
        object.__setattr__(self, "coeffs", tuple(complex(x) for x in c))

    @classmethod
    def from_unnormalized(cls, coeffs: Sequence[complex]) -> "FockExpansion":
        c = np.asarray(coeffs, dtype=complex)
        return cls(tuple(c / np.linalg.norm(c)))

    @property
    def fidelity(self) -> float:
        return min(1.0, abs(self.coeffs[0]) ** 2)


@dataclass(frozen=True)
class GaussianState:
    """Single-mode Gaussian state given by quadrature means and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float).reshape(2)
        cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ValueError("covariance must be positive definite")
        if np.linalg.det(cov) < 0.25 - 1e-9:
            raise ValueError("covariance violates the uncertainty relation det >= 1/4")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def vacuum(cls) -> "GaussianState":
        return cls(np.zeros(2), 0.5 * np.eye(2))

    @classmethod
    def coherent(cls, amplitude: complex) -> "GaussianState":
        mean = math.sqrt(2.0) * np.array([amplitude.real, amplitude.imag])
        return cls(mean, 0.5 * np.eye(2))

    @classmethod
    def squeezed(cls, r: float, angle: float = 0.0, displacement: complex = 0j) -> "GaussianState":
        """Displaced squeezed vacuum; ``angle`` rotates the squeezing axis."""
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        cov = rot @ np.diag([math.exp(-2 * r) / 2, math.exp(2 * r) / 2]) @ rot.T
        mean = math.sqrt(2.0) * np.array([displacement.real, displacement.imag])
        return cls(mean, (cov + cov.T) / 2)


# ---------------------------------------------------------------------------
# overlap and discrimination


def overlap_angle(alpha2: float) -> float:
    """Angle theta with cos(theta) = |<alpha|-alpha>| = exp(-2 alpha2)."""
    if not alpha2 >= 0:
        raise ValueError(f"alpha2 must be >= 0, got {alpha2!r}")
    # arccos loses precision near 1; use the sine branch there
    return math.atan2(math.sqrt(-math.expm1(-4.0 * alpha2)), math.exp(-2.0 * alpha2))


def helstrom_success(theta: float) -> float:
    """Optimal probability of telling |alpha> from |-alpha> with equal priors."""
    if not 0.0 <= theta <= math.pi / 2 + 1e-15:
        raise ValueError(f"theta must lie in [0, pi/2], got {theta!r}")
    return 0.5 * (1.0 + math.sin(theta))


# ---------------------------------------------------------------------------
# click statistics


def click_prob(residual_photons, ch: ChannelModel):
    """Click probability for a coherent residual at Bob's dark port.

    Photon clicks and dark counts are independent; the visibility residual
    is added to whatever the displacement leaves behind. Accepts arrays.
    """
    mu = np.asarray(residual_photons, dtype=float) + ch.visibility_residual
    p = -np.expm1(math.log1p(-ch.dark) - ch.eta_tot * mu)
    return float(p) if np.ndim(p) == 0 else p


def honest_click_prob(ch: ChannelModel) -> float:
    """Per-round click probability when both parties follow the protocol."""
    return click_prob(0.0, ch)


def no_click_prob_fock(expansion: FockExpansion, ch: ChannelModel) -> float:
    """P(no click) = sum_n |c_n|^2 (1 - a0t*eta)^n, detector without dark counts."""
    if not isinstance(expansion, FockExpansion):
        expansion = FockExpansion(tuple(expansion))
    weights = np.abs(np.asarray(expansion.coeffs)) ** 2
    n = np.arange(weights.size)
    return float(np.sum(weights * (1.0 - ch.eta_tot) ** n))


def fidelity_floor_from_clicks(click_rate: float, ch: ChannelModel) -> float:
    """Lower bound on Alice's average fidelity from Bob's click rate."""
    if not 0.0 <= click_rate <= 1.0:
        raise ValueError(f"click_rate must lie in [0, 1], got {click_rate!r}")
    f = 1.0 - (click_rate - ch.dark) / ch.eta_tot
    return min(1.0, max(0.0, f))


# ---------------------------------------------------------------------------
# Gaussian quasiprobability maps


def attenuate_gaussian(g: GaussianState, a: float, n_chaotic: float = 0.0) -> GaussianState:
    """Pure loss with transmission ``a`` followed by ``n_chaotic`` thermal photons.

    Covariance form of the s-ordered Wigner map
    W_out(q, p, s) = W_in(q/sqrt(a), p/sqrt(a), (s - 2n + a - 1)/a) / a.
    """
    if not 0.0 < a <= 1.0:
        raise ValueError(f"transmission must lie in (0, 1], got {a!r}")
    if not n_chaotic >= 0.0:
        raise ValueError(f"n_chaotic must be >= 0, got {n_chaotic!r}")
    eye = np.eye(2)
    cov = a * g.cov + (0.5 * (1.0 - a) + n_chaotic) * eye
    return GaussianState(math.sqrt(a) * g.mean, (cov + cov.T) / 2)


def p_function_positive(g: GaussianState) -> bool:
    """True when the Glauber P function is a nonnegative distribution.

    For a Gaussian state that holds exactly when cov - I/2 is PSD.
    """
    return bool(np.linalg.eigvalsh(g.cov - 0.5 * np.eye(2)).min() >= -PSD_TOL)
