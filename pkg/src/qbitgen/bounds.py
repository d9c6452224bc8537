"""Provable bias bounds and the comparison against classical protocols."""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import asdict, dataclass

from .optics import ChannelModel, honest_click_prob, overlap_angle
from .protocol import ProtocolConfig

MAX_BIAS = 0.5
REPORT_COLUMNS = (
    "alpha2", "kappa", "eps_a", "eps_b", "eps_sum", "delta_n", "classical_floor", "advantage",
)


class ConfigurationError(ValueError):
    pass


def epsilon_b_bound(alpha2: float) -> float:
    """Bound on a dishonest Bob's average bias: sin(theta)/2."""
    return math.sin(overlap_angle(alpha2)) / 2.0


def cheat_function_F(x: float, alpha2: float) -> float:
    """Dishonest-Alice bias bound as a function of her average infidelity ``x``.

    Unclamped; returns ``inf`` when alpha2 = 0 (no security at all).
    """
    if not x >= 0:
        raise ValueError(f"x must be >= 0, got {x!r}")
    sin2 = -math.expm1(-4.0 * alpha2)
    if sin2 == 0.0:
        return math.inf
    return math.sqrt(x) / (math.sqrt(2.0) * sin2) + x / sin2


def epsilon_a_bound(kappa: float, ch: ChannelModel) -> float:
    """Bound on a dishonest Alice's bias given Bob's abort threshold."""
    if kappa < ch.dark:
        raise ConfigurationError(
            f"abort threshold below dark-count floor (kappa={kappa!r} < dark={ch.dark!r})"
        )
    return cheat_function_F((kappa - ch.dark) / ch.eta_tot, ch.alpha2)


def _bernoulli_kl(q: float, p: float) -> float:
    """Relative entropy D(q || p) between Bernoulli laws, q > p."""
    if p <= 0.0:
        return math.inf
    if q >= 1.0:
        return -math.log(p)
    return q * math.log(q / p) + (1.0 - q) * math.log((1.0 - q) / (1.0 - p))


def delta_n_bound(cfg: ProtocolConfig, method: str = "hoeffding") -> float:
    """Upper bound on the probability that honest parties abort.

    ``hoeffding``: exp(-2 n (kappa - p_h)^2).
    ``chernoff``: exp(-n D(kappa || p_h)), never larger than Hoeffding and
    much tighter when p_h is small.
    """
    p_h = honest_click_prob(cfg.channel)
    gap = cfg.kappa - p_h
    if gap <= 0:
        warnings.warn(
            f"kappa={cfg.kappa:.4g} <= honest click probability {p_h:.4g}: protocol not correct",
            stacklevel=2,
        )
        return 1.0
    if method == "hoeffding":
        exponent = 2.0 * cfg.n * gap * gap
    elif method == "chernoff":
        exponent = cfg.n * _bernoulli_kl(cfg.kappa, p_h)
    else:
        raise ValueError(f"unknown delta_n method {method!r}")
    return math.exp(-max(exponent, 0.0))


def classical_floor(delta_n: float) -> float:
    """Smallest eps_A + eps_B any classical protocol with abort prob. delta_n achieves."""
    if not 0.0 <= delta_n <= 1.0:
        raise ValueError(f"delta_n must lie in [0, 1], got {delta_n!r}")
    return max(0.0, 0.5 - 2.0 * delta_n)


def advantage_threshold_kappa(ch: ChannelModel) -> float:
    """Largest kappa for which eps_A + eps_B stays below 1/2 (ignoring delta_n).

    Solves F(x) = 1/2 - eps_B for sqrt(x) in closed form. Returns ``nan`` when
    eps_B already reaches 1/2 or alpha2 = 0.
    """
    budget = MAX_BIAS - epsilon_b_bound(ch.alpha2)
    sin2 = -math.expm1(-4.0 * ch.alpha2)
    if budget <= 0.0 or sin2 == 0.0:
        return math.nan
    # u^2 + u/sqrt(2) - budget*sin2 = 0 with u = sqrt(x)
    u = (-1.0 / math.sqrt(2.0) + math.sqrt(0.5 + 4.0 * budget * sin2)) / 2.0
    return ch.dark + ch.eta_tot * u * u


def default_kappa(ch: ChannelModel) -> float:
    """Geometric midpoint between the honest click probability and the
    threshold where the quantum advantage disappears.

    Without an advantage window it falls back to twice the honest click
    probability, or to a small positive threshold when p_h = 0.
    """
    p_h = honest_click_prob(ch)
    k_max = advantage_threshold_kappa(ch)
    if math.isnan(k_max) or k_max <= p_h:
        kappa = 2.0 * p_h if p_h > 0 else ch.dark + 1e-3 * ch.eta_tot
    elif p_h > 0:
        kappa = math.sqrt(p_h * k_max)
    else:
        kappa = k_max / 2.0
    return min(kappa, 1.0 - 1e-12)


@dataclass(frozen=True)
class SecurityReport:
    alpha2: float
    kappa: float
    eps_a: float
    eps_b: float
    eps_sum: float
    delta_n: float
    classical_floor: float
    advantage: bool
    n: int
    a0t: float
    eta: float
    dark: float
    visibility: float

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_COLUMNS}

    def to_text(self) -> str:
        """Flat ``key=value`` serialization, one pair per line."""
        return "".join(f"{k}={_fmt(v)}\n" for k, v in asdict(self).items())

    def to_csv_row(self) -> str:
        return ",".join(_fmt(getattr(self, k)) for k in REPORT_COLUMNS)

    @staticmethod
    def csv_header() -> str:
        return ",".join(REPORT_COLUMNS)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return f"{v:.6g}"


def build_report(cfg: ProtocolConfig, delta_method: str = "chernoff") -> SecurityReport:
    """Assemble every bound for one configuration.

    Bias bounds are clamped to 1/2. The advantage flag is the strict
    comparison eps_sum < classical_floor(delta_n).
    """
    ch = cfg.channel
    eps_b = min(MAX_BIAS, epsilon_b_bound(ch.alpha2))
    eps_a = min(MAX_BIAS, epsilon_a_bound(cfg.kappa, ch))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        delta_n = delta_n_bound(cfg, delta_method)
    floor = classical_floor(delta_n)
    eps_sum = eps_a + eps_b
    return SecurityReport(
        alpha2=ch.alpha2,
        kappa=cfg.kappa,
        eps_a=eps_a,
        eps_b=eps_b,
        eps_sum=eps_sum,
        delta_n=delta_n,
        classical_floor=floor,
        advantage=eps_sum < floor,
        n=cfg.n,
        a0t=ch.a0t,
        eta=ch.eta,
        dark=ch.dark,
        visibility=ch.visibility,
    )


def write_report(report: SecurityReport, path) -> None:
    with open(os.fspath(path), "w") as fh:
        fh.write(report.to_text())
