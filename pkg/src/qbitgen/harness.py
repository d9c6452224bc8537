"""Experiment runner: bounds and optional Monte-Carlo over a parameter sweep.

Usage::

    python -m qbitgen --sweep alpha2:0.005:0.2:20:log --out fig3.csv
    python -m qbitgen --config exp.ini --monte-carlo on --n 1e6

Config files use ``key = value`` lines in sections [protocol], [channel],
[adversary], [sweep] and [output]; command-line flags override them.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import math
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .adversary import ADVERSARIES, measure_bias, strategies_for
from .bounds import SecurityReport, build_report, default_kappa
from .optics import ChannelModel, db_to_linear
from .protocol import HonestAlice, HonestBob, ProtocolConfig, run_protocol, write_transcript
from .stats import simulate_intensity

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
SWEEPABLE = ("alpha2", "kappa", "eta", "a0t", "dark", "visibility", "n")
CSV_COLUMNS = (
    "param", "value", "alpha2", "kappa", "eps_a", "eps_b", "eps_sum", "delta_n",
    "classical_floor", "advantage", "mc_click_rate", "mc_bias", "mc_bias_err",
    "mc_abort_freq", "error",
)
PLOT_COLUMNS = ("alpha2", "eps_a", "eps_b", "eps_sum", "classical_floor")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class Sweep:
    param: str
    start: float
    stop: float
    steps: int = 1
    scale: str = "linear"

    def __post_init__(self) -> None:
        if self.param not in SWEEPABLE:
            raise UsageError(f"sweep: cannot sweep {self.param!r}; choose from {SWEEPABLE}")
        if self.steps < 1:
            raise UsageError("sweep: steps must be >= 1")
        if self.scale not in ("linear", "log"):
            raise UsageError(f"sweep: scale must be linear or log, got {self.scale!r}")
        if self.scale == "log" and (self.start <= 0 or self.stop <= 0):
            raise UsageError("sweep: log scale needs positive bounds")

    @classmethod
    def parse(cls, text: str) -> "Sweep":
        """``param:start:stop[:steps[:scale]]``"""
        parts = text.split(":")
        if not 3 <= len(parts) <= 5:
            raise UsageError(f"sweep: expected param:start:stop[:steps[:scale]], got {text!r}")
        try:
            start, stop = float(parts[1]), float(parts[2])
            steps = int(parts[3]) if len(parts) > 3 else 1
        except ValueError as e:
            raise UsageError(f"sweep: {e}") from None
        scale = parts[4] if len(parts) > 4 else "linear"
        return cls(parts[0], start, stop, steps, scale)

    def values(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.start])
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.steps)
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class ExperimentSpec:
    n: int = 10**7
    kappa: Optional[float] = None
    seed: int = 0
    delta_method: str = "chernoff"
    trials: int = 1
    alpha2: float = 0.03
    a0t: float = db_to_linear(4.3)
    eta: float = 0.105
    dark: float = 9e-4
    visibility: float = 0.965
    adversary: str = "none"
    phi: float = math.pi / 2
    target: str = "0"
    sweep: Optional[Sweep] = None
    monte_carlo: bool = False
    workers: int = 1
    out: Optional[str] = None
    plot_out: Optional[str] = None
    transcript_out: Optional[str] = None
    noise_sigma: float = 25.0

    def __post_init__(self) -> None:
        if self.adversary not in ADVERSARIES:
            raise UsageError(f"adversary: unknown {self.adversary!r}; choose from {ADVERSARIES}")
        if self.delta_method not in ("hoeffding", "chernoff"):
            raise UsageError(f"delta_method: unknown {self.delta_method!r}")
        for name in ("n", "trials", "workers"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name}: must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise UsageError("seed: must be a 64-bit unsigned integer")

    def points(self) -> list[tuple[str, float]]:
        if self.sweep is None:
            return [("alpha2", self.alpha2)]
        return [(self.sweep.param, float(v)) for v in self.sweep.values()]


@dataclass
class SweepRow:
    param: str
    value: float
    alpha2: Optional[float] = None
    kappa: Optional[float] = None
    eps_a: Optional[float] = None
    eps_b: Optional[float] = None
    eps_sum: Optional[float] = None
    delta_n: Optional[float] = None
    classical_floor: Optional[float] = None
    advantage: Optional[bool] = None
    mc_click_rate: Optional[float] = None
    mc_bias: Optional[float] = None
    mc_bias_err: Optional[float] = None
    mc_abort_freq: Optional[float] = None
    error: str = ""
    wall_time: float = field(default=0.0, compare=False)

    def rounded(self) -> "SweepRow":
        """Copy with floats at CSV precision (what a parsed file holds)."""
        return parse_row(format_row(self))


# ---------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def format_row(row: SweepRow) -> list[str]:
    return [_fmt(getattr(row, c)) for c in CSV_COLUMNS]


def parse_row(cells: list[str]) -> SweepRow:
    kw = {}
    for name, cell in zip(CSV_COLUMNS, cells):
        if name in ("param", "error"):
            kw[name] = cell
        elif name == "advantage":
            kw[name] = None if cell == "" else cell == "true"
        else:
            kw[name] = None if cell == "" else float(cell)
    return SweepRow(**kw)


def _open_for_write(path):
    try:
        return open(os.fspath(path), "w", newline="")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e


def emit_csv(rows: Iterable[SweepRow], path) -> None:
    """Header plus one line per row, floats at 6 significant digits."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow(format_row(row))


def read_csv(path) -> list[SweepRow]:
    with open(os.fspath(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header!r}")
        return [parse_row(cells) for cells in reader]


def emit_plot_data(rows: Iterable[SweepRow], path) -> None:
    rows = [r for r in rows if not r.error]
    if not rows:
        raise ValueError("no rows to write")
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for row in rows:
            w.writerow([_fmt(getattr(row, c)) for c in PLOT_COLUMNS])


# ---------------------------------------------------------------------------
# running


def _point_config(spec: ExperimentSpec, param: str, value: float) -> ProtocolConfig:
    params = dict(
        alpha2=spec.alpha2, a0t=spec.a0t, eta=spec.eta, dark=spec.dark,
        visibility=spec.visibility, n=spec.n, kappa=spec.kappa,
    )
    params[param] = int(round(value)) if param == "n" else value
    channel = ChannelModel.matched(
        alpha2=params["alpha2"], a0t=params["a0t"], eta=params["eta"],
        dark=params["dark"], visibility=params["visibility"],
    )
    kappa = params["kappa"] if params["kappa"] is not None else default_kappa(channel)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ProtocolConfig(n=params["n"], kappa=kappa, channel=channel, seed=spec.seed)


def evaluate_point(spec: ExperimentSpec, param: str, value: float) -> SweepRow:
    """Bounds (and Monte-Carlo if enabled) at one sweep point; errors go in the row."""
    t0 = time.perf_counter()
    row = SweepRow(param, value)
    try:
        cfg = _point_config(spec, param, value)
        report: SecurityReport = build_report(cfg, spec.delta_method)
        for k, v in report.as_row().items():
            setattr(row, k, v)
        if spec.monte_carlo:
            alice, bob = strategies_for(spec.adversary, spec.target, spec.phi)
            est = measure_bias(cfg, alice, bob, trials=spec.trials)
            row.mc_click_rate = est.click_rate
            row.mc_bias = est.mean_bias
            row.mc_bias_err = est.std_error
            row.mc_abort_freq = est.abort_freq
    except (ValueError, ArithmeticError) as e:
        row.error = f"{type(e).__name__}: {e}".replace(",", ";")
    row.wall_time = time.perf_counter() - t0
    return row


def run_experiment(spec: ExperimentSpec) -> tuple[list[SweepRow], int]:
    """Evaluate every sweep point; rows are written in sweep order as they finish.

    The exit status is 0 only if no row carries an error marker.
    """
    points = spec.points()
    writer = fh = None
    if spec.out:
        fh = _open_for_write(spec.out)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
    rows: list[SweepRow] = []
    try:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            for row in pool.map(lambda p: evaluate_point(spec, *p), points):
                rows.append(row)
                log.info("%s=%.6g eps_sum=%s wall=%.3fs", row.param, row.value, row.eps_sum, row.wall_time)
                if writer is not None:
                    writer.writerow(format_row(row))
                    fh.flush()
    finally:
        if fh is not None:
            fh.close()
    if spec.plot_out:
        emit_plot_data(rows, spec.plot_out)
    if spec.transcript_out:
        _export_transcript(spec)
    status = EXIT_OK if all(not r.error for r in rows) else EXIT_RUNTIME
    return rows, status


def _export_transcript(spec: ExperimentSpec) -> None:
    """One honest run at the first sweep point, with Alice's intensity readings."""
    cfg = _point_config(spec, *spec.points()[0])
    _, records = run_protocol(cfg, HonestAlice(cfg.channel), HonestBob(cfg.channel))
    rng = np.random.default_rng([spec.seed, 1])
    sample = simulate_intensity(cfg.channel, cfg.n, spec.noise_sigma, rng)
    write_transcript(records, spec.transcript_out, {"intensity": sample.readings})


# ---------------------------------------------------------------------------
# configuration


_SECTIONS = {
    "protocol": {"n", "kappa", "seed", "delta_method", "trials"},
    "channel": {"alpha2", "a0t", "a0t_db", "eta", "dark", "visibility"},
    "adversary": {"adversary", "name", "phi", "target"},
    "sweep": {"spec", "param", "start", "stop", "steps", "scale"},
    "output": {"out", "plot", "transcript", "monte_carlo", "workers", "noise_sigma"},
}
_FLOAT = {"a0t_db", "kappa", "alpha2", "a0t", "eta", "dark", "visibility", "phi", "noise_sigma"}
_INT = {"n", "seed", "trials", "workers"}


def _convert(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _INT:
            value = float(raw)
            if value != int(value):
                raise ValueError(f"not an integer: {raw!r}")
            return int(value)
        if key in _FLOAT:
            return float(raw)
    except ValueError as e:
        raise UsageError(f"{key}: {e}") from None
    if key == "monte_carlo":
        if raw.lower() not in ("on", "off", "true", "false", "1", "0", "yes", "no"):
            raise UsageError(f"monte_carlo: expected on/off, got {raw!r}")
        return raw.lower() in ("on", "true", "1", "yes")
    return raw


def _apply(values: dict, key: str, raw) -> None:
    if key == "a0t_db":
        values["a0t"] = db_to_linear(_convert(key, raw) if isinstance(raw, str) else raw)
    elif key == "name":
        values["adversary"] = raw
    elif key == "plot":
        values["plot_out"] = raw
    elif key == "transcript":
        values["transcript_out"] = raw
    else:
        values[key] = _convert(key, raw) if isinstance(raw, str) else raw


def load_config(path) -> dict:
    """Read a sectioned key = value file into ExperimentSpec keyword values."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(os.fspath(path)) as fh:
            parser.read_file(fh)
    except OSError as e:
        raise UsageError(f"config: cannot read {path}: {e.strerror or e}") from None
    except configparser.Error as e:
        raise UsageError(f"config: {e}") from None
    values: dict = {}
    sweep: dict = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise UsageError(f"config: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise UsageError(f"config: unknown key {key!r} in [{section}]")
            if section == "sweep":
                sweep[key] = raw.strip()
            else:
                _apply(values, key, raw)
    if "spec" in sweep:
        values["sweep"] = Sweep.parse(sweep["spec"])
    elif sweep:
        missing = {"param", "start", "stop"} - sweep.keys()
        if missing:
            raise UsageError(f"config: [sweep] missing {sorted(missing)}")
        text = ":".join([sweep["param"], sweep["start"], sweep["stop"],
                         sweep.get("steps", "1"), sweep.get("scale", "linear")])
        values["sweep"] = Sweep.parse(text)
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qbitgen", description="Quantum bit-string generation bounds and simulation.")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--alpha2", metavar="F")
    p.add_argument("--n", metavar="INT")
    p.add_argument("--kappa", metavar="F")
    p.add_argument("--eta", metavar="F")
    p.add_argument("--a0t-db", metavar="F", dest="a0t_db")
    p.add_argument("--a0t", metavar="F")
    p.add_argument("--dark", metavar="F")
    p.add_argument("--visibility", metavar="F")
    p.add_argument("--seed", metavar="INT")
    p.add_argument("--adversary", metavar="NAME", choices=ADVERSARIES)
    p.add_argument("--phi", metavar="F")
    p.add_argument("--target", metavar="BITS")
    p.add_argument("--trials", metavar="INT")
    p.add_argument("--delta-method", dest="delta_method", choices=("hoeffding", "chernoff"))
    p.add_argument("--sweep", metavar="SPEC", help="param:start:stop[:steps[:log|linear]]")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--plot-out", metavar="PATH", dest="plot")
    p.add_argument("--transcript-out", metavar="PATH", dest="transcript")
    p.add_argument("--monte-carlo", choices=("on", "off"), dest="monte_carlo")
    p.add_argument("--workers", metavar="INT")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def spec_from_args(argv: Optional[list[str]] = None) -> tuple[ExperimentSpec, bool]:
    args = build_parser().parse_args(argv)
    values = load_config(args.config) if args.config else {}
    for key, raw in vars(args).items():
        if key in ("config", "verbose") or raw is None:
            continue
        if key == "sweep":
            values["sweep"] = Sweep.parse(raw)
        else:
            _apply(values, key, raw)
    try:
        return ExperimentSpec(**values), args.verbose
    except TypeError as e:
        raise UsageError(str(e)) from None


def main(argv: Optional[list[str]] = None) -> int:
    try:
        spec, verbose = spec_from_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")
    try:
        rows, status = run_experiment(spec)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    if not spec.out:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow(format_row(row))
    for row in rows:
        if row.error:
            print(f"{row.param}={row.value:.6g}: {row.error}", file=sys.stderr)
    return status
