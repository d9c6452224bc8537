"""Sweep the mean photon number and write eps_A, eps_B and their sum for plotting."""
import argparse
import sys

from qbitgen.harness import ExperimentSpec, Sweep, emit_csv, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--start", type=float, default=0.005)
    ap.add_argument("--stop", type=float, default=0.2)
    ap.add_argument("--steps", type=int, default=40)
    ap.add_argument("--n", type=float, default=1e7)
    ap.add_argument("--out", default="fig3.csv")
    args = ap.parse_args()

    spec = ExperimentSpec(n=int(args.n), sweep=Sweep("alpha2", args.start, args.stop, args.steps, "log"))
    rows, status = run_experiment(spec)
    emit_csv(rows, args.out)
    window = [r.alpha2 for r in rows if r.advantage]
    if window:
        print(f"advantage for alpha2 in [{min(window):.4g}, {max(window):.4g}]", file=sys.stderr)
    best = min(rows, key=lambda r: r.eps_sum)
    print(f"min eps_sum {best.eps_sum:.4f} at alpha2 {best.alpha2:.4g}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
