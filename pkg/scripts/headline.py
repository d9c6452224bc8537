"""Security report at the nominal operating point, with calibration envelope."""
import argparse
import warnings

from qbitgen.bounds import build_report, default_kappa
from qbitgen.optics import ChannelModel, honest_click_prob
from qbitgen.stats import CalibrationError, propagate_systematics
from qbitgen.protocol import ProtocolConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha2", type=float, default=0.03)
    ap.add_argument("--n", type=float, default=1e7)
    ap.add_argument("--kappa", choices=["honest", "default"], default="honest")
    ap.add_argument("--rel-eta", type=float, default=0.10)
    ap.add_argument("--rel-alpha2", type=float, default=0.10)
    args = ap.parse_args()

    ch = ChannelModel(alpha2=args.alpha2)
    kappa = honest_click_prob(ch) if args.kappa == "honest" else default_kappa(ch)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = build_report(ProtocolConfig(n=int(args.n), kappa=kappa, channel=ch))
    print(report.to_text(), end="")
    lo, hi = propagate_systematics(report, CalibrationError(args.rel_eta, args.rel_alpha2))
    print(f"eps_sum_envelope={lo:.6g}..{hi:.6g}")


if __name__ == "__main__":
    main()
