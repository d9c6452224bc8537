"""Monte-Carlo bias of the two built-in attacks against the analytic bounds."""
import argparse
import warnings

from qbitgen.adversary import ALICE_STRADDLE, BOB_EARLY, measure_bias, strategies_for
from qbitgen.bounds import epsilon_b_bound
from qbitgen.optics import ChannelModel
from qbitgen.protocol import ProtocolConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha2", type=float, default=0.03)
    ap.add_argument("--n", type=float, default=1e6)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ch = ChannelModel(alpha2=args.alpha2)
    for adversary, kappa in ((BOB_EARLY, 0.5), (ALICE_STRADDLE, 2e-3), (ALICE_STRADDLE, 0.5)):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cfg = ProtocolConfig(n=int(args.n), kappa=kappa, channel=ch, seed=args.seed)
        alice, bob = strategies_for(adversary)
        est = measure_bias(cfg, alice, bob, trials=args.trials)
        print(
            f"{adversary:15s} kappa={kappa:<6g} bias={est.mean_bias:.5f}+-{est.std_error:.5f} "
            f"abort_freq={est.abort_freq:.2f} click_rate={est.click_rate:.3e}"
        )
    print(f"eps_B bound {epsilon_b_bound(args.alpha2):.5f}")


if __name__ == "__main__":
    main()
