"""KL divergence from normality at the output of System 2's FIR block, per class."""

import argparse

from wienerbla import experiments as ex, stats


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--bins", type=int, default=stats.DEFAULT_BINS)
    ap.add_argument("--span", type=float, default=stats.DEFAULT_SPAN_SIGMAS)
    args = ap.parse_args()
    for kind, kl in ex.table2(args.seed, bins=args.bins, span_sigmas=args.span).items():
        print(f"{kind.value:>6}  {kl:.4f}")


if __name__ == "__main__":
    main()
