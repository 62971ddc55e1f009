"""BLA of the four FIR Wiener systems for every excitation class.

Prints the mean absolute ratio to the linear response (dB and degrees)
after least-squares scaling.
"""

import argparse

from wienerbla import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    results = ex.fig2(args.seed)
    print("system " + " ".join(f"{k.value:>14}" for k in ex.CLASS_ORDER))
    for s in (1, 2, 3, 4):
        cells = [results[(s, k)] for k in ex.CLASS_ORDER]
        print(f"{s:>6} " + " ".join(f"{c.mean_abs_ratio_db:6.3f}/{c.mean_abs_phase_deg:6.2f}" for c in cells))


if __name__ == "__main__":
    main()
