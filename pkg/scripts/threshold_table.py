"""Ledger of l-values and scattering thresholds for the built-in groups.

Usage: python scripts/threshold_table.py [--out thresholds.csv] [--b1-iter 800]
"""
import argparse
import time

from groupnls import Grid, NlsParameters
from groupnls.symmetry import builtin_group, trivial_group
from groupnls.thresholds import RotationPhaseFamily, ThresholdTable, populate_ledger, threshold_entry


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="thresholds.csv")
    ap.add_argument("--b1-iter", type=int, default=800)
    args = ap.parse_args()
    ledger = ThresholdTable()
    p1, p2 = NlsParameters(1, 7.0), NlsParameters(2, 5.0)
    jobs = [
        (trivial_group(1), p1, None, {}),
        (builtin_group("G_even"), p1, Grid(1, 1024, 40.0), {"max_iter": 3000}),
        (builtin_group("G_odd"), p1, Grid(1, 1024, 40.0), {"max_iter": 3000}),
        (builtin_group("B2"), p2, Grid(2, 256, 32.0), {"max_iter": args.b1_iter}),
        (builtin_group("B1"), p2, Grid(2, 256, 32.0), {"max_iter": args.b1_iter}),
        (RotationPhaseFamily(), p2, None, {}),
    ]
    for G, params, grid, kw in jobs:
        t0 = time.time()
        populate_ledger(G, params, ledger, grid=grid, **kw)
        e = threshold_entry(G, params, ledger)
        trivial = "G0" if params.d == 1 else f"G0_d{params.d}"
        base = ledger.get_l(trivial, params.omega).value if ledger.has_l(trivial, params.omega) else None
        rel = f"  s/l = {e.s / base:.6f}" if base else ""
        print(f"{G.label:>8}: l^G = {e.l:.8g}  s = {e.s:.8g}{rel}  chain {e.chain_text}  "
              f"flags {';'.join(e.flags) or '-'}  [{time.time() - t0:.1f}s]")
    ledger.write_csv(args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
