"""Amplitude sweep of scaled ground states, d=1, p=7 (desk-scale dichotomy).

Usage: python scripts/amplitude_sweep.py [--out DIR] [--workers 4]
"""
import argparse
import os
import time

import numpy as np

from groupnls import EvolveConfig, ExperimentSpec, Grid, NlsParameters, Recipe, sweep
from groupnls.thresholds import trapping_check

AMPLITUDES = [round(float(a), 2) for a in np.arange(0.80, 1.2001, 0.05)]


def template(out=None) -> ExperimentSpec:
    params = NlsParameters(1, 7.0, 1.0)
    cfg = EvolveConfig(dt_initial=1e-3, t_max=10.0, blowup_gradient_factor=10.0, sample_stride=10)
    return ExperimentSpec(params, Grid(1, 32768, 256.0), "G0", Recipe("scaled_ground_state"), cfg, output_dir=out)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/amplitude_sweep")
    ap.add_argument("--workers", type=int, default=min(4, os.cpu_count() or 1))
    args = ap.parse_args()
    t0 = time.time()
    rows = sweep(template(args.out), {"a": AMPLITUDES}, workers=args.workers)
    for row in rows:
        res = row["_result"]
        s = res.summary
        trap = ""
        if res.prediction is not None and res.trajectory is not None:
            p = res.prediction
            bound = p.threshold if p.K >= 0 else p.l_group
            ok = trapping_check(res.trajectory.reports, bound, 1) if p.verdict != "OUT_OF_THEORY" else None
            trap = f" trapping={ok}"
        print(f"a={row['a']:.2f} S={float(row['S_omega'] or 'nan'):.6f} K={float(row['K'] or 'nan'):+.4f} "
              f"{row['prediction']:>16} -> {row['outcome']:<12} {s.get('reason', '')}@{s.get('t_end', float('nan')):.3f} "
              f"{row['agreement']}{trap}")
    print(f"total {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
