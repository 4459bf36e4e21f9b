"""Conservation and virial checks for 0.9 Q (d=1, p=7), plus a 1.1 Q pre-blow-up window.

Usage: python scripts/conservation_virial.py [--t-max 5]
"""
import argparse

import numpy as np

from groupnls import EvolveConfig, Grid, NlsParameters, evolve, ground_state
from groupnls.evolution import conservation_drift, virial_report


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t-max", type=float, default=5.0)
    args = ap.parse_args()
    params = NlsParameters(1, 7.0, 1.0)
    u0 = 0.9 * ground_state(params, Grid(1, 2048, 240.0))
    drifts = {}
    for dt in (1e-3, 5e-4, 2.5e-4):
        cfg = EvolveConfig(dt_initial=dt, t_max=args.t_max, adaptive=False, stop_on_scatter=False,
                           sample_stride=int(round(1e-2 / dt)))
        traj = evolve(u0, params, cfg)
        d = drifts[dt] = conservation_drift(traj)
        T = d["duration"]
        print(f"dt={dt:.2e}  mass/T={d['mass'] / T:.2e}  energy/T={d['energy'] / T:.2e}  "
              f"(vs |E0|: {d['energy_vs_E0'] / T:.2e})  momentum/T={d['momentum'] / T:.2e}  "
              f"virial={virial_report(traj, params).max_relative:.2e}")
    dts = sorted(drifts, reverse=True)
    for a, b in zip(dts, dts[1:]):
        print(f"energy drift ratio dt={a:g} -> {b:g}: {drifts[a]['energy'] / drifts[b]['energy']:.3f}")

    for dt in (1e-3, 5e-4, 2.5e-4):
        cfg = EvolveConfig(dt_initial=dt, t_max=2.0, adaptive=False, sample_stride=1, blowup_gradient_factor=10)
        traj = evolve(1.1 * ground_state(params, Grid(1, 8192, 60.0)), params, cfg)
        ratio = np.sqrt(traj.column("grad_sq") / traj.reports[0].grad_sq)
        t_cut = float(traj.t[np.argmax(ratio >= 2.0)])
        rep = virial_report(traj, params, t_end=t_cut)
        print(f"1.1Q dt={dt:.2e}: {traj.outcome} at t={traj.times[-1]:.4f}; virial on t<={t_cut:.4f}: {rep.max_relative:.2e}")


if __name__ == "__main__":
    main()
