"""Rotation-phase family u(R_t x) = e^{it} u(x) in d=2: the charge-one sector.

Evolves a e^{i phi} g(r) through the reduced radial solver, where g is the
charged stationary profile, and classifies against the sector threshold.

Usage: python scripts/sector_family.py [--amplitudes 0.9,1.1] [--t-max 5]
"""
import argparse

from groupnls import EvolveConfig, NlsParameters
from groupnls.ground_state import ground_action_radial, sector_action, shoot_vortex
from groupnls.sector import RadialGrid, angular_sector_evolve, sector_report
from groupnls.thresholds import classify_values


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--amplitudes", default="0.9,1.1")
    ap.add_argument("--t-max", type=float, default=5.0)
    ap.add_argument("--points", type=int, default=4000)
    ap.add_argument("--radius", type=float, default=80.0)
    args = ap.parse_args()
    params = NlsParameters(2, 5.0, 1.0)
    l_sector = sector_action(params)
    l = ground_action_radial(params)
    print(f"l = {l:.8g}, sector l^G = {l_sector:.8g} (ratio {l_sector / l:.5f})")
    prof = shoot_vortex(params)
    rg = RadialGrid(args.points, args.radius)
    cfg = EvolveConfig(dt_initial=1e-3, t_max=args.t_max, blowup_gradient_factor=10.0, sample_stride=10)
    for a in (float(v) for v in args.amplitudes.split(",")):
        g0 = a * prof(rg.r)
        rep = sector_report(g0, rg, 1, params)
        verdict = classify_values(rep.S, rep.K, l_sector, l_sector)
        traj = angular_sector_evolve(g0, 1, params, cfg, rg)
        s = traj.summary()
        print(f"a={a:.3f}: S/l^G={rep.S / l_sector:.5f} K={rep.K:+.4e} -> {verdict}; "
              f"outcome {s['outcome']} ({s['reason']}) at t={s['t_end']:.3f}")


if __name__ == "__main__":
    main()
