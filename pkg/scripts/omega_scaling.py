"""l_omega against omega: the exact exponent 2/(p-1) - (d-2)/2 checked by quadrature.

Usage: python scripts/omega_scaling.py
"""
import numpy as np

from groupnls import NlsParameters
from groupnls.ground_state import action_scaling_exponent, ground_action_radial


def main():
    for d, p in [(1, 7.0), (2, 5.0), (3, 3.0)]:
        base = ground_action_radial(NlsParameters(d, p, 1.0))
        for w in (0.25, 0.5, 2.0, 4.0):
            params = NlsParameters(d, p, w)
            fitted = np.log(ground_action_radial(params) / base) / np.log(w)
            print(f"(d,p)=({d},{p:g}) omega={w:<5} fitted exponent {fitted:.8f}  exact {action_scaling_exponent(params):.8f}")


if __name__ == "__main__":
    main()
