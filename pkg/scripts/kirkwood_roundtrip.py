"""State -> rates -> Kirkwood distribution -> density matrix, for a pure
and a mixed input; writes the reconstructed distribution as long-form CSV.

    python3 scripts/kirkwood_roundtrip.py --n 128 --out kirkwood.csv
"""

import argparse
import csv

import numpy as np

from weaktime.grid import TemporalGrid
from weaktime.interferometer import forward_rates
from weaktime.states import fidelity, gaussian_pulse, mix, pure_to_density
from weaktime.tomography import kirkwood_from_fringes, kirkwood_function, reconstruct_density


def run(state, grid, theta, n_phi):
    phis = 2 * np.pi * np.arange(n_phi) / n_phi
    k = kirkwood_from_fringes(forward_rates(state, [theta], phis), grid)
    rho = reconstruct_density(k)
    truth = kirkwood_function(state)
    return k, {
        "fidelity": fidelity(state, rho),
        "purity": rho.purity(),
        "|N-1|": abs(k.normalization() - 1),
        "max|K-K_true|": float(np.max(np.abs(k.values - truth.values))),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--theta", type=float, default=np.pi / 4)
    ap.add_argument("--n-phi", type=int, default=4)
    ap.add_argument("--out", default="kirkwood.csv")
    args = ap.parse_args()

    g = TemporalGrid(args.n, 25.6 / args.n)
    pure = pure_to_density(gaussian_pulse(g, 0.4, 1.0, chirp=0.3))
    mixed = mix([(pure_to_density(gaussian_pulse(g, 1.5, 0.8, chirp=0.2)), 0.6),
                 (pure_to_density(gaussian_pulse(g, -1.5, 1.0)), 0.4)])
    for name, state in (("pure", pure), ("mixed", mixed)):
        k, m = run(state, g, args.theta, args.n_phi)
        print(name, " ".join(f"{key}={val:.3e}" for key, val in m.items()),
              f"(input purity {state.purity():.6f})")
        if name == "pure":
            with open(args.out, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "omega", "re", "im"])
                for j, t in enumerate(g.times):
                    for kk, om in enumerate(g.omegas):
                        v = k.values[j, kk]
                        w.writerow([f"{t:.17g}", f"{om:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
