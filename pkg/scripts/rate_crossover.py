#!/usr/bin/env python3
"""Photon-rate crossover vs excitation time.

Sweeps Omega_j * tau_e across both regimes at fixed resonance (harmonic j on
2*omega_tilde of the fundamental): the rate sits at eps/T while the
excitation is fast compared to the drive harmonic and falls like
2/(Omega_j*tau_e) beyond, modulated by the |sin| factor of the ramp
spectrum.  Writes a CSV; --plot adds a log-log figure.
"""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from condcav.drive import linear_ramp
from condcav.msa import msa_parametric
from condcav.spectrum import CavityConfig, build_spectrum, solve_k


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="rate_crossover.csv")
    parser.add_argument("--harmonic", type=int, default=55)
    parser.add_argument("--points", type=int, default=25)
    parser.add_argument("--plot", action="store_true")
    args = parser.parse_args()

    V0, L_x = 10.0, 1.0
    k0 = solve_k(V0, L_x, 1)
    eps_target = 1e-3
    denom = L_x * k0**2 + V0 * (1 + V0 * L_x / 4)
    cfg = CavityConfig(L_x, 100.0, 100.0, V_0=V0, V_max=V0 + eps_target * denom)
    spec = build_spectrum(cfg, drive_f0=0.5, mode_cut=(1, 1, 1))
    mode = spec.psi_mode((1, 1, 1))
    eps = mode.epsilon
    j = args.harmonic
    T = 2 * math.pi * j / (2 * mode.omega_tilde)
    Omega_j = 2 * mode.omega_tilde

    rows = []
    for x in np.geomspace(1e-2, 1e2, args.points):   # x = Omega_j * tau_e
        tau_e = x / Omega_j
        drive = linear_ramp(T, tau_e, j)
        gamma = mode.k0**2 * float(drive.f_j[j - 1]) / Omega_j
        if gamma <= 0:
            rows.append([x, 0.0, 0.0, 0.0])
            continue
        tau = np.linspace(0, 5.0 / gamma, 400)
        _, record = msa_parametric(spec, drive, (1, 1, 1), j, tau)
        rows.append([x, record.fitted_rate[0] * T / eps,
                     1.0, 2.0 / x])

    path = Path(args.out)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Omega_j_tau_e", "rate_T_over_eps",
                         "slow_limit", "fast_limit"])
        for row in rows:
            writer.writerow([f"{v:.12e}" for v in row])
    print(f"wrote {path} ({len(rows)} points, j = {j})")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        data = np.array(rows)
        plt.figure(figsize=(6, 4))
        plt.loglog(data[:, 0], data[:, 1], "o-", label="fitted rate * T / eps")
        plt.loglog(data[:, 0], data[:, 3], "--", label="2/(Omega_j tau_e)")
        plt.axhline(1.0, ls=":", color="k", label="eps/T plateau")
        plt.xlabel(r"$\Omega_j \tau_e$")
        plt.ylabel(r"rate $\times T/\epsilon$")
        plt.legend()
        plt.tight_layout()
        plt.savefig(path.with_suffix(".png"), dpi=150)
        print(f"wrote {path.with_suffix('.png')}")


if __name__ == "__main__":
    main()
