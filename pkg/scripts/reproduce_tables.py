#!/usr/bin/env python3
"""Print the deterministic reference numbers (Schmidt entropies, conversion, DLCZ, few-atom).

    python3 scripts/reproduce_tables.py            # fast parts only
    python3 scripts/reproduce_tables.py --all      # adds the optimizer sweep and pulsed runs (~10 min)
"""
import argparse

import numpy as np

from fourlevel.conversion import (DiamondParams, PulseGrid, PulseShape, coupling_coefficients, efficiency_vs_opd,
                                  generalized_rabi, modulation_frequency, parametric_solution, pulse_conversion,
                                  reference_pulses)
from fourlevel.dlcz import DetectorModel, SwapInput, swap_metrics
from fourlevel.few_atom import AtomGeometry, independent_p1, steady_state_exact
from fourlevel.schmidt import cascade_schmidt, entropy


def schmidt_table():
    print("tau   N mu+1   lambda1   S (bits)")
    for tau, f in [(0.1, 5), (0.25, 5), (0.5, 5), (0.5, 10)]:
        lam = cascade_schmidt(tau, f).lambdas
        print(f"{tau:<5} {f:<8} {lam[0]:.4f}    {entropy(lam, 2):.4f}")


def dlcz_table():
    print("eta_r  eta_t  detector  F       P_H     P_S")
    for er in (0.1, 0.5, 1.0):
        for et in (0.5, 1.0):
            for kind in ("nrpd", "pnrd"):
                F, PH, PS = swap_metrics(SwapInput((0.8, 0.15, 0.05), er), DetectorModel(kind, et))
                print(f"{er:<6} {et:<6} {kind:<9} {F:.4f}  {PH:.4f}  {PS:.4f}")


def conversion_table():
    p = DiamondParams()
    c = coupling_coefficients(p)
    print(f"opd 150 reference point: eta_down {parametric_solution(c, 1.0, 'down')[0]:.5f}, "
          f"eta_up {parametric_solution(c, 1.0, 'up')[0]:.5f}")


def few_atom_table():
    for side in (1.0, 2.0, 3.0, 5.0):
        P1s, P1ns, P2s, P2ns, _ = steady_state_exact(AtomGeometry.square(side), 0.2, 5.0, 1.0)
        print(f"side {side} lambda: P1s {P1s:.4e}  P1ns {P1ns:.4e}  P2s {P2s:.4e}  P2ns {P2ns:.4e}  "
              f"P1s/P1(0) {P1s / independent_p1(0.2, 5.0, 1.0):.4f}")


def slow_tables():
    for r in efficiency_vs_opd([1, 10, 50, 150, 300, 600]):
        print(f"opd {r.opd:>5g}: eta_max {r.eta_max:.5f} at {np.round(r.best_params, 2).tolist()}")
    p = DiamondParams()
    for dur in (100, 15):
        pump_a, probe, t_end = reference_pulses(dur)
        res = pulse_conversion(p, pump_a, PulseShape("cw"), probe, PulseGrid(t_end_ns=t_end))
        print(f"{dur} ns probe: eta_down {res.eta_d:.5f}, modulation / generalized Rabi "
              f"{modulation_frequency(res) / generalized_rabi(p):.3f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--all", action="store_true", help="include the slow optimizer and pulse runs")
    args = ap.parse_args()
    for fn in (schmidt_table, dlcz_table, conversion_table, few_atom_table):
        fn()
        print()
    if args.all:
        slow_tables()


if __name__ == "__main__":
    main()
