"""SOI FeFET sweep with and without border traps.

Reports memory window, polarization-loop width and trap/inversion charge
at the top of the sweep, and writes both I-V traces.
"""

import argparse
from pathlib import Path

import numpy as np

from fefetsim.cli import write_iv_csv
from fefetsim.constants import Q
from fefetsim.device import (SweepProgram, UndefinedMetricError, memory_window, polarization_loop_width,
                             soi_design, sweep_ids_vgs, switching_steps)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sigma", type=float, default=0.4)
    ap.add_argument("--i-ref", type=float, default=1e-8, help="A/um")
    ap.add_argument("--gate-wf", type=float, default=4.6, help="gate work function, eV")
    ap.add_argument("--out", type=Path, default=Path("out/soi_hysteresis"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    prog = SweepProgram(steps_per_branch=120)
    for traps in (False, True):
        d = soi_design(traps=traps, seed=args.seed, sigma_ratio=args.sigma, gate_workfunction=args.gate_wf)
        tr = sweep_ids_vgs(d, prog)
        write_iv_csv(args.out / f"iv_traps_{'on' if traps else 'off'}.csv", tr)
        try:
            mw = f"{memory_window(tr, args.i_ref):.3f} V"
        except UndefinedMetricError as exc:
            mw = f"undefined ({exc})"
        try:
            loop = f"{polarization_loop_width(tr):.3f} V"
        except UndefinedMetricError:
            loop = "none"
        k = int(np.argmax(tr.v_gs))
        print(f"traps={'on ' if traps else 'off'} MW={mw} P-loop={loop} "
              f"jumps={switching_steps(tr)} |Q_trap|(+3V)={np.abs(tr.q_trap[k]).max():.4f} "
              f"qN_inv(+3V)={Q * tr.n_inv[k].max():.4f} C/m^2")


if __name__ == "__main__":
    main()
