"""BEOL design grid: HRS/LRS ratio, memory window and peak current per design.

Thin wrapper over the ``design-study`` CLI study that also prints the
metrics table in a readable layout.
"""

import argparse
import csv
import sys
from pathlib import Path

from fefetsim.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=Path(__file__).parents[1] / "configs" / "design_study.ini")
    ap.add_argument("--out", type=Path, default=Path("out/design_study"))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    code = cli_main(["design-study", "--config", str(args.config), "--out", str(args.out), "--jobs", str(args.jobs)])
    with open(args.out / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    print(f"{'design':28s} {'MW_V':>8s} {'HRS/LRS':>12s} {'I_peak_fw_A':>12s} {'P-loop_V':>9s}")
    for r in rows:
        print(f"{r['design_id']:28s} {float(r['mw_V']):8.3f} {float(r['ratio']):12.6g} "
              f"{float(r['i_peak_fw_A']):12.4e} {float(r['ps_loop_width_V']):9.3f}")
    sys.exit(code)


if __name__ == "__main__":
    main()
