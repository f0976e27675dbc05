"""Command line entry point and run orchestration."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (ConfigError, SimConfig, build_coefficients, build_ensemble, build_stack, build_traps,
                     build_waveform, dump_config, parse_config, parse_doping, with_overrides)
from .device import (DesignPoint, FeFETDesign, MobilityModel, SweepError, SweepProgram, UndefinedMetricError,
                     design_study, evaluate_design)
from .ferro import LGKIntegrationError, extract_ec_pr, mfm_loop
from .stack import SolverError

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
OUT_ENV = "FEFETSIM_OUT"

PV_COLUMNS = ["time_s", "v_V", "e_field_Vpm", "p_s_Cpm2", "p_t_Cpm2", "branch"]
IV_COLUMNS = ["v_gs_V", "branch", "i_ds_A_per_um", "n_inv_mean_cm2", "q_trap_mean_Cpcm2"]
METRIC_COLUMNS = ["design_id", "mode", "doping_cm3", "t_ch_nm", "mw_V", "hrs_ohm", "lrs_ohm", "ratio",
                  "i_peak_fw_A", "i_peak_bw_A", "ps_loop_width_V", "status"]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_pv_csv(path, trace):
    _write_csv(path, PV_COLUMNS,
               zip(trace.time, trace.voltage, trace.field, trace.p_s, trace.p_t, trace.branch))


def iv_columns(n_grains):
    return (IV_COLUMNS + [f"p_s_grain_{k}_Cpm2" for k in range(n_grains)]
            + [f"n_inv_grain_{k}_cm2" for k in range(n_grains)])


def write_iv_csv(path, trace):
    ng = trace.p_grain.shape[1]
    rows = []
    for k in range(len(trace)):
        rows.append([trace.v_gs[k], trace.branch[k], trace.i_ds_per_um[k], trace.n_inv_mean[k] * 1e-4,
                     trace.q_trap_mean[k] * 1e-4, *trace.p_grain[k], *(trace.n_inv[k] * 1e-4)])
    _write_csv(path, iv_columns(ng), rows)


def write_metrics_csv(path, rows):
    _write_csv(path, METRIC_COLUMNS, ([r.get(c, math.nan) for c in METRIC_COLUMNS] for r in rows))


def resolve_out_dir(cfg: SimConfig, cli_out=None) -> Path:
    """--out, then $FEFETSIM_OUT, then the config, then ./out."""
    return Path(cli_out or os.environ.get(OUT_ENV) or cfg.run.out or "out")


def _manifest(out: Path, cfg: SimConfig, status: str, artifacts):
    data = {"version": __version__, "study": cfg.study, "seed": cfg.run.seed, "status": status,
            "artifacts": sorted(artifacts), "config": dump_config(cfg)}
    with open(out / "manifest.json", "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fefet_design(cfg: SimConfig, mode=None, doping_cm3=None, t_ch_nm=None) -> FeFETDesign:
    d = cfg.device
    mob = MobilityModel(d.mobility, d.mu0_cm2_Vs * 1e-4, d.e_crit_V_m, d.mobility_exponent)
    return FeFETDesign(build_ensemble(cfg), build_stack(cfg, t_ch_nm, doping_cm3), mode or d.mode, mob,
                       build_traps(cfg), d.width_um * 1e-6)


def _program(cfg: SimConfig) -> SweepProgram:
    s = cfg.sweep
    return SweepProgram(s.v_start_V, s.v_peak_V, s.slew_rate_V_s, s.v_ds_V, s.steps_per_branch)


def _design_row(row, label, mode, doping_cm3, t_ch_nm):
    row.update(design_id=label, mode=mode, doping_cm3=abs(doping_cm3), t_ch_nm=t_ch_nm)
    return row


def run(cfg: SimConfig, out=None) -> int:
    """Execute one study and write its artifacts.  Returns the exit code."""
    out = Path(out) if out is not None else resolve_out_dir(cfg)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        log.error("output directory %s is not writable: %s", out, exc)
        return EXIT_CONFIG
    artifacts = []
    status, code = "ok", EXIT_OK
    if cfg.study == "landau-extract":
        coeffs = build_coefficients(cfg)
        e_c, p_r = extract_ec_pr(coeffs)
        _write_csv(out / "landau.csv", ["e_c_Vpm", "p_r_Cpm2", "tau_s"], [[e_c, p_r, float(coeffs.tau)]])
        artifacts.append("landau.csv")
    elif cfg.study == "mfm-loop":
        trace = mfm_loop(build_ensemble(cfg), build_waveform(cfg), eps_r_F=cfg.ferro.eps_r,
                         t_F=cfg.stack.t_F_nm * 1e-9)
        write_pv_csv(out / "pv_trace.csv", trace)
        artifacts.append("pv_trace.csv")
    elif cfg.study == "fefet-sweep":
        design = _fefet_design(cfg)
        dop = parse_doping(cfg.stack.doping)
        try:
            row, trace = evaluate_design(design, _program(cfg), cfg.device.i_ref_A_per_um, cfg.device.v_read_V)
            row["status"] = "ok"
        except (SweepError, UndefinedMetricError) as exc:
            log.error("%s", exc)
            trace = getattr(exc, "partial", None)
            row = {"status": f"failed: {exc}"}
            status, code = "solver-error", EXIT_SOLVER
        if trace is not None:
            write_iv_csv(out / "iv_trace.csv", trace)
            artifacts.append("iv_trace.csv")
        write_metrics_csv(out / "metrics.csv",
                          [_design_row(row, "sweep", design.mode, dop, cfg.stack.t_ch_nm)])
        artifacts.append("metrics.csv")
    elif cfg.study == "design-study":
        g = cfg.design
        points = [DesignPoint(m, dop * 1e6, t * 1e-9) for m in g.modes for dop in g.dopings_cm3 for t in g.t_ch_nm]
        s, d = cfg.stack, cfg.device
        results = design_study(
            points, _program(cfg), seed=cfg.run.seed, sigma_ratio=cfg.ferro.sigma_ec_ratio, jobs=cfg.run.jobs,
            i_ref=d.i_ref_A_per_um, v_read=d.v_read_V,
            n_grains=cfg.ferro.n_grains, coeffs=build_coefficients(cfg), traps=build_traps(cfg),
            mobility=MobilityModel(d.mobility, d.mu0_cm2_Vs * 1e-4, d.e_crit_V_m, d.mobility_exponent),
            grain_length=cfg.ferro.grain_length_nm * 1e-9, spacer=cfg.ferro.spacer_nm * 1e-9,
            width=d.width_um * 1e-6, t_F=s.t_F_nm * 1e-9, t_IL=s.t_IL_nm * 1e-9, t_BOX=s.t_BOX_nm * 1e-9,
            eps_F=cfg.ferro.eps_r, eps_IL=s.eps_IL, eps_ch=s.eps_ch, eps_BOX=s.eps_BOX,
            gate_workfunction=s.gate_workfunction_eV, back_workfunction=s.back_workfunction_eV,
            temperature=s.temperature_K, mesh_refine=s.mesh_refine)
        rows = []
        for row, trace in results:
            rows.append(row)
            if trace is not None:
                name = f"iv_trace_{row['design_id']}.csv"
                write_iv_csv(out / name, trace)
                artifacts.append(name)
            if row["status"] != "ok":
                status, code = "solver-error", EXIT_SOLVER
        write_metrics_csv(out / "metrics.csv", rows)
        artifacts.append("metrics.csv")
    _manifest(out, cfg, status, artifacts)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fefetsim", description="Grain-resolved quasi-static FeFET simulator.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="study", required=True)
    for name in ("mfm-loop", "fefet-sweep", "design-study", "landau-extract"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="INI config file")
        p.add_argument("--out", type=Path, help=f"output directory (overrides ${OUT_ENV})")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        if name == "landau-extract":
            for c in ("alpha", "beta", "gamma"):
                p.add_argument(f"--{c}", type=float)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, study=args.study)
        over = {k: getattr(args, k) for k in ("seed", "jobs") if getattr(args, k) is not None}
        if over:
            cfg = with_overrides(cfg, **over)
        if args.study == "landau-extract":
            inline = {c: getattr(args, c) for c in ("alpha", "beta", "gamma") if getattr(args, c) is not None}
            if inline:
                cfg = replace(cfg, ferro=replace(cfg.ferro, **inline))
            coeffs = build_coefficients(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.study == "landau-extract":
        e_c, p_r = extract_ec_pr(coeffs)
        print(f"E_c = {e_c:.10e} V/m")
        print(f"P_r = {p_r:.10e} C/m^2")
        print(f"tau = {float(coeffs.tau):.10e} s")
        if args.out is None and not os.environ.get(OUT_ENV) and not cfg.run.out:
            return EXIT_OK
    try:
        return run(cfg, resolve_out_dir(cfg, args.out))
    except (SolverError, LGKIntegrationError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
