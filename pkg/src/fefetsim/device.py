"""FeFET assembly: grain slices in series, I_DS-V_GS sweeps, memory metrics."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constants import Q
from .ferro import GrainEnsemble, LandauCoefficients, sample_ensemble
from .stack import CHANNEL, SliceState, SolverError, Stack1D, build_mesh, initial_slice_state, self_consistent_point
from .traps import TrapDistribution

log = logging.getLogger(__name__)


class UndefinedMetricError(ValueError):
    pass


class SweepError(RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class MobilityModel:
    variant: str = "constant"  # or "effective-field"
    mu0: float = 10e-4  # m^2/(V s)
    e_crit: float = 1e8  # V/m
    exponent: float = 1.6

    def __post_init__(self):
        if self.variant not in ("constant", "effective-field"):
            raise ValueError(f"unknown mobility variant {self.variant!r}")
        if self.mu0 <= 0:
            raise ValueError("mu0 must be positive")

    def mobility(self, e_eff: float) -> float:
        if self.variant == "constant":
            return self.mu0
        return self.mu0 / (1.0 + (abs(e_eff) / self.e_crit) ** self.exponent)


@dataclass
class FeFETDesign:
    ensemble: GrainEnsemble
    stack: Stack1D
    mode: str = "enhancement"  # or "depletion"
    mobility: MobilityModel = field(default_factory=MobilityModel)
    traps: Optional[TrapDistribution] = field(default_factory=TrapDistribution)
    width: float = 1e-6
    initial_polarization: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mode not in ("depletion", "enhancement"):
            raise ValueError(f"mode must be 'depletion' or 'enhancement', got {self.mode!r}")
        if self.mode == "depletion" and self.stack.doping < 0:
            raise ValueError("depletion mode needs a donor-doped channel")
        if self.mode == "enhancement" and self.stack.doping > 0:
            raise ValueError("enhancement mode needs an acceptor-doped (or undoped) channel")

    @property
    def grain_length(self) -> float:
        return float(self.ensemble.lengths.mean())

    @property
    def gate_length(self) -> float:
        return self.ensemble.total_length

    @property
    def doping(self) -> float:
        return abs(self.stack.doping)


def soi_design(traps: bool = True, sigma_ratio: float = 0.4, seed=0, n_grains: int = 4,
               coeffs: LandauCoefficients = LandauCoefficients(), **stack_kw) -> FeFETDesign:
    """Fully depleted SOI FeFET: 4 x 6 nm grains, 6 nm undoped film, 30 nm BOX."""
    ens = sample_ensemble(n_grains, 6e-9, coeffs, sigma_ratio, seed)
    stack = Stack1D(t_F=10e-9, t_IL=1e-9, t_ch=6e-9, t_BOX=30e-9, doping=0.0, **stack_kw)
    return FeFETDesign(ens, stack, "enhancement",
                       MobilityModel("effective-field", 300e-4, 1e8, 1.6),
                       TrapDistribution() if traps else None)


def beol_design(mode: str, doping: float, t_ch: float, sigma_ratio: float = 0.4, seed=0,
                n_grains: int = 25, coeffs: LandauCoefficients = LandauCoefficients(),
                traps: Optional[TrapDistribution] = TrapDistribution(),
                mobility: MobilityModel = MobilityModel("constant", 10e-4),
                grain_length: float = 6e-9, spacer: float = 5e-10, width: float = 1e-6,
                **stack_kw) -> FeFETDesign:
    """Polysilicon-channel BEOL FeFET; ``doping`` is a magnitude in m^-3."""
    signed = doping if mode == "depletion" else -doping
    ens = sample_ensemble(n_grains, grain_length, coeffs, sigma_ratio, seed, spacer_thickness=spacer)
    stack = Stack1D(**{"t_F": 10e-9, "t_IL": 1e-9, "t_BOX": 200e-9, **stack_kw, "t_ch": t_ch, "doping": signed})
    return FeFETDesign(ens, stack, mode, mobility, traps, width)


@dataclass(frozen=True)
class SweepProgram:
    v_start: float = -3.0
    v_peak: float = 3.0
    slew_rate: float = 1.0  # V/s
    v_ds: float = 0.05
    steps_per_branch: int = 120

    def voltages(self):
        up = np.linspace(self.v_start, self.v_peak, self.steps_per_branch + 1)
        v = np.concatenate([up, up[-2::-1]])
        branch = np.array(["forward"] * up.size + ["backward"] * (up.size - 1))
        return v, branch

    @property
    def step_time(self) -> float:
        return abs(self.v_peak - self.v_start) / self.steps_per_branch / self.slew_rate


@dataclass
class IVTrace:
    v_gs: np.ndarray
    branch: np.ndarray
    i_ds: np.ndarray  # A, for the design width
    p_grain: np.ndarray  # (records, grains) C/m^2
    n_inv: np.ndarray  # (records, grains) m^-2
    q_trap: np.ndarray  # (records, grains) C/m^2
    width: float = 1e-6
    grain_lengths: Optional[np.ndarray] = None

    def __len__(self):
        return self.v_gs.size

    def branch_view(self, name):
        m = self.branch == name
        return self.v_gs[m], self.i_ds[m]

    @property
    def i_ds_per_um(self):
        return self.i_ds / (self.width * 1e6)

    @property
    def p_mean(self):
        if self.grain_lengths is None:
            return self.p_grain.mean(axis=1)
        return self.p_grain @ (self.grain_lengths / self.grain_lengths.sum())

    @property
    def n_inv_mean(self):
        return self.n_inv.mean(axis=1)

    @property
    def q_trap_mean(self):
        return self.q_trap.mean(axis=1)


def effective_normal_field(state: SliceState) -> float:
    """Electron-weighted mean |dpsi/dx| over the channel."""
    stack = state.stack
    x = stack.x
    el = np.flatnonzero(stack.tags == CHANNEL)
    e_el = np.abs(np.diff(state.psi)[el] / np.diff(x)[el])
    n_el = 0.5 * (state.n[el] + state.n[el + 1]) * np.diff(x)[el]
    tot = n_el.sum()
    return float(e_el @ n_el / tot) if tot > 0 else 0.0


def slice_conductance(state: SliceState, mobility: MobilityModel, grain_length: float, width: float) -> float:
    """Sheet conductance of one channel segment, W q mu N_inv / L."""
    mu = mobility.mobility(effective_normal_field(state)) if mobility.variant != "constant" else mobility.mu0
    return width * Q * mu * max(state.n_inv, 0.0) / grain_length


def series_current(slice_conductances, v_ds: float) -> float:
    g = np.asarray(slice_conductances, dtype=float)
    if np.any(g < 0):
        raise ValueError("conductances must be non-negative")
    if np.any(g == 0):
        log.debug("open channel segment, current set to zero")
        return 0.0
    return float(v_ds / np.sum(1.0 / g))


def channel_conductances(states, design: FeFETDesign):
    """Grain segments interleaved with spacer segments.

    A spacer conducts with the mean sheet density and mobility of its two
    neighbours over the spacer length.
    """
    lengths = design.ensemble.lengths
    mob = design.mobility
    w = design.width
    mus = [mob.mobility(effective_normal_field(s)) if mob.variant != "constant" else mob.mu0 for s in states]
    g = [w * Q * mu * max(s.n_inv, 0.0) / L for s, mu, L in zip(states, mus, lengths)]
    spacer = design.ensemble.spacer_thickness
    out = []
    for i, gi in enumerate(g):
        out.append(gi)
        if i + 1 < len(g) and spacer > 0:
            n_mean = 0.5 * (states[i].n_inv + states[i + 1].n_inv)
            mu_mean = 0.5 * (mus[i] + mus[i + 1])
            out.append(w * Q * mu_mean * max(n_mean, 0.0) / spacer)
    return out


def sweep_ids_vgs(design: FeFETDesign, program: SweepProgram = SweepProgram()) -> IVTrace:
    """Quasi-static forward/backward gate sweep at fixed V_DS.

    Grains start fully erased (-P_r) unless the design says otherwise.
    On a solver failure the records collected so far travel with the
    raised ``SweepError``.
    """
    stack = design.stack if design.stack.meshed else build_mesh(design.stack)
    ens = design.ensemble
    coeffs = [g.coeffs for g in ens.grains]
    if design.initial_polarization is None:
        p0 = -np.array([g.remanent_polarization for g in ens.grains])
    else:
        p0 = np.broadcast_to(np.asarray(design.initial_polarization, dtype=float), (len(ens),))
    v, branch = program.voltages()
    dt = program.step_time
    ng = len(ens)
    rec_p = np.empty((v.size, ng))
    rec_n = np.empty((v.size, ng))
    rec_q = np.empty((v.size, ng))
    rec_i = np.empty(v.size)

    def partial(k):
        return IVTrace(v[:k], branch[:k], rec_i[:k], rec_p[:k], rec_n[:k], rec_q[:k],
                       design.width, ens.lengths)

    # states with equal coefficients and polarization share one solve
    cache = {}
    states = []
    for c, p in zip(coeffs, p0):
        key = (c, float(p))
        if key not in cache:
            cache[key] = initial_slice_state(stack, c, design.traps, float(p), float(v[0]))
        states.append(cache[key])
    for k, vg in enumerate(v):
        try:
            cache = {}
            new = []
            for st in states:
                key = (st.coeffs, st.polarization, id(st.solution))
                if key not in cache:
                    cache[key] = self_consistent_point(st, float(vg), dt)
                new.append(cache[key])
            states = new
        except SolverError as exc:
            raise SweepError(f"sweep aborted at V_GS={vg:.4f} V: {exc}", partial(k)) from exc
        rec_p[k] = [s.polarization for s in states]
        rec_n[k] = [s.n_inv for s in states]
        rec_q[k] = [s.q_trap for s in states]
        rec_i[k] = series_current(channel_conductances(states, design), program.v_ds)
    return partial(v.size)


def _branch_crossing(v, i, i_ref, rising, name):
    li = np.log(np.maximum(i, 1e-300))
    lr = math.log(i_ref)
    hit = np.flatnonzero(li >= lr) if rising else np.flatnonzero(li < lr)
    if hit.size == 0 or hit[0] == 0:
        raise UndefinedMetricError(f"{name} branch does not cross i_ref={i_ref:g}")
    k = hit[0]
    return float(v[k - 1] + (lr - li[k - 1]) * (v[k] - v[k - 1]) / (li[k] - li[k - 1]))


def memory_window(trace: IVTrace, i_ref: float = 1e-8) -> float:
    """Gate-voltage gap between the branches at drain current i_ref (A/um).

    Crossings are interpolated linearly in log(I).  The forward branch is
    scanned upward for its first rise through i_ref, the backward branch
    for its first fall below it.
    """
    vf, i_f = trace.branch_view("forward")
    vb, i_b = trace.branch_view("backward")
    scale = trace.width * 1e6
    # the backward branch starts at the peak, shared with the forward one
    vb = np.concatenate([vf[-1:], vb])
    i_b = np.concatenate([i_f[-1:], i_b])
    v_fw = _branch_crossing(vf, i_f / scale, i_ref, True, "forward")
    v_bw = _branch_crossing(vb, i_b / scale, i_ref, False, "backward")
    return abs(v_fw - v_bw)


def _interp_branch(v, i, v_read):
    order = np.argsort(v)
    v, i = v[order], i[order]
    if not v[0] <= v_read <= v[-1]:
        raise UndefinedMetricError(f"v_read={v_read} outside the swept range")
    if np.all(i > 0):
        return float(np.exp(np.interp(v_read, v, np.log(i))))
    return float(np.interp(v_read, v, i))


def hrs_lrs(trace: IVTrace, v_read: float = 1.75, v_ds: float = 0.05):
    """High/low resistance states read on the two branches at ``v_read``.

    Returns ``(hrs, lrs, ratio)`` in ohms for the design width; a zero
    current on the high-resistance branch gives ``inf``.
    """
    i_fw = _interp_branch(*trace.branch_view("forward"), v_read)
    i_bw = _interp_branch(*trace.branch_view("backward"), v_read)
    lo, hi = min(i_fw, i_bw), max(i_fw, i_bw)
    if hi <= 0:
        raise UndefinedMetricError("no current on either branch at v_read")
    lrs = v_ds / hi
    if lo <= 0:
        log.warning("zero current on the HRS branch at v_read=%s", v_read)
        return math.inf, lrs, math.inf
    hrs = v_ds / lo
    return hrs, lrs, hrs / lrs


def polarization_loop_width(trace: IVTrace) -> float:
    """Gap between the V_GS where mean P_S crosses zero on each branch."""
    p = trace.p_mean
    m_f = trace.branch == "forward"
    vf, pf = trace.v_gs[m_f], p[m_f]
    vb = np.concatenate([vf[-1:], trace.v_gs[~m_f]])
    pb = np.concatenate([pf[-1:], p[~m_f]])
    return abs(_zero_crossing(vf, pf, True) - _zero_crossing(vb, pb, False))


def _zero_crossing(v, p, rising):
    hit = np.flatnonzero(p >= 0) if rising else np.flatnonzero(p < 0)
    if hit.size == 0 or hit[0] == 0:
        raise UndefinedMetricError("mean polarization does not change sign on a branch")
    k = hit[0]
    return float(v[k - 1] - p[k - 1] * (v[k] - v[k - 1]) / (p[k] - p[k - 1]))


def switching_steps(trace: IVTrace, min_jump: float = 0.2):
    """Forward-branch bias steps where a grain flips sign and I_DS jumps.

    A step counts when at least one grain changes polarization sign between
    adjacent bias points and the current changes by more than ``min_jump``
    relative to the smaller of the two values.  Returns the V_GS of each.
    """
    m = trace.branch == "forward"
    v, i, p = trace.v_gs[m], trace.i_ds[m], trace.p_grain[m]
    out = []
    for k in range(1, v.size):
        flipped = np.any(np.sign(p[k]) != np.sign(p[k - 1]))
        lo = min(i[k], i[k - 1])
        rel = abs(i[k] - i[k - 1]) / lo if lo > 0 else (math.inf if i[k] != i[k - 1] else 0.0)
        if flipped and rel > min_jump:
            out.append(float(v[k]))
    return out


@dataclass
class DesignPoint:
    mode: str
    doping: float  # m^-3 magnitude
    t_ch: float  # m
    design_id: str = ""

    def label(self):
        return self.design_id or f"{self.mode}-{self.doping * 1e-6:.0e}-{self.t_ch * 1e9:.0f}nm"


def default_grid():
    return [DesignPoint(mode, d * 1e6, t * 1e-9)
            for mode in ("depletion", "enhancement")
            for d in (1e16, 1e17, 1e18)
            for t in (40, 80)]


def evaluate_design(design: FeFETDesign, program: SweepProgram, i_ref: float = 1e-8,
                    v_read: float = 1.75):
    """Sweep one design and collect its metrics row (and the trace)."""
    trace = sweep_ids_vgs(design, program)
    row = {}
    try:
        row["mw_V"] = memory_window(trace, i_ref)
    except UndefinedMetricError:
        row["mw_V"] = math.nan
    hrs, lrs, ratio = hrs_lrs(trace, v_read, program.v_ds)
    row.update(hrs_ohm=hrs, lrs_ohm=lrs, ratio=ratio)
    _, i_f = trace.branch_view("forward")
    _, i_b = trace.branch_view("backward")
    row["i_peak_fw_A"] = float(i_f.max())
    row["i_peak_bw_A"] = float(i_b.max())
    try:
        row["ps_loop_width_V"] = polarization_loop_width(trace)
    except UndefinedMetricError:
        row["ps_loop_width_V"] = math.nan
    return row, trace


def _run_point(args):
    point, program, seed, sigma_ratio, i_ref, v_read, kw = args
    design = beol_design(point.mode, point.doping, point.t_ch, sigma_ratio=sigma_ratio, seed=seed, **kw)
    try:
        row, trace = evaluate_design(design, program, i_ref, v_read)
        row["status"] = "ok"
    except (SweepError, UndefinedMetricError) as exc:
        row, trace = {"status": f"failed: {exc}"}, getattr(exc, "partial", None)
    row.update(design_id=point.label(), mode=point.mode, doping_cm3=float(f"{point.doping / 1e6:.12g}"),
               t_ch_nm=round(point.t_ch * 1e9, 6))
    return row, trace


def design_study(points=None, program: SweepProgram = SweepProgram(), seed: int = 0,
                 sigma_ratio: float = 0.4, jobs: int = 1, i_ref: float = 1e-8, v_read: float = 1.75,
                 **design_kw):
    """Sweep every design point; failures are recorded and the study goes on.

    All designs share one grain ensemble drawn from ``seed`` so that trends
    across the grid reflect the design variables only.
    Extra keywords go to ``beol_design``.  Returns a list of
    ``(row, trace)`` in grid order.
    """
    points = default_grid() if points is None else list(points)
    if not points:
        raise ValueError("empty design grid")
    args = [(p, program, seed, sigma_ratio, i_ref, v_read, design_kw) for p in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_point, args))
    return [_run_point(a) for a in args]
