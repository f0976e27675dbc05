"""INI-style run configuration.

Values are kept in the human units they are written in (nm, cm^-3, eV,
V, V/s); the ``build_*`` helpers convert to SI when handing objects to the
simulation modules.  Keys absent from a file take study-dependent
defaults, so a parsed config is always fully resolved and its echo
re-parses to the same object.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .ferro import LandauCoefficients, TriangularWave, sample_ensemble
from .stack import Stack1D
from .traps import TrapDistribution

STUDIES = ("mfm-loop", "fefet-sweep", "design-study", "landau-extract")


class ConfigError(ValueError):
    def __init__(self, message, section=None, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if section is not None:
            where.append(f"[{section}]" + (f" {key}" if key else ""))
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.section, self.key, self.line = section, key, line


@dataclass(frozen=True)
class RunSection:
    study: str = ""
    seed: int = 0
    out: str = ""
    jobs: int = 1


@dataclass(frozen=True)
class FerroSection:
    alpha: float = -5.37e8  # m/F
    beta: float = 9.62e8
    gamma: float = 9.59e10
    eps_r: float = 30.0
    resistivity_ohm_m: float = 30.0
    sigma_ec_ratio: float = 0.4
    n_grains: int = 4
    grain_length_nm: float = 6.0
    spacer_nm: float = 0.5


@dataclass(frozen=True)
class TrapSection:
    enabled: bool = True
    density_acceptor_cm3: float = 8e20  # eV^-1 cm^-3
    density_donor_cm3: float = 4e20
    acceptor_window_eV: tuple = (-0.56, 0.56)
    donor_window_eV: tuple = (-0.56, 0.56)
    energy_grid_points: int = 129


@dataclass(frozen=True)
class StackSection:
    t_F_nm: float = 10.0
    t_IL_nm: float = 1.0
    t_ch_nm: float = 6.0
    t_BOX_nm: float = 30.0
    eps_IL: float = 3.9
    eps_ch: float = 11.7
    eps_BOX: float = 3.9
    doping: str = "0"
    gate_workfunction_eV: float = 4.6
    back_workfunction_eV: float = 4.6
    temperature_K: float = 300.0
    mesh_refine: int = 1


@dataclass(frozen=True)
class DeviceSection:
    mode: str = "enhancement"
    mobility: str = "effective-field"
    mu0_cm2_Vs: float = 300.0
    e_crit_V_m: float = 1e8
    mobility_exponent: float = 1.6
    width_um: float = 1.0
    i_ref_A_per_um: float = 1e-8
    v_read_V: float = 1.75


@dataclass(frozen=True)
class SweepSection:
    v_start_V: float = -3.0
    v_peak_V: float = 3.0
    slew_rate_V_s: float = 1.0
    v_ds_V: float = 0.05
    steps_per_branch: int = 120


@dataclass(frozen=True)
class MfmSection:
    amplitude_V: float = 3.0
    period_s: float = 1e-3
    steps_per_branch: int = 150


@dataclass(frozen=True)
class DesignSection:
    modes: tuple = ("depletion", "enhancement")
    dopings_cm3: tuple = (1e16, 1e17, 1e18)
    t_ch_nm: tuple = (40.0, 80.0)


SECTIONS = {
    "run": RunSection,
    "ferro": FerroSection,
    "traps": TrapSection,
    "stack": StackSection,
    "device": DeviceSection,
    "sweep": SweepSection,
    "mfm": MfmSection,
    "design": DesignSection,
}

# per-study overrides of the dataclass defaults
STUDY_DEFAULTS = {
    "mfm-loop": {"ferro": {"n_grains": 100}},
    "fefet-sweep": {},
    "design-study": {
        "ferro": {"n_grains": 25},
        "stack": {"t_ch_nm": 40.0, "t_BOX_nm": 200.0},
        "device": {"mobility": "constant", "mu0_cm2_Vs": 10.0},
    },
    "landau-extract": {},
}


@dataclass(frozen=True)
class SimConfig:
    run: RunSection = field(default_factory=RunSection)
    ferro: FerroSection = field(default_factory=FerroSection)
    traps: TrapSection = field(default_factory=TrapSection)
    stack: StackSection = field(default_factory=StackSection)
    device: DeviceSection = field(default_factory=DeviceSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    mfm: MfmSection = field(default_factory=MfmSection)
    design: DesignSection = field(default_factory=DesignSection)

    @property
    def study(self) -> str:
        return self.run.study


def _to_bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _to_int(s):
    f = float(s)
    if not f.is_integer():
        raise ValueError(f"not an integer: {s!r}")
    return int(f)


def _split(s):
    return [p.strip() for p in s.split(",") if p.strip()]


def _convert(default, text):
    if isinstance(default, bool):
        return _to_bool(text)
    if isinstance(default, int):
        return _to_int(text)
    if isinstance(default, float):
        v = float(text)
        if not math.isfinite(v):
            raise ValueError("value must be finite")
        return v
    if isinstance(default, tuple):
        if default and isinstance(default[0], str):
            return tuple(_split(text))
        return tuple(float(p) for p in _split(text))
    return text.strip()


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


_DOPING = re.compile(r"^\s*([-+0-9.eE]+)\s*(donor|acceptor)?\s*$")


def parse_doping(text: str) -> float:
    """Signed doping in cm^-3 from e.g. "1e17 donor" or "-1e17"."""
    m = _DOPING.match(text)
    if not m:
        raise ValueError(f"cannot read doping {text!r}; write e.g. '1e17 donor'")
    value = float(m.group(1))
    kind = m.group(2)
    if kind is not None:
        if value < 0:
            raise ValueError("give a positive magnitude together with donor/acceptor")
        value = value if kind == "donor" else -value
    return value


def _validate(cfg: SimConfig, lines=None):
    lines = lines or {}

    def bad(section, key, msg):
        raise ConfigError(msg, section, key, lines.get((section, key)))

    r, f, t, s, d, w, m, g = (cfg.run, cfg.ferro, cfg.traps, cfg.stack, cfg.device,
                              cfg.sweep, cfg.mfm, cfg.design)
    if r.study not in STUDIES:
        bad("run", "study", f"study must be one of {', '.join(STUDIES)}")
    if r.jobs < 1:
        bad("run", "jobs", "must be >= 1")
    if r.seed < 0:
        bad("run", "seed", "must be >= 0")
    if not 0.0 <= f.sigma_ec_ratio < 1.0:
        bad("ferro", "sigma_ec_ratio", "must lie in [0, 1)")
    if not (f.alpha < 0 and f.beta > 0 and f.gamma > 0):
        bad("ferro", "alpha", "need alpha < 0, beta > 0, gamma > 0")
    for key in ("eps_r", "resistivity_ohm_m", "grain_length_nm"):
        if getattr(f, key) <= 0:
            bad("ferro", key, "must be positive")
    if f.n_grains < 1:
        bad("ferro", "n_grains", "must be >= 1")
    if f.spacer_nm < 0:
        bad("ferro", "spacer_nm", "must be >= 0")
    if t.density_acceptor_cm3 < 0 or t.density_donor_cm3 < 0:
        bad("traps", "density_acceptor_cm3", "densities must be >= 0")
    for key in ("acceptor_window_eV", "donor_window_eV"):
        win = getattr(t, key)
        if len(win) != 2 or not win[0] < win[1]:
            bad("traps", key, "need two values low, high with low < high")
    if t.energy_grid_points < 2:
        bad("traps", "energy_grid_points", "must be >= 2")
    for key in ("t_F_nm", "t_IL_nm", "t_ch_nm", "t_BOX_nm", "eps_IL", "eps_ch", "eps_BOX", "temperature_K"):
        if getattr(s, key) <= 0:
            bad("stack", key, "must be positive")
    if s.mesh_refine < 1:
        bad("stack", "mesh_refine", "must be >= 1")
    try:
        dop = parse_doping(s.doping)
    except ValueError as exc:
        bad("stack", "doping", str(exc))
    if d.mode not in ("depletion", "enhancement"):
        bad("device", "mode", "must be 'depletion' or 'enhancement'")
    if d.mode == "depletion" and dop < 0:
        bad("stack", "doping", "polarity: depletion mode needs donor doping")
    if d.mode == "enhancement" and dop > 0:
        bad("stack", "doping", "polarity: enhancement mode needs acceptor doping or none")
    if d.mobility not in ("constant", "effective-field"):
        bad("device", "mobility", "must be 'constant' or 'effective-field'")
    for key in ("mu0_cm2_Vs", "e_crit_V_m", "width_um", "i_ref_A_per_um"):
        if getattr(d, key) <= 0:
            bad("device", key, "must be positive")
    if w.slew_rate_V_s <= 0:
        bad("sweep", "slew_rate_V_s", "must be positive")
    if not w.v_peak_V > w.v_start_V:
        bad("sweep", "v_peak_V", "must exceed v_start_V")
    if w.steps_per_branch < 2:
        bad("sweep", "steps_per_branch", "must be >= 2")
    if m.amplitude_V <= 0 or m.period_s <= 0:
        bad("mfm", "amplitude_V", "amplitude and period must be positive")
    if m.steps_per_branch < 2:
        bad("mfm", "steps_per_branch", "must be >= 2")
    if r.study == "design-study":
        if not (g.modes and g.dopings_cm3 and g.t_ch_nm):
            bad("design", "modes", "design grid is empty")
        for mode in g.modes:
            if mode not in ("depletion", "enhancement"):
                bad("design", "modes", f"unknown mode {mode!r}")
        if any(v <= 0 for v in g.dopings_cm3 + g.t_ch_nm):
            bad("design", "dopings_cm3", "doping magnitudes and thicknesses must be positive")
    return cfg


def parse_config(text: str, study: Optional[str] = None) -> SimConfig:
    """Parse and validate a config document.

    ``study`` fills in ``[run] study`` when the document has none; a
    document naming a different study is an error.
    """
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from exc
    lines = _key_lines(text)

    given = {}
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError("unknown section", sec, line=lines.get((sec, None)))
        given[sec] = dict(cp.items(sec))

    kind = given.get("run", {}).get("study", "").strip() or None
    if study is not None and kind is not None and kind != study:
        raise ConfigError(f"config is for study {kind!r}, not {study!r}", "run", "study",
                          lines.get(("run", "study")))
    kind = kind or study
    if kind is None:
        raise ConfigError("missing study kind", "run", "study")
    if kind not in STUDIES:
        raise ConfigError(f"study must be one of {', '.join(STUDIES)}", "run", "study",
                          lines.get(("run", "study")))

    parts = {}
    for sec, cls in SECTIONS.items():
        defaults = {fl.name: fl.default for fl in fields(cls)}
        defaults.update(STUDY_DEFAULTS[kind].get(sec, {}))
        values = dict(defaults)
        for key, text_value in given.get(sec, {}).items():
            if key not in defaults:
                raise ConfigError("unknown key", sec, key, lines.get((sec, key)))
            try:
                values[key] = _convert(defaults[key], text_value)
            except ValueError as exc:
                raise ConfigError(str(exc), sec, key, lines.get((sec, key))) from exc
        parts[sec] = cls(**values)
    parts["run"] = replace(parts["run"], study=kind)
    return _validate(SimConfig(**parts), lines)


def _key_lines(text):
    out = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            out[(section, None)] = n
        elif "=" in s and not s.startswith(("#", ";")):
            out[(section, s.split("=", 1)[0].strip())] = n
    return out


def dump_config(cfg: SimConfig) -> str:
    """Fully resolved INI text; ``parse_config(dump_config(c)) == c``."""
    chunks = []
    for sec in SECTIONS:
        part = getattr(cfg, sec)
        chunks.append(f"[{sec}]")
        chunks.extend(f"{fl.name} = {_format(getattr(part, fl.name))}" for fl in fields(part))
        chunks.append("")
    return "\n".join(chunks)


def with_overrides(cfg: SimConfig, **run_kw) -> SimConfig:
    return _validate(replace(cfg, run=replace(cfg.run, **run_kw)))


# builders: human units to SI

def build_coefficients(cfg: SimConfig) -> LandauCoefficients:
    f = cfg.ferro
    return LandauCoefficients(f.alpha, f.beta, f.gamma, f.eps_r, f.resistivity_ohm_m).validate()


def build_traps(cfg: SimConfig) -> Optional[TrapDistribution]:
    t = cfg.traps
    if not t.enabled:
        return None
    return TrapDistribution(t.density_acceptor_cm3 * 1e6, t.density_donor_cm3 * 1e6,
                            tuple(t.acceptor_window_eV), tuple(t.donor_window_eV),
                            cfg.stack.t_IL_nm * 1e-9, t.energy_grid_points)


def build_stack(cfg: SimConfig, t_ch_nm=None, doping_cm3=None) -> Stack1D:
    s = cfg.stack
    dop = parse_doping(s.doping) if doping_cm3 is None else doping_cm3
    return Stack1D(
        t_F=s.t_F_nm * 1e-9, t_IL=s.t_IL_nm * 1e-9,
        t_ch=(s.t_ch_nm if t_ch_nm is None else t_ch_nm) * 1e-9, t_BOX=s.t_BOX_nm * 1e-9,
        eps_F=cfg.ferro.eps_r, eps_IL=s.eps_IL, eps_ch=s.eps_ch, eps_BOX=s.eps_BOX,
        doping=dop * 1e6, gate_workfunction=s.gate_workfunction_eV,
        back_workfunction=s.back_workfunction_eV, temperature=s.temperature_K,
        mesh_refine=s.mesh_refine,
    )


def build_ensemble(cfg: SimConfig, seed=None):
    f = cfg.ferro
    return sample_ensemble(f.n_grains, f.grain_length_nm * 1e-9, build_coefficients(cfg), f.sigma_ec_ratio,
                           cfg.run.seed if seed is None else seed, spacer_thickness=f.spacer_nm * 1e-9)


def build_waveform(cfg: SimConfig) -> TriangularWave:
    m = cfg.mfm
    return TriangularWave(m.amplitude_V, m.period_s, m.steps_per_branch)
