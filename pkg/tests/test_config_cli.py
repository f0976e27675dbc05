import csv
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fefetsim.cli import IV_COLUMNS, METRIC_COLUMNS, PV_COLUMNS, main, run
from fefetsim.config import ConfigError, build_stack, build_traps, dump_config, parse_config, parse_doping


def test_empty_fefet_sweep_gives_soi_defaults():
    cfg = parse_config("", study="fefet-sweep")
    s = build_stack(cfg)
    assert (s.t_F, s.t_IL, s.t_ch, s.t_BOX) == pytest.approx((10e-9, 1e-9, 6e-9, 30e-9))
    assert cfg.ferro.n_grains == 4
    t = build_traps(cfg)
    assert t.density_acceptor == pytest.approx(8e26) and t.density_donor == pytest.approx(4e26)


def test_design_study_defaults_are_beol():
    cfg = parse_config("[run]\nstudy = design-study\n")
    assert cfg.ferro.n_grains == 25
    assert cfg.stack.t_BOX_nm == 200.0
    assert cfg.device.mobility == "constant" and cfg.device.mu0_cm2_Vs == 10.0


def test_doping_polarity():
    ok = parse_config("[stack]\ndoping = 1e17 donor\n[device]\nmode = depletion\n", study="fefet-sweep")
    assert parse_doping(ok.stack.doping) == 1e17
    with pytest.raises(ConfigError, match="polarity"):
        parse_config("[stack]\ndoping = 1e17 acceptor\n[device]\nmode = depletion\n", study="fefet-sweep")


def test_sigma_range():
    with pytest.raises(ConfigError, match="sigma_ec_ratio"):
        parse_config("[ferro]\nsigma_ec_ratio = 1.5\n", study="mfm-loop")


def test_unknown_key_has_line_context():
    with pytest.raises(ConfigError) as err:
        parse_config("[ferro]\n\nbogus = 3\n", study="mfm-loop")
    assert err.value.line == 3 and err.value.key == "bogus"


def test_unknown_section_and_missing_study():
    with pytest.raises(ConfigError):
        parse_config("[nope]\na = 1\n", study="mfm-loop")
    with pytest.raises(ConfigError, match="missing study"):
        parse_config("")


def test_conflicting_study():
    with pytest.raises(ConfigError):
        parse_config("[run]\nstudy = mfm-loop\n", study="fefet-sweep")


@settings(max_examples=30, deadline=None)
@given(
    study=st.sampled_from(["mfm-loop", "fefet-sweep", "design-study", "landau-extract"]),
    sigma=st.floats(0, 0.99),
    seed=st.integers(0, 2**32),
    t_ch=st.floats(1, 200),
    dens=st.floats(0, 1e22),
)
def test_manifest_round_trip(study, sigma, seed, t_ch, dens):
    text = (f"[run]\nstudy = {study}\nseed = {seed}\n[ferro]\nsigma_ec_ratio = {sigma!r}\n"
            f"[stack]\nt_ch_nm = {t_ch!r}\n[traps]\ndensity_donor_cm3 = {dens!r}\n")
    cfg = parse_config(text)
    assert parse_config(dump_config(cfg)) == cfg


def test_landau_extract_prints(capsys):
    assert main(["landau-extract"]) == 0
    vals = {ln.split(" = ")[0]: float(ln.split(" = ")[1].split()[0])
            for ln in capsys.readouterr().out.splitlines()}
    assert vals["E_c"] == pytest.approx(1.098588e8, rel=1e-6)
    assert vals["P_r"] == pytest.approx(0.1999719, rel=1e-6)
    assert vals["tau"] == pytest.approx(2.7933e-8, rel=1e-4)


def test_landau_extract_inline_invalid(capsys):
    assert main(["landau-extract", "--alpha", "5e8"]) == 2


def test_config_error_exit_code(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[ferro]\nsigma_ec_ratio = 2\n")
    assert main(["mfm-loop", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_env_var_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("FEFETSIM_OUT", str(tmp_path / "env"))
    p = tmp_path / "c.ini"
    p.write_text("[ferro]\nn_grains = 5\n[mfm]\nsteps_per_branch = 20\n")
    assert main(["mfm-loop", "--config", str(p)]) == 0
    assert (tmp_path / "env" / "pv_trace.csv").exists()


def _read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_mfm_run_schema_and_determinism(tmp_path):
    cfg = parse_config("[ferro]\nn_grains = 10\n[mfm]\nsteps_per_branch = 40\n", study="mfm-loop")
    assert run(cfg, tmp_path / "a") == 0
    assert run(cfg, tmp_path / "b") == 0
    a = (tmp_path / "a" / "pv_trace.csv").read_bytes()
    assert a == (tmp_path / "b" / "pv_trace.csv").read_bytes()
    rows = _read(tmp_path / "a" / "pv_trace.csv")
    assert rows[0] == PV_COLUMNS
    assert len(rows) == 82
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert parse_config(manifest["config"]) == cfg
    assert manifest["seed"] == 0 and manifest["version"]


def test_fefet_sweep_run_schema(tmp_path):
    cfg = parse_config("[sweep]\nsteps_per_branch = 12\n", study="fefet-sweep")
    assert run(cfg, tmp_path) == 0
    rows = _read(tmp_path / "iv_trace.csv")
    assert rows[0][:len(IV_COLUMNS)] == IV_COLUMNS
    assert rows[0][len(IV_COLUMNS)] == "p_s_grain_0_Cpm2"
    assert len(rows) == 1 + 25
    assert _read(tmp_path / "metrics.csv")[0] == METRIC_COLUMNS


def test_design_study_grid_rows(tmp_path):
    cfg = parse_config("[ferro]\nn_grains = 2\n[sweep]\nsteps_per_branch = 8\n"
                       "[design]\nt_ch_nm = 40\ndopings_cm3 = 1e17\n", study="design-study")
    assert run(cfg, tmp_path) in (0, 3)
    rows = _read(tmp_path / "metrics.csv")
    assert rows[0] == METRIC_COLUMNS
    assert len(rows) == 1 + 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = parse_config("", study="landau-extract")
    assert run(cfg, blocker / "sub") == 2
