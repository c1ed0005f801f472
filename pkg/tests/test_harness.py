import json
import math

import numpy as np
import pytest

from semelec.errors import ConfigError
from semelec.harness import experiments as ex
from semelec.harness.config import expand_bias_grid, from_preset, load_config, parse_document, resolve
from semelec.harness.outputs import (
    IV_COLUMNS,
    SPATIAL_COLUMNS,
    OutputError,
    csv_text,
    format_value,
    nodal_flux,
    preflight,
    write_outputs,
)
from semelec.harness.presets import DESCRIPTIONS, FREE_CHOICES, PRESETS
from semelec.transport import equilibrium_state

FAST = {"n_per_region": 24, "grading_ratio": 4.0}


# presets and config


def test_preset_values():
    a = PRESETS["case_I_a_dark"]
    assert (a["device"]["rho_r_bulk"], a["device"]["rho_o_bulk"]) == (30.0, 29.0)
    assert a["contacts"]["phi_app"] == 19.3
    b = PRESETS["case_I_b_dark"]
    assert (b["device"]["rho_r_bulk"], b["device"]["rho_o_bulk"]) == (4.0, 5.0)
    assert b["experiment"]["rho_n0"] == 2.5
    assert PRESETS["case_I_c_dark"]["device"]["eps_r_E"] == 100.0
    assert PRESETS["case_IIp_a_forward"]["contacts"]["phi_app"] == -PRESETS["case_IIp_a_reverse"]["contacts"]["phi_app"]
    grid = expand_bias_grid(PRESETS["case_IIp_b"]["experiment"]["bias_grid"])
    assert len(grid) >= 25 and grid[0] == -58.0 and grid[-1] == pytest.approx(73.5)
    assert set(PRESETS) == set(DESCRIPTIONS)
    assert FREE_CHOICES


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate_and_match_illumination(name):
    spec = from_preset(name)
    gamma = spec.config["illumination"]["gamma"]
    if name.endswith("_illuminated"):
        assert gamma == 1 and spec.illumination_states == ["illuminated"]
    if name.endswith("_dark"):
        assert gamma == 0 and spec.illumination_states == ["dark"]


@pytest.mark.parametrize(
    "doc, match",
    [
        ({"device": {"bogus": 1}}, "unknown key"),
        ({"nonsense": {}}, "unknown top-level"),
        ({"device": {"eps_r_S": "x"}}, "wrong type"),
        ({"experiment": {"mode": "dance"}}, "mode"),
        ({"experiment": {"t_end": -1.0}}, "t_end"),
        ({"solver": {"damping": 0.0}}, "damping"),
        ({"experiment": {"illumination_states": ["dusk"]}}, "illumination_states"),
        ({"experiment": {"bias_grid": {"start": 0, "stop": 1, "num": 1}}}, "num"),
        ({"device": {"T": -5.0}}, None),
    ],
)
def test_invalid_configs_rejected(doc, match):
    with pytest.raises(ConfigError, match=match):
        resolve(doc, preset="case_I_a_dark")


def test_bias_grid_expansion():
    assert expand_bias_grid({"start": 0, "stop": 1, "num": 3}) == [0.0, 0.5, 1.0]
    assert expand_bias_grid([1, 2]) == [1.0, 2.0]


def test_parse_errors_have_location(tmp_path):
    with pytest.raises(ConfigError, match=":1:"):
        parse_document("{bad", "f.json")
    with pytest.raises(ConfigError):
        parse_document("[1]")
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")


def test_load_config_cli_preset_wins(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"preset": "case_I_a_dark", "experiment": {"t_end": 0.01}}))
    spec = load_config(f, preset="case_I_b_dark")
    assert spec.preset == "case_I_b_dark"
    assert spec.config["device"]["rho_r_bulk"] == 4.0
    assert spec.config["experiment"]["t_end"] == 0.01


# outputs


def test_format_and_csv():
    assert format_value(True) == "true"
    assert format_value(np.int64(3)) == "3"
    assert format_value(float("nan")) == ""
    assert format_value(None) == ""
    assert float(format_value(0.1 + 0.2)) == 0.1 + 0.2
    text = csv_text(("a", "b"), [(1.0, float("nan"))])
    assert text == "a,b\n1.0,\n"


def test_nodal_flux():
    np.testing.assert_array_equal(nodal_flux([1.0, 3.0]), [1.0, 2.0, 3.0])


def test_preflight_rejects_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OutputError):
        preflight(blocker / "sub")


# experiments


def _fast(name, **over):
    over.setdefault("solver", {}).update(FAST)
    return from_preset(name, **over)


def test_zero_duration_transient_has_only_initial_snapshot():
    spec = _fast("case_I_b_dark", experiment={"t_end": 0.0, "snapshot_times": [0.0, 0.5]})
    out = ex.run(spec)
    snaps = [k for k in out.profiles if k.startswith("transient_dark_t")]
    assert snaps == ["transient_dark_t0"]
    assert out.ok


def test_transient_illumination_changes_holes():
    dark = ex.run(_fast("case_I_b_dark", experiment={"t_end": 0.01, "snapshot_times": [0.01]}))
    lit = ex.run(_fast("case_I_b_illuminated", experiment={"t_end": 0.01, "snapshot_times": [0.01]}))
    pd = dark.profiles["transient_dark_t0.01"].columns["rho_p"]
    pl = lit.profiles["transient_illuminated_t0.01"].columns["rho_p"]
    assert np.nanmax(np.abs(pl - pd)) > 0
    assert np.nansum(pl) > np.nansum(pd)


def test_stationary_outputs(tmp_path):
    spec = _fast("case_I_b_dark", experiment={"mode": "stationary"})
    out = ex.run(spec)
    assert out.ok
    summary = out.summary["dark"]
    assert summary["converged"]
    files = write_outputs(out, tmp_path, ex.manifest(spec), plots=False)
    assert "stationary_dark.csv" in files and "convergence_dark.csv" in files
    lines = (tmp_path / "stationary_dark.csv").read_text().splitlines()
    assert lines[0] == ",".join(SPATIAL_COLUMNS)
    assert len(lines) == 1 + spec.mesh().n_nodes
    # electrolyte columns are empty in the semiconductor and vice versa
    first = lines[1].split(",")
    assert first[3] == "" and first[1] != ""
    last = lines[-1].split(",")
    assert last[1] == "" and last[3] != ""


def _merit(phi, J):
    return ex.figures_of_merit([ex.IVPoint(float(a), float(b), True, 1) for a, b in zip(phi, J)])


def test_figures_of_merit_synthetic_cell():
    # ideal-diode cell J = J_L - J_0 (exp(phi) - 1) drawn as a positive photocurrent
    J_L, J_0 = 1.0, 1e-6
    phi = np.linspace(-2, 16, 400)
    J = J_L - J_0 * np.expm1(phi)
    m = _merit(phi, J)
    assert m.j_sc == pytest.approx(J_L, rel=1e-6)
    assert m.phi_oc == pytest.approx(math.log(J_L / J_0 + 1), abs=2e-3)
    power = phi * J
    assert m.power_mp == pytest.approx(power.max(), rel=1e-3)
    assert m.power_mp >= power.max()
    assert m.phi_mp * m.j_mp == pytest.approx(m.power_mp)


def test_figures_of_merit_edge_cases():
    assert _merit([1.0], [1.0]).phi_oc is None
    m = _merit([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert m.phi_oc is None and m.j_sc is None
    m = _merit([-1.0, 1.0], [-1.0, 1.0])
    assert m.phi_oc == pytest.approx(0.0, abs=1e-12) and m.j_sc == 0.0
    m = _merit([-1.0, 0.0, 1.0], [2.0, 0.0, -2.0])
    assert m.phi_oc == 0.0
    # unconverged points are ignored
    pts = [ex.IVPoint(0.0, 1.0, True, 1), ex.IVPoint(1.0, float("nan"), False, 9), ex.IVPoint(2.0, -1.0, True, 1)]
    assert ex.figures_of_merit(pts).phi_oc == pytest.approx(1.0)


def test_sweep_at_equilibrium_bias_has_zero_flux():
    spec = _fast("case_IIp_b")
    dev, _ = equilibrium_state(spec.device(False), spec.mesh())
    bias = dev.contacts.phi_app_A
    at_eq = ex.sweep_point(spec.config, False, bias)
    off = ex.sweep_point(spec.config, False, bias + 5.0)
    assert at_eq.converged and off.converged
    assert abs(at_eq.total_flux) <= 1e-6 * abs(off.total_flux)


def test_iv_sweep_one_row_per_bias(tmp_path):
    spec = _fast("case_IIp_b", experiment={"bias_grid": [-10.0, 0.0, 10.0], "illumination_states": ["dark"]})
    out = ex.run(spec)
    table = next(t for t in out.tables if t.name == "iv_dark")
    assert table.header == IV_COLUMNS
    assert [r[0] for r in table.rows] == [-10.0, 0.0, 10.0]
    write_outputs(out, tmp_path, ex.manifest(spec), plots=False)
    lines = (tmp_path / "iv_dark.csv").read_text().splitlines()
    assert lines[0] == ",".join(IV_COLUMNS) and len(lines) == 4
    assert all(line.split(",")[2] == "true" for line in lines[1:])


def test_schottky_compare_outputs():
    out = ex.run(_fast("case_II_b", experiment={"illumination_states": ["dark"]}))
    assert {"full_dark", "schottky_dark"} <= set(out.profiles)
    disc = next(t for t in out.tables if t.name == "discrepancy_dark")
    assert [r[0] for r in disc.rows] == ["n", "p", "phi", "collector_flux"]
    assert np.all(np.isnan(out.profiles["schottky_dark"].columns["rho_r"]))


def test_manifest_records_parameters(tmp_path):
    spec = _fast("case_I_a_dark", experiment={"t_end": 0.0})
    man = ex.manifest(spec, threads=2)
    assert man["preset"] == "case_I_a_dark" and man["threads"] == 2
    assert man["kernel_backend"] in ("compiled", "python")
    assert man["scaled_parameters"]["rho_isc"] == pytest.approx(6.1584583e-7, rel=1e-7)
    assert man["config"]["device"]["rho_r_bulk"] == 30.0
    assert man["free_choices"]
    write_outputs(ex.run(spec), tmp_path, man, plots=False)
    disk = json.loads((tmp_path / "manifest.json").read_text())
    assert set(disk["files"]) == {p.name for p in tmp_path.glob("*.csv")}


def test_svg_output_deterministic(tmp_path):
    spec = _fast("case_I_b_dark", experiment={"t_end": 0.0})
    out = ex.run(spec)
    for d in ("a", "b"):
        write_outputs(out, tmp_path / d, ex.manifest(spec), plots=True)
    svgs = sorted(p.name for p in (tmp_path / "a").glob("*.svg"))
    assert svgs
    for name in svgs:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
