import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dislocbc.harness import (
    DEFAULT_STUDY,
    StudyConfig,
    StudyReport,
    apply_overrides,
    emit_reports,
    fit_loglog,
    load_config,
    ring_envelope,
    run_study,
)
from dislocbc.harness import table_csv
from dislocbc.svg import Series, plot_svg

SMALL = {"radii": [8, 12, 16], "reference_radius": 24.0, "energy_radius": 40.0}


@settings(max_examples=30, deadline=None)
@given(slope=st.floats(-5, 5), c=st.floats(-3, 3))
def test_fit_exact_power_law(slope, c):
    x = np.array([8.0, 16.0, 32.0, 64.0])
    fit = fit_loglog(x, np.exp(c) * x**slope)
    assert fit["slope"] == pytest.approx(slope, abs=1e-10)
    assert fit["dropped"] == []
    assert fit["window"] == [8.0, 64.0]


def test_fit_drops_pre_asymptotic_point():
    x = np.array([8.0, 16.0, 24.0, 32.0, 48.0, 64.0])
    y = x**-2.0 * (1 + 0.01 * np.array([0, 1, -1, 1, -1, 0]))
    y[0] *= 3.0
    fit = fit_loglog(x, y)
    assert [d["x"] for d in fit["dropped"]] == [8.0]
    assert fit["slope"] == pytest.approx(-2.0, abs=0.05)
    assert fit_loglog(x, y, drop_rule=False)["dropped"] == []


def test_fit_degenerate_input():
    fit = fit_loglog([1.0, 2.0], [0.0, -1.0])
    assert np.isnan(fit["slope"]) and fit["n"] == 0


def test_ring_envelope():
    d = np.array([1.2, 1.5, 2.1, 2.9, 5.5])
    m = np.array([3.0, 4.0, 1.0, 2.0, 9.0])
    rs, env = ring_envelope(d, m, 1.0, 4.0)
    np.testing.assert_array_equal(rs, [1.5, 2.9])
    np.testing.assert_array_equal(env, [4.0, 2.0])


def test_overrides_and_config_file(tmp_path):
    cfg = apply_overrides(DEFAULT_STUDY, ["solver.lbfgs_memory=7", "dislocation.kind=edge", "radii=[8,16]"])
    assert cfg["solver"]["lbfgs_memory"] == 7
    assert cfg["dislocation"]["kind"] == "edge"
    assert cfg["radii"] == [8, 16]
    assert DEFAULT_STUDY["solver"] == {}
    with pytest.raises(ValueError):
        apply_overrides(DEFAULT_STUDY, ["radii"])
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"schema": "dislocbc.study/1", "radii": [8, 12]}))
    cfg = load_config(path, ["seed=4"], study="decay")
    assert cfg["radii"] == [8, 12] and cfg["seed"] == 4 and cfg["study"] == "decay"
    path.write_text(json.dumps({"schema": "other/2"}))
    with pytest.raises(ValueError, match="schema"):
        load_config(path)


@pytest.mark.parametrize("bad", [
    {"study": "nope"},
    {"radii": [16, 12]},
    {"radii": [4, 8]},
    {"reference_radius": 50.0},
    {"orders": [2]},
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        StudyConfig({**DEFAULT_STUDY, **bad})


def test_config_hash_ignores_output():
    a = StudyConfig({**DEFAULT_STUDY, "output": "x"})
    b = StudyConfig({**DEFAULT_STUDY, "output": "y"})
    c = StudyConfig({**DEFAULT_STUDY, "seed": 1})
    assert a.hash == b.hash != c.hash


def test_csv_uses_full_precision():
    text = table_csv({"header": ["a", "b", "c"], "rows": [[0.1, 3, True]]})
    assert text == "a,b,c\n0.10000000000000001,3,true\n"
    assert float(text.splitlines()[1].split(",")[0]) == 0.1


def test_svg_is_well_formed():
    svg = plot_svg([Series("a & b", [1, 10, 100], [1, 0.1, 0.01]), Series("pts", [2, 3], [0.5, 0.2], "scatter")],
                   "t < 1", "x", "y")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert svg == plot_svg([Series("a & b", [1, 10, 100], [1, 0.1, 0.01]),
                            Series("pts", [2, 3], [0.5, 0.2], "scatter")], "t < 1", "x", "y")
    ET.fromstring(plot_svg([Series("flat", [1, 2], [0, 0])], logy=False, logx=False))


def test_emit_is_byte_reproducible(tmp_path):
    rep = StudyReport("decay", {"x": 1})
    rep.tables["t"] = {"header": ["R", "err"], "rows": [[8.0, 1 / 3], [16.0, np.float64(2) / 7]]}
    rep.plots["p"] = plot_svg([Series("s", [1, 2], [1, 2])])
    rep.gate("g", np.float64(0.5), "< 1", True)
    rep.run_info["wall_time"] = 1.0
    emit_reports(rep, tmp_path / "a")
    rep.run_info["wall_time"] = 2.0
    emit_reports(rep, tmp_path / "b")
    for rel in ("report.json", "tables/t.csv", "plots/p.svg"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    assert (tmp_path / "a" / "run_info.json").read_bytes() != (tmp_path / "b" / "run_info.json").read_bytes()
    doc = json.loads((tmp_path / "a" / "report.json").read_text())
    assert doc["passed"] and doc["tables"] == {"t": "tables/t.csv"}


def test_emit_reports_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="could not write"):
        emit_reports(StudyReport("decay", {}), blocker / "out")


def test_small_convergence_study():
    rep = run_study({**DEFAULT_STUDY, **SMALL, "study": "energy_convergence"})
    tab = rep.tables["convergence"]
    assert len(tab["rows"]) == 6
    assert {g["name"] for g in rep.gates} >= {"energy_slope_p0", "energy_slope_p1", "energy_vs_geometry_squared"}
    assert set(rep.plots) == {"geometry_convergence", "energy_convergence"}
    assert "wall_time" in rep.run_info and "wall_time" not in json.dumps(rep.to_dict())


def test_degenerate_decay_study():
    rep = run_study({**DEFAULT_STUDY, **SMALL, "study": "decay", "dislocation": {"burgers": 0.0}})
    assert rep.passed
    assert any("degenerate" in n for n in rep.notes)


def test_timing_study_structure():
    rep = run_study({**DEFAULT_STUDY, **SMALL, "study": "timing"})
    rows = rep.tables["timing"]["rows"]
    assert all(r[4] < r[3] for r in rows)
    assert next(g for g in rep.gates if g["name"] == "T_bc_below_T_tot")["passed"]


def test_spectral_study_passes():
    rep = run_study({**DEFAULT_STUDY, "study": "spectral_convergence"})
    assert rep.passed, rep.gates
