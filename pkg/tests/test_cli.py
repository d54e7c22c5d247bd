import json

import pytest

from dislocbc.cli import build_parser, main


def test_parser():
    args = build_parser().parse_args(["run", "decay", "--set", "a=1", "--set", "b.c=2"])
    assert args.study == "decay" and args.set == ["a=1", "b.c=2"]
    with pytest.raises(SystemExit):
        build_parser().parse_args(["solve", "--p", "2", "--R", "8"])


def test_solve_json(capsys):
    assert main(["solve", "--p", "0", "--R", "10"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["converged"] and doc["p"] == 0 and doc["energy"] < 0
    assert "config_hash" in doc


def test_solve_first_order_edge(capsys):
    assert main(["solve", "--p", "1", "--R", "10", "--set", "dislocation.kind=edge"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["p"] == 1 and "moments" in doc


def test_run_spectral_study(tmp_path, capsys):
    out = tmp_path / "spec"
    assert main(["run", "spectral_convergence", "--out", str(out)]) == 0
    assert (out / "report.json").exists()
    assert sorted(p.name for p in (out / "tables").iterdir()) == ["spectral_manufactured.csv",
                                                                   "spectral_truncation.csv"]
    assert "[PASS]" in capsys.readouterr().out


def test_run_failing_gate_exit_code(tmp_path):
    # without a dislocation every error vanishes and no slope can be fitted
    code = main(["run", "geometry_convergence", "--out", str(tmp_path / "o"), "--set", "radii=[8,12,16]",
                 "--set", "reference_radius=24", "--set", "dislocation.burgers=0"])
    assert code == 1


def test_unknown_study(capsys):
    assert main(["run", "bogus"]) == 2
    assert "unknown study" in capsys.readouterr().err
