import json

import pytest

from trapdipole import __version__
from trapdipole.cli import main

SMALL_RES = ["resonance", "--omega-range", "1.0:1.1", "--points", "3", "--fock-cutoff", "8"]


def test_spectrum_csv_header(tmp_path, capsys):
    out = tmp_path / "s.csv"
    rc = main(["spectrum", "--points", "2", "--truncation", "12", "--levels", "3",
               "--analytic", "-o", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    assert meta[0] == f"# trapdipole {__version__}"
    assert meta[1] == "# command: spectrum"
    header = lines[len(meta)]
    assert header == "parameter_value,level_index,branch,energy,source"
    body = lines[len(meta) + 1:]
    assert len(body) == 2 * 3 * 2
    assert {ln.split(",")[-1] for ln in body} == {"numeric", "analytic"}


@pytest.mark.parametrize("argv", [
    ["spectrum", "--points", "1"],
    ["resonance", "--ensemble", "boltzmann:1"],
    ["motion", "--protocol", "teleport"],
    ["iswap", "standard", "--format", "csv"],
    ["spectrum", "--g-range", "oops"],
    ["nope"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_resonance_writes_minima(tmp_path):
    out = tmp_path / "r.csv"
    assert main(SMALL_RES + ["--ensemble", "fock:1", "-o", str(out)]) == 0
    rep = json.loads((tmp_path / "r.csv.minima.json").read_text())
    assert set(rep) == {"minima", "predicted", "metric"}
    assert rep["metric"] == "overlap"


def test_rerun_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(SMALL_RES + ["-o", str(a)]) == 0
    assert main(SMALL_RES + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[common]\nmetric = pedersen\n[resonance]\npoints = 4\n"
                   "ensemble = fock:0, thermal:0.5\n")
    out = tmp_path / "r.csv"
    argv = ["resonance", "--config", str(cfg), "--omega-range", "1.0:1.1", "--fock-cutoff", "8"]
    assert main(argv + ["-o", str(out)]) == 0
    text = out.read_text()
    assert "# metric = pedersen" in text
    body = [ln for ln in text.splitlines() if ln and not ln.startswith("#")][1:]
    assert len(body) == 8
    assert main(argv + ["--points", "3", "-o", str(out)]) == 0
    body = [ln for ln in out.read_text().splitlines() if ln and not ln.startswith("#")][1:]
    assert len(body) == 6


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[resonance]\nwidth = 3\n")
    assert main(["resonance", "--config", str(cfg)]) == 2


def test_iswap_json(capsys):
    assert main(["iswap", "one-pulse"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["value"] > 0.9999
    assert d["metric"] == "overlap"


def test_qb_gate_trace(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    assert main(["qb-gate", "--phi", "pi/2", "--j-ratio", "11.832", "--trace", str(trace)]) == 0
    d = json.loads(capsys.readouterr().out)
    assert abs(d["conditional_phase"] - 3.141592653589793 / 2) < 1e-3
    assert "time,basis_label,population,phase" in trace.read_text()


def test_motion_small(capsys):
    assert main(["motion", "--protocol", "quasi-blockade", "--points", "2",
                 "--nbar-list", "1", "--fock-cutoff", "8", "--format", "json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["columns"][0] == "ell_over_L" and len(d["rows"]) == 2
