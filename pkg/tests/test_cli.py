import json
import math

import pytest
from typer.testing import CliRunner

from nearbest.cli import app as cli_app

runner = CliRunner()


def write_config(path, **overrides):
    data = {
        "name": "segment",
        "mode": "theorem2",
        "arc": {"vertices": [-1, 1]},
        "function": {
            "branches": [{"formula": "-z"}, {"formula": "z"}],
            "singularities": [{"t": 0.5, "order": 0}],
        },
        "lemniscates": [{"order": 2, "radius": 1.0}],
        "degrees": [8, 16],
        "compact_sets": [{"label": "E1", "t_lo": 0.75, "t_hi": 1.0}],
    }
    data.update(overrides)
    path.write_text(json.dumps(data, indent=2))
    return str(path)


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    out = tmp_path / "out"
    monkeypatch.setenv("NEARBEST_OUT_DIR", str(out))
    monkeypatch.delenv("NEARBEST_MAP_TOL", raising=False)
    return {"dir": tmp_path, "out": out}


@pytest.fixture
def rates_csv(tmp_path):
    path = tmp_path / "run.csv"
    lines = ["n,sup_L_err,flat"] + [f"{n},{math.exp(-0.3 * n):.12e},0.5" for n in range(1, 9)]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_rates_geometric(rates_csv):
    result = runner.invoke(cli_app, ["rates", rates_csv])
    assert result.exit_code == 0
    start = result.output.index("{")
    fit = json.loads(result.output[start:result.output.rindex("}") + 1])
    assert fit["model"] == "geometric"
    assert fit["b"] == pytest.approx(0.3, rel=1e-9)
    assert fit["used"] == list(range(1, 9))


def test_rates_flags_no_decay(rates_csv):
    result = runner.invoke(cli_app, ["rates", rates_csv, "--column", "flat", "--model", "stretched"])
    assert result.exit_code == 0
    assert "no decay" in result.output


def test_rates_errors(rates_csv, tmp_path):
    result = runner.invoke(cli_app, ["rates", rates_csv, "--model", "cubic"])
    assert result.exit_code == 2
    result = runner.invoke(cli_app, ["rates", rates_csv, "--column", "E_n"])
    assert result.exit_code == 2
    result = runner.invoke(cli_app, ["rates", str(tmp_path / "missing.csv")])
    assert result.exit_code == 2
    short = tmp_path / "short.csv"
    short.write_text("n,sup_L_err\n1,0.5\n2,0.25\n")
    result = runner.invoke(cli_app, ["rates", str(short)])
    assert result.exit_code == 1


def test_invalid_config_exits_with_status_2(workspace):
    bad = workspace["dir"] / "bad.json"
    bad.write_text('{\n  "mode": "theorem2",\n  "degrees": [16, 8]\n}')
    result = runner.invoke(cli_app, ["run", str(bad)])
    assert result.exit_code == 2
    assert "bad.json" in result.output


def test_invalid_global_options(workspace):
    config = write_config(workspace["dir"] / "cfg.json")
    result = runner.invoke(cli_app, ["--threads", "0", "run", config])
    assert result.exit_code == 2
    result = runner.invoke(cli_app, ["--tol", "5", "run", config])
    assert result.exit_code == 2


def test_entable(workspace):
    config = write_config(workspace["dir"] / "cfg.json", degrees=[1, 2, 4])
    result = runner.invoke(cli_app, ["entable", config])
    assert result.exit_code == 0
    path = workspace["out"] / "segment_entable.csv"
    assert path.exists()
    assert path.read_text().splitlines()[0] == "n,E_n,E_n_lower,bracket_width,iterations,converged"


def test_run_writes_csv_and_sidecar(workspace):
    config = write_config(workspace["dir"] / "cfg.json", mode="bestapprox", lemniscates=[], degrees=[1, 2, 4],
                          output={"prefix": "abs"})
    result = runner.invoke(cli_app, ["--out", str(workspace["dir"] / "custom"), "run", config])
    assert result.exit_code == 0
    assert (workspace["dir"] / "custom" / "abs.csv").exists()
    assert (workspace["dir"] / "custom" / "abs.json").exists()
    assert not workspace["out"].exists()


def test_construct_exports_polynomial(workspace):
    config = write_config(workspace["dir"] / "cfg.json")
    result = runner.invoke(cli_app, ["construct", config, "-n", "8"])
    assert result.exit_code == 0
    payload = json.loads((workspace["out"] / "segment_n8.json").read_text())
    assert payload["degree"] == 8
    assert payload["mode"] == "theorem2"
    result = runner.invoke(cli_app, ["construct", config, "-n", "3"])
    assert result.exit_code == 2


def test_verify_bestapprox(workspace):
    config = write_config(workspace["dir"] / "cfg.json", mode="bestapprox", lemniscates=[], degrees=[1, 2, 4])
    result = runner.invoke(cli_app, ["verify", config, "--skip-oracle"])
    assert result.exit_code == 0
    assert "all hard checks passed" in result.output
    report = json.loads((workspace["out"] / "segment_verify.json").read_text())
    assert report["passed"] is True


@pytest.mark.slow
def test_verify_inadmissible(workspace):
    config = write_config(workspace["dir"] / "cfg.json",
                          arc={"vertices": [1.5, 0, [0, 1]]},
                          function={"branches": [{"formula": "0"}, {"formula": "z"}],
                                    "singularities": [{"t": 1.0}]},
                          lemniscates=[{"order": 4}], compact_sets=[])
    result = runner.invoke(cli_app, ["verify", config, "--skip-oracle"])
    assert result.exit_code == 1
    assert "FAIL [hard] scenario builds" in result.output


def test_export_geometry(workspace):
    config = write_config(workspace["dir"] / "cfg.json")
    result = runner.invoke(cli_app, ["export-geometry", config])
    assert result.exit_code == 0
    lines = (workspace["out"] / "segment_geometry.csv").read_text().splitlines()
    assert lines[0] == "curve,index,re,im"
    assert lines[1].startswith("arc,0,")


def test_plot(workspace, rates_csv):
    result = runner.invoke(cli_app, ["plot", rates_csv, "-c", "sup_L_err", "-c", "flat"])
    assert result.exit_code == 0
    svg = workspace["out"] / "run.svg"
    assert svg.exists()
    assert "<svg" in svg.read_text()
    result = runner.invoke(cli_app, ["plot", rates_csv, "-c", "E_n"])
    assert result.exit_code == 2
