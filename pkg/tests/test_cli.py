import json
import shutil
import subprocess
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from ensemble_ot import csvio
from ensemble_ot.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, example1_config, main
from ensemble_ot.config import ConfigError, build_config

CONFIGS = sorted((Path(__file__).resolve().parent.parent / "configs").glob("*.json"))
MEANS = [-1.0, 3.0, 5.0, -4.0, -7.0]


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def run_cli(args, capsys):
    code = main([str(a) for a in args])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def rewrite(path: Path) -> str:
    """Parse a CSV with its schema reader and write it back."""
    header, data = csvio.read_rows(path)
    tmp = path.with_suffix(".roundtrip")
    csvio.write_rows(tmp, header, [[float(v) if h not in ("i", "j") else int(v) for h, v in zip(header, row)]
                                   for row in data])
    text = tmp.read_text()
    tmp.unlink()
    return text


def test_gramian_closed_form(tmp_path, capsys):
    cfg = write_config(tmp_path, {"command": "gramian", "system": {"A": [[0, 1], [0, 0]], "B": [[0], [1]]},
                                  "t0": 0, "t1": 1})
    code, out, _ = run_cli(["gramian", cfg, "--out", tmp_path / "out"], capsys)
    assert code == EXIT_OK
    W = csvio.read_matrix(tmp_path / "out" / "W.csv")
    assert np.max(np.abs(W - np.array([[1 / 3, 1 / 2], [1 / 2, 1.0]]))) < 1e-8
    assert json.loads(out)["command"] == "gramian"


@pytest.mark.parametrize("case, variances", [(1, [3, 3, 3, 3, 4]), (2, [6, 7, 3, 2, 5])])
def test_example1_rows(tmp_path, capsys, case, variances):
    code, _, _ = run_cli(["example1", "--case", case, "--out", tmp_path, "--quiet"], capsys)
    assert code == EXIT_OK
    times, means, covs = csvio.read_timeseries(tmp_path / "track.csv")
    for k in range(5):
        i = int(np.nonzero(times == k)[0][0])
        assert means[i, 0] == pytest.approx(MEANS[k], abs=1e-6)
        assert covs[i, 0, 0] == pytest.approx(variances[k], abs=1e-6)
    assert len(times) == 4 * 200 + 1
    assert np.min(np.linalg.eigvalsh(covs)) >= -1e-8
    ET.parse(tmp_path / "plot.svg")


def test_example1_config_file_matches_builtin(tmp_path, capsys):
    cfg = write_config(tmp_path, example1_config(1))
    run_cli(["track-gaussian", cfg, "--out", tmp_path / "a", "--quiet"], capsys)
    run_cli(["example1", "--case", 1, "--out", tmp_path / "b", "--quiet"], capsys)
    assert (tmp_path / "a" / "track.csv").read_bytes() == (tmp_path / "b" / "track.csv").read_bytes()


def test_wasserstein_identical_files_is_zero(tmp_path, capsys):
    from ensemble_ot import DiscreteMeasure

    mu = DiscreteMeasure(np.array([[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]]), np.array([0.2, 0.3, 0.5]))
    csvio.write_measure(tmp_path / "a.csv", mu)
    shutil.copy(tmp_path / "a.csv", tmp_path / "b.csv")
    cfg = write_config(tmp_path, {"command": "wasserstein", "source": {"csv": "a.csv"}, "target": {"csv": "b.csv"}})
    code, out, _ = run_cli(["wasserstein", cfg, "--out", tmp_path / "out"], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["distance"] == 0.0


@pytest.mark.parametrize("config", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_deterministic_and_roundtrip(tmp_path, capsys, config):
    dirs = []
    for tag in ("first", "second"):
        code, _, err = run_cli(["run", config, "--out", tmp_path / tag, "--quiet"], capsys)
        assert code == EXIT_OK, err
        dirs.append(tmp_path / tag)
    files = sorted(p.name for p in dirs[0].iterdir())
    assert files == sorted(p.name for p in dirs[1].iterdir())
    for name in files:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name
        path = dirs[0] / name
        if path.suffix == ".csv":
            assert rewrite(path) == path.read_text(), name
        elif path.suffix == ".json":
            json.loads(path.read_text())
        elif path.suffix == ".svg":
            ET.parse(path)


def test_schema_readers(tmp_path, capsys):
    cfg = Path(__file__).resolve().parent.parent / "configs" / "track_scalar.json"
    run_cli(["run", cfg, "--out", tmp_path, "--quiet"], capsys)
    mu = csvio.read_measure(tmp_path / "marginal_0.csv")
    assert mu.weights.sum() == pytest.approx(1.0, abs=1e-9)
    plan = csvio.read_plan(tmp_path / "plan_0.csv", (len(mu), len(mu)))
    assert plan.sum() == pytest.approx(1.0, abs=1e-9)
    header, data = csvio.read_rows(tmp_path / "interpolant.csv")
    assert header == ["t", "x_1", "weight"]
    for t in np.unique(data[:, 0]):
        assert data[data[:, 0] == t, 2].sum() == pytest.approx(1.0, abs=1e-9)


def test_seeded_jitter_reproducible():
    raw = {"command": "track", "system": {"A": [[0]], "B": [[1]], "C": [[1]]},
           "outputs": [{"mean": [0.0], "cov": [[1.0]]}, {"mean": [1.0], "cov": [[1.0]]}],
           "grid": {"min": [-4], "max": [4], "nodes": [9], "jitter": 0.5}, "seed": 7}
    from ensemble_ot.config import parse_grid

    a = parse_grid(raw["grid"], 1, 7).axes[0]
    b = parse_grid(raw["grid"], 1, 7).axes[0]
    c = parse_grid(raw["grid"], 1, 8).axes[0]
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert a[0] == -4 and a[-1] == 4


@pytest.mark.parametrize("payload, fragment", [
    ({"command": "gramian", "system": {"A": [[0]], "B": [[1]]}, "t0": 0, "t1": 1, "colour": 1}, "unknown keys"),
    ({"command": "gramian", "system": {"A": [[0, 1], [0, 0]], "B": [[0], [1], [2]]}}, "system"),
    ({"command": "teleport"}, "command must be"),
    ({"command": "gramian", "system": {"A": [[0]], "B": [[1]]}, "seed": -1}, "seed"),
    ({"command": "track-gaussian", "system": {"A": [[0]], "B": [[1]], "C": [[1]]},
      "outputs": [{"mean": [0.0, 1.0], "cov": [[1.0]]}]}, "outputs"),
])
def test_validation_errors_exit_2(tmp_path, capsys, payload, fragment):
    cfg = write_config(tmp_path, payload)
    out_dir = tmp_path / "out"
    code, _, err = run_cli(["run", cfg, "--out", out_dir], capsys)
    assert code == EXIT_CONFIG
    record = json.loads(err)
    assert record["exit_code"] == 2 and record["error"] == "config"
    assert fragment in record["message"]
    assert not out_dir.exists()


def test_invalid_json_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, _, err = run_cli(["run", path], capsys)
    assert code == EXIT_CONFIG
    assert "invalid JSON" in json.loads(err)["message"]


def test_build_config_rejects_command_mismatch(tmp_path):
    with pytest.raises(ConfigError):
        build_config({"command": "gramian"}, tmp_path, None, "wasserstein")


def test_uncontrollable_min_energy_exit_3(tmp_path, capsys):
    cfg = write_config(tmp_path, {"command": "min-energy", "system": {"A": [[0, 0], [0, 0]], "B": [[1], [0]]},
                                  "x0": [0, 0], "x1": [1, 1], "t0": 0, "t1": 1})
    code, _, err = run_cli(["min-energy", cfg, "--out", tmp_path / "out"], capsys)
    assert code == EXIT_NUMERIC
    record = json.loads(err)
    assert record["error"] == "numerical" and record["exit_code"] == 3
    assert record["type"] == "NotControllable"


def test_empty_bin_exit_3_reports_bin(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "command": "track", "system": {"A": [[0]], "B": [[1]], "C": [[1]]},
        "outputs": [{"atoms": [[0.0], [0.1], [1.0], [2.0]], "weights": [0.3, 0.3, 0.2, 0.2]},
                    {"atoms": [[1.0]]}],
        "grid": {"min": [0], "max": [2], "nodes": [3]}})
    code, _, err = run_cli(["track", cfg, "--out", tmp_path / "out"], capsys)
    assert code == EXIT_NUMERIC
    record = json.loads(err)
    assert record["type"] == "EmptyBin" and record["bin_index"] == 1


def test_console_entry_point(tmp_path):
    cfg = Path(__file__).resolve().parent.parent / "configs" / "gramian_double_integrator.json"
    proc = subprocess.run([sys.executable, "-m", "ensemble_ot.cli", "run", str(cfg), "--out", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "gramian"
    proc = subprocess.run([sys.executable, "-m", "ensemble_ot.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
