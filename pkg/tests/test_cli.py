import json
import subprocess
import sys

import pytest

from sigmacert.cli import main, max_workers


def test_gallery_list(capsys):
    assert main(["gallery", "list"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert len(lines) >= 8
    assert any(line.startswith("choquet-strong ") for line in lines)


def test_gallery_run_identity(tmp_path, capsys):
    assert main(["gallery", "run", "identity", "--out", str(tmp_path), "--resolution", "64"]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["verdict"] == "Diffeomorphism"
    assert "Diffeomorphism" in capsys.readouterr().out


def test_gallery_run_strong_dent(tmp_path):
    assert main(["gallery", "run", "choquet-strong", "--out", str(tmp_path)]) in (10, 11)


def test_malformed_sigma_exits_two(tmp_path, capsys):
    sc = tmp_path / "bad.json"
    sc.write_text(json.dumps({"phi": {"x": "cos(theta)", "y": "sin(theta)"}, "sigma": {"entries": [["1+", "0"], ["0", "1"]]}}))
    assert main(["run", str(sc), "--out", str(tmp_path / "o")]) == 2
    assert "sigma.entries" in capsys.readouterr().err


def test_usage_errors_exit_two(tmp_path):
    assert main(["run"]) == 2
    assert main(["gallery", "run", "nope", "--out", str(tmp_path)]) == 2
    assert main(["run", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_batch_writes_one_directory_per_scenario(tmp_path, monkeypatch):
    paths = []
    for name, x in (("a", "cos(theta)"), ("b", "2*cos(theta)"), ("a", "3*cos(theta)")):
        p = tmp_path / f"{name}{len(paths)}.json"
        p.write_text(json.dumps({"name": name, "phi": {"x": x, "y": "sin(theta)"}, "resolution": 48}))
        paths.append(str(p))
    monkeypatch.setenv("CERTIFY_THREADS", "2")
    out = tmp_path / "out"
    assert main(["run", *paths, "--out", str(out), "--batch", "--check", "all"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["a", "a-2", "b"]
    rep = json.loads((out / "b" / "report.json").read_text())
    assert rep["certificates"]["main"]["min_boundary_det"] == pytest.approx(2.0)


def test_batch_status_is_the_worst(tmp_path):
    good = tmp_path / "g.json"
    good.write_text(json.dumps({"name": "g", "phi": {"x": "cos(theta)", "y": "sin(theta)"}, "resolution": 48}))
    bad = tmp_path / "b.json"
    bad.write_text(json.dumps({"name": "b", "phi": {"x": "cos(theta)"}}))
    assert main(["run", str(good), str(bad), "--out", str(tmp_path / "o")]) == 2


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("CERTIFY_THREADS", "3")
    assert max_workers(10) == 3 and max_workers(2) == 2
    monkeypatch.setenv("CERTIFY_THREADS", "lots")
    with pytest.raises(ValueError):
        max_workers(4)


def test_console_script_module_entry(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "sigmacert.cli", "gallery", "run", "ellipse", "--out", str(tmp_path), "--resolution", "48"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
