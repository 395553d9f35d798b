import json
import math

import numpy as np
import pytest

from sigmacert.errors import InputError
from sigmacert.scenario import (
    DEFAULTS,
    SCHEMA_VERSION,
    dumps_report,
    gallery_scenario,
    list_gallery,
    load_scenario,
    resolve_scenario,
    run_scenario,
)

PHI = {"x": "cos(theta)", "y": "sin(theta)"}


def test_defaults_are_filled_in():
    sc = resolve_scenario({"phi": PHI})
    assert sc["resolution"] == 256 and sc["alpha_grid"] == 16 and sc["seed"] == 0
    assert sc["checks"] == ["main", "topology", "injectivity"]
    assert set(sc["tolerances"]) == set(DEFAULTS["tolerances"])
    assert sc["sigma"]["K"] == 1.0


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"phi": PHI, "colour": 1}, "colour"),
        ({"phi": PHI, "sigma": {"entries": [["1", "0"], ["0", "1"]], "k": 2}}, "sigma.k"),
        ({"phi": PHI, "tolerances": {"det_rel": -1}}, "tolerances.det_rel"),
        ({"phi": PHI, "tolerances": {"nope": 1}}, "tolerances.nope"),
        ({"phi": {"x": "cos(theta)"}}, "phi.y"),
        ({"phi": {"x": "1", "y": "1", "z": "1"}}, "phi.z"),
        ({"phi": PHI, "resolution": 4}, "resolution"),
        ({"phi": PHI, "resolution": 12.5}, "resolution"),
        ({"phi": PHI, "checks": ["topology"]}, "checks"),
        ({"phi": PHI, "checks": ["everything"]}, "checks"),
        ({"phi": PHI, "sigma": {"entries": [["1", "0"]]}}, "sigma.entries"),
        ({"phi": PHI, "sigma": {"K": 0.5}}, "sigma.K"),
        ({"phi": PHI, "name": "a/b"}, "name"),
        ({}, "phi"),
    ],
)
def test_invalid_fields_are_named(raw, field):
    with pytest.raises(InputError) as info:
        resolve_scenario(raw)
    assert info.value.field == field


def test_gallery_contents():
    names = [n for n, _ in list_gallery()]
    assert len(names) >= 8
    for required in (
        "identity",
        "ellipse",
        "anisotropic-const",
        "variable-hoelder",
        "skew",
        "choquet-mild",
        "choquet-strong",
        "dent-hopf",
    ):
        assert required in names
    assert gallery_scenario("identity")["name"] == "identity"
    with pytest.raises(InputError):
        gallery_scenario("nope")


def test_report_serialisation_is_canonical():
    text = dumps_report({"b": 0.1, "a": [1, 2.0, float("nan"), np.float64(1e-20)], "c": {"z": True, "y": None}})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert "0.10000000000000001" in text and "null" in text and "2.0" in text
    back = json.loads(text)
    assert back["a"][3] == 1e-20 and back["a"][2] is None
    assert text.endswith("}\n")


def test_run_writes_outputs(tmp_path):
    res = run_scenario({"name": "circle", "phi": PHI, "resolution": 64}, tmp_path, dump_fields=True)
    assert res.exit_code == 0 and res.verdict == "Diffeomorphism"
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["alpha_sweep.csv", "boundary_profile.csv", "fields.csv", "report.json"]
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["schema_version"] == SCHEMA_VERSION
    assert report["scenario"]["resolution"] == 64 and report["scenario"]["seed"] == 0
    assert report["mesh"]["n_boundary"] == 64
    assert "tolerances" in report and set(report["certificates"]) == {"main"}
    raw = (tmp_path / "boundary_profile.csv").read_bytes()
    assert b"\r" not in raw and raw.startswith(b"theta,det_DU,confidence\n")
    rows = raw.decode().strip().split("\n")[1:]
    assert len(rows) == 64 and all(r.endswith(",1") for r in rows)
    sweep = (tmp_path / "alpha_sweep.csv").read_text().strip().split("\n")
    assert sweep[0] == "alpha,M_alpha" and len(sweep) == 17
    fields = (tmp_path / "fields.csv").read_text().strip().split("\n")
    assert fields[0] == "x,y,u1,u2,v" and len(fields) == 1 + report["mesh"]["n_vertices"]


def test_overrides_are_recorded():
    res = run_scenario({"phi": PHI}, resolution=48, check="all")
    assert res.report["scenario"]["resolution"] == 48
    assert set(res.report["certificates"]) == {"main", "nonconvex"}


def test_input_errors_exit_two(tmp_path):
    bad_sigma = {"phi": PHI, "sigma": {"entries": [["1 +", "0"], ["0", "1"]]}}
    res = run_scenario(bad_sigma, tmp_path / "a")
    assert res.exit_code == 2 and "sigma.entries" in res.error
    assert not (tmp_path / "a").exists()
    # declared K too small for diag(4, 1)
    res = run_scenario({"phi": PHI, "sigma": {"entries": [["4", "0"], ["0", "1"]], "K": 2}})
    assert res.exit_code == 2 and "sigma.K" in res.error
    res = run_scenario({"phi": {"x": "sin(theta)", "y": "sin(2*theta)"}})
    assert res.exit_code == 2 and res.error.startswith("phi")
    res = run_scenario({"phi": {"x": "cos(theta)", "y": "-sin(theta)"}})
    assert res.exit_code == 2 and "OrientationReversed" in res.error


def test_point_list_relative_to_scenario(tmp_path):
    t = 2 * np.pi * np.arange(300) / 300
    lines = ["theta,x,y"] + [f"{a:.17g},{2 * math.cos(a):.17g},{math.sin(a):.17g}" for a in t]
    (tmp_path / "data").mkdir()
    (tmp_path / "data" / "ellipse.csv").write_text("\n".join(lines) + "\n")
    (tmp_path / "sc.json").write_text(json.dumps({"name": "pts", "phi": {"points": "data/ellipse.csv"}, "resolution": 64}))
    sc = load_scenario(tmp_path / "sc.json")
    assert sc["phi"]["points"] == str((tmp_path / "data" / "ellipse.csv").resolve())
    res = run_scenario(tmp_path / "sc.json")
    assert res.exit_code == 0
    assert res.report["boundary_map"]["source"]["interpolation"] == "periodic-cubic"
    cert = res.report["certificates"]["main"]
    assert cert["min_boundary_det"] == pytest.approx(2.0, rel=1e-3)


def test_missing_point_file(tmp_path):
    (tmp_path / "sc.json").write_text(json.dumps({"phi": {"points": "nope.csv"}}))
    res = run_scenario(tmp_path / "sc.json")
    assert res.exit_code == 2 and "phi.points" in res.error


def test_invalid_json(tmp_path):
    (tmp_path / "sc.json").write_text("{")
    assert run_scenario(tmp_path / "sc.json").exit_code == 2
