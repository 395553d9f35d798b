"""Scenario files, the built-in gallery, and the on-disk report format.

A scenario is a JSON object::

    {
      "name": "ellipse",
      "sigma": {"entries": [["1", "0"], ["0", "1"]], "K": 1, "smoothness": "Smooth"},
      "phi": {"x": "2*cos(theta)", "y": "sin(theta)"},
      "resolution": 256,
      "checks": ["main", "nonconvex", "topology", "injectivity"]
    }

``phi`` is either an expression pair in ``theta`` (optionally with exact
derivatives ``dx``, ``dy``) or ``{"points": "file.csv"}`` naming a
``theta,x,y`` CSV relative to the scenario file. Every other key has a
default, see :data:`DEFAULTS`. Unknown keys are rejected.

Outputs of :func:`run_scenario`:

``report.json``
    the certificate(s), the fully resolved scenario, mesh statistics and the
    tolerances used; keys sorted, floats written with 17 significant digits,
    non-finite numbers as ``null``.
``boundary_profile.csv``
    ``theta,det_DU,confidence`` per boundary vertex (confidence is 1 or 0).
``alpha_sweep.csv``
    ``alpha,M_alpha``; ``M_alpha`` is empty where the count was undefined.
``fields.csv`` (with ``dump_fields``)
    ``x,y,u1,u2,v`` per mesh vertex.
"""

import copy
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .certify import (
    BOUNDARY_DEGENERATE,
    DIFFEOMORPHISM,
    FOLD_DETECTED,
    INCONCLUSIVE,
    Tolerances,
    certify_main,
    certify_nonconvex,
    collect_evidence,
)
from .coeff import SigmaField, check_ellipticity
from .errors import BoundaryMapError, CertifyError, InputError, NonInvertibleSigma
from .geometry import BoundaryMap, build_disk_mesh, validate_boundary_map

SCHEMA_VERSION = "1.0"

EXIT_CODES = {DIFFEOMORPHISM: 0, BOUNDARY_DEGENERATE: 10, FOLD_DETECTED: 11, INCONCLUSIVE: 12}
EXIT_INPUT_ERROR = 2

CERTIFICATES = ("main", "nonconvex")
EVIDENCE_BLOCKS = ("topology", "injectivity")

DEFAULTS = {
    "name": "scenario",
    "description": "",
    "sigma": {"entries": [["1", "0"], ["0", "1"]], "K": 1.0, "smoothness": "Smooth"},
    "resolution": 256,
    "grading": 1.0,
    "alpha_grid": 16,
    "homotopy_grid": 11,
    "n_probe": 200,
    "seed": 0,
    "hull_samples": 4096,
    "validate_boundary": True,
    "checks": ["main", "topology", "injectivity"],
    "tolerances": {"det_abs": None, **Tolerances().to_dict()},
}
_TOP_KEYS = set(DEFAULTS) | {"phi"}
_SIGMA_KEYS = {"entries", "K", "smoothness"}
_PHI_EXPR_KEYS = {"x", "y", "dx", "dy"}


# ---------------------------------------------------------------------------
# parsing


def _number(value, name, integer=False, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"expected a number, got {value!r}", name)
    if integer and value != int(value):
        raise InputError(f"expected an integer, got {value!r}", name)
    if not math.isfinite(value):
        raise InputError("must be finite", name)
    if minimum is not None and value < minimum:
        raise InputError(f"must be >= {minimum}, got {value!r}", name)
    return int(value) if integer else float(value)


def _reject_unknown(obj, allowed, prefix):
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        name = f"{prefix}.{unknown[0]}" if prefix else unknown[0]
        raise InputError(f"unknown key (allowed: {sorted(allowed)})", name)


def resolve_scenario(raw):
    """Validate a scenario mapping and fill in defaults.

    Returns a new plain dict; raises :class:`InputError` naming the
    offending field.
    """
    if not isinstance(raw, dict):
        raise InputError("a scenario must be a JSON object", "scenario")
    _reject_unknown(raw, _TOP_KEYS, "")
    if "phi" not in raw:
        raise InputError("required", "phi")
    sc = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        if key not in ("sigma", "tolerances"):
            sc[key] = copy.deepcopy(value)

    for key in ("name", "description"):
        if not isinstance(sc[key], str):
            raise InputError("expected a string", key)
    if not sc["name"] or any(c in sc["name"] for c in "/\\"):
        raise InputError("must be a non-empty string without path separators", "name")

    sigma = raw.get("sigma", {})
    if not isinstance(sigma, dict):
        raise InputError("expected an object", "sigma")
    _reject_unknown(sigma, _SIGMA_KEYS, "sigma")
    sc["sigma"].update(copy.deepcopy(sigma))
    entries = sc["sigma"]["entries"]
    if not (isinstance(entries, list) and len(entries) == 2 and all(isinstance(r, list) and len(r) == 2 for r in entries)):
        raise InputError("expected a 2x2 array of expressions", "sigma.entries")
    sc["sigma"]["entries"] = [[e if isinstance(e, str) else _number(e, "sigma.entries") for e in r] for r in entries]
    sc["sigma"]["K"] = _number(sc["sigma"]["K"], "sigma.K", minimum=1.0)

    phi = sc["phi"]
    if not isinstance(phi, dict):
        raise InputError("expected an object", "phi")
    if "points" in phi:
        _reject_unknown(phi, {"points"}, "phi")
        if not isinstance(phi["points"], str):
            raise InputError("expected a CSV path", "phi.points")
    else:
        _reject_unknown(phi, _PHI_EXPR_KEYS, "phi")
        for key in ("x", "y"):
            if key not in phi:
                raise InputError("required", f"phi.{key}")
        if ("dx" in phi) != ("dy" in phi):
            raise InputError("give both dx and dy or neither", "phi.dx" if "dx" not in phi else "phi.dy")
        for key, value in phi.items():
            if not isinstance(value, (str, int, float)) or isinstance(value, bool):
                raise InputError("expected an expression string", f"phi.{key}")

    sc["resolution"] = _number(sc["resolution"], "resolution", integer=True, minimum=8)
    sc["grading"] = _number(sc["grading"], "grading", minimum=1e-3)
    sc["alpha_grid"] = _number(sc["alpha_grid"], "alpha_grid", integer=True, minimum=1)
    sc["homotopy_grid"] = _number(sc["homotopy_grid"], "homotopy_grid", integer=True, minimum=2)
    sc["n_probe"] = _number(sc["n_probe"], "n_probe", integer=True, minimum=0)
    sc["seed"] = _number(sc["seed"], "seed", integer=True, minimum=0)
    sc["hull_samples"] = _number(sc["hull_samples"], "hull_samples", integer=True, minimum=64)
    if not isinstance(sc["validate_boundary"], bool):
        raise InputError("expected true or false", "validate_boundary")

    checks = sc["checks"]
    if not isinstance(checks, list) or not checks:
        raise InputError("expected a non-empty list", "checks")
    for c in checks:
        if c not in CERTIFICATES + EVIDENCE_BLOCKS:
            raise InputError(f"unknown check {c!r}; use {list(CERTIFICATES + EVIDENCE_BLOCKS)}", "checks")
    if not set(checks) & set(CERTIFICATES):
        raise InputError("must include 'main' or 'nonconvex'", "checks")
    sc["checks"] = sorted(set(checks), key=(CERTIFICATES + EVIDENCE_BLOCKS).index)

    tol = raw.get("tolerances", {})
    if not isinstance(tol, dict):
        raise InputError("expected an object", "tolerances")
    _reject_unknown(tol, DEFAULTS["tolerances"], "tolerances")
    for key, value in tol.items():
        if key == "det_abs" and value is None:
            continue
        sc["tolerances"][key] = _number(value, f"tolerances.{key}", minimum=0.0)
    return sc


def load_scenario(path):
    """Read and resolve a scenario file; a relative ``phi.points`` path is made absolute."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}", "scenario") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}", "scenario") from None
    sc = resolve_scenario(raw)
    if "points" in sc["phi"]:
        sc["phi"]["points"] = str((path.parent / sc["phi"]["points"]).resolve())
    return sc


def _named(exc, name):
    return exc if exc.field is not None else InputError(str(exc), name)


def build_sigma(sc):
    s = sc["sigma"]
    try:
        return SigmaField(s["entries"], K=s["K"], smoothness=s["smoothness"], name=sc["name"])
    except InputError as exc:
        raise _named(exc, "sigma.entries") from None


def build_phi(sc):
    phi = sc["phi"]
    if "points" in phi:
        try:
            return BoundaryMap.from_csv(phi["points"], name=sc["name"])
        except OSError as exc:
            raise InputError(f"cannot read {phi['points']}: {exc.strerror}", "phi.points") from None
        except ValueError as exc:
            raise InputError(str(exc), "phi.points") from None
    try:
        return BoundaryMap.from_expressions(phi["x"], phi["y"], phi.get("dx"), phi.get("dy"), name=sc["name"])
    except InputError as exc:
        raise _named(exc, "phi") from None


def _tolerances(sc):
    t = {k: v for k, v in sc["tolerances"].items() if k != "det_abs"}
    return Tolerances(**t)


# ---------------------------------------------------------------------------
# gallery


def _gallery_dir():
    return resources.files("sigmacert") / "gallery"


def list_gallery():
    """``[(name, description), ...]`` of the built-in scenarios, sorted by name."""
    out = []
    for entry in _gallery_dir().iterdir():
        if entry.name.endswith(".json"):
            data = json.loads(entry.read_text(encoding="utf-8"))
            out.append((data["name"], data.get("description", "")))
    return sorted(out)


def gallery_scenario(name):
    """Resolved scenario dict of a gallery entry."""
    entry = _gallery_dir() / f"{name}.json"
    if not entry.is_file():
        names = [n for n, _ in list_gallery()]
        raise InputError(f"no gallery scenario {name!r}; available: {names}", "name")
    return resolve_scenario(json.loads(entry.read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# serialisation


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def format_float(x):
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    return text if any(c in text for c in ".en") else text + ".0"


def _emit(obj, out, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.write("{}")
            return
        out.write("{\n")
        for i, key in enumerate(sorted(obj)):
            out.write(f"{pad}{json.dumps(key)}: ")
            _emit(obj[key], out, indent, level + 1)
            out.write(",\n" if i < len(obj) - 1 else "\n")
        out.write(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.write("[]")
            return
        out.write("[\n")
        for i, item in enumerate(obj):
            out.write(pad)
            _emit(item, out, indent, level + 1)
            out.write(",\n" if i < len(obj) - 1 else "\n")
        out.write(end + "]")
    elif isinstance(obj, bool) or obj is None:
        out.write(json.dumps(obj))
    elif isinstance(obj, float):
        out.write(format_float(obj))
    elif isinstance(obj, (int, str)):
        out.write(json.dumps(obj, ensure_ascii=False))
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_report(report, indent=2):
    """Deterministic JSON text: sorted keys, 17 significant digits, NaN as null."""
    out = io.StringIO()
    _emit(_plain(report), out, indent, 0)
    out.write("\n")
    return out.getvalue()


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else format_float(v) if isinstance(v, float) else str(v) for v in row))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


# ---------------------------------------------------------------------------
# running


@dataclass
class RunResult:
    exit_code: int
    verdict: str = None
    report: dict = None
    out_dir: Path = None
    error: str = None
    files: list = field(default_factory=list)


def _input_error(exc, out_dir=None):
    return RunResult(EXIT_INPUT_ERROR, out_dir=out_dir, error=str(exc))


def run_scenario(scenario, out_dir=None, resolution=None, check=None, dump_fields=False):
    """Run every requested check on one scenario and write the report files.

    Parameters
    ----------
    scenario : dict or path
        A raw or resolved scenario mapping, or a path to a scenario file.
    out_dir : path, optional
        Where to write outputs; nothing is written when omitted.
    resolution : int, optional
        Overrides the scenario's boundary resolution (recorded in the report).
    check : {"main", "nonconvex", "all"}, optional
        Overrides which certificates are issued.
    dump_fields : bool
        Also write ``fields.csv``.

    Returns
    -------
    RunResult
        ``exit_code`` is 0, 10, 11 or 12 by verdict, or 2 for input errors
        (with ``error`` naming the field).
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    try:
        sc = load_scenario(scenario) if isinstance(scenario, (str, Path)) else resolve_scenario(scenario)
        if resolution is not None:
            sc["resolution"] = _number(resolution, "resolution", integer=True, minimum=8)
        if check is not None:
            if check not in CERTIFICATES + ("all",):
                raise InputError(f"unknown check {check!r}", "check")
            wanted = list(CERTIFICATES) if check == "all" else [check]
            sc["checks"] = wanted + [c for c in sc["checks"] if c in EVIDENCE_BLOCKS]
        sigma = build_sigma(sc)
        phi = build_phi(sc)
        validation = None
        if sc["validate_boundary"]:
            try:
                validation = validate_boundary_map(phi).to_dict()
            except BoundaryMapError as exc:
                raise InputError(f"{type(exc).__name__}: {exc}", "phi") from None
        mesh = build_disk_mesh(sc["resolution"], sc["grading"])
        tol = _tolerances(sc)
        try:
            ell = check_ellipticity(sigma, np.vstack([mesh.vertices, mesh.barycenters]), 32, tol.ellipticity)
        except NonInvertibleSigma as exc:
            raise InputError(str(exc), "sigma.entries") from None
        if not ell.passed:
            raise InputError(f"sigma is not elliptic with the declared constant: {ell.to_dict()}", "sigma.K")
    except InputError as exc:
        return _input_error(exc, out_dir)

    require = tuple(c for c in sc["checks"] if c in EVIDENCE_BLOCKS)
    kwargs = dict(
        n_alpha=sc["alpha_grid"], n_t=sc["homotopy_grid"], n_probe=sc["n_probe"], seed=sc["seed"], tolerances=tol
    )
    certificates = {}
    try:
        ev = collect_evidence(sigma, phi, mesh, **kwargs)
    except CertifyError as exc:
        ev = None
        failure = exc
    det_abs = sc["tolerances"]["det_abs"]
    for kind in (c for c in CERTIFICATES if c in sc["checks"]):
        fn = certify_main if kind == "main" else certify_nonconvex
        extra = {"n_samples": sc["hull_samples"]} if kind == "nonconvex" else {}
        if ev is None:
            # re-raise inside the certificate so it is reported as Inconclusive
            certificates[kind] = fn(sigma, phi, mesh, tol=det_abs, require=require, **kwargs, **extra)
            certificates[kind].notes.append(f"evidence collection failed: {failure}")
        else:
            certificates[kind] = fn(sigma, phi, mesh, tol=det_abs, evidence=ev, require=require, **extra)

    primary = "main" if "main" in certificates else "nonconvex"
    verdict = certificates[primary].verdict
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": sc,
        "verdict": verdict,
        "primary_certificate": primary,
        "exit_code": EXIT_CODES[verdict],
        "mesh": mesh.stats(),
        "tolerances": sc["tolerances"],
        "boundary_map": {"source": phi.source, "validation": validation},
        "sigma": sigma.describe(),
        "certificates": {k: c.to_dict() for k, c in certificates.items()},
    }
    result = RunResult(EXIT_CODES[verdict], verdict, report, out_dir)
    if out_dir is not None:
        result.files = write_outputs(out_dir, report, ev, mesh, dump_fields)
    return result


def write_outputs(out_dir, report, evidence, mesh, dump_fields=False):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = [out_dir / "report.json"]
    files[0].write_bytes(dumps_report(report).encode("utf-8"))
    if evidence is None:
        return files

    m = evidence.mapping
    path = out_dir / "boundary_profile.csv"
    rows = zip(
        (float(t) for t in mesh.boundary_theta),
        (float(d) for d in m.boundary_jacobian),
        (int(c) for c in m.boundary_confidence),
    )
    _write_csv(path, ["theta", "det_DU", "confidence"], rows)
    files.append(path)

    path = out_dir / "alpha_sweep.csv"
    sweep = evidence.sweep
    _write_csv(path, ["alpha", "M_alpha"], ((float(a), c) for a, c in zip(sweep.alphas, sweep.counts)))
    files.append(path)

    if dump_fields:
        path = out_dir / "fields.csv"
        v = evidence.stream.vertex_values if evidence.stream is not None else [None] * mesh.n_vertices
        rows = (
            (float(p[0]), float(p[1]), float(a), float(b), None if c is None else float(c))
            for p, a, b, c in zip(mesh.vertices, m.u1.vertex_values, m.u2.vertex_values, v)
        )
        _write_csv(path, ["x", "y", "u1", "u2", "v"], rows)
        files.append(path)
    return files


__all__ = [
    "DEFAULTS",
    "EXIT_CODES",
    "EXIT_INPUT_ERROR",
    "SCHEMA_VERSION",
    "RunResult",
    "build_phi",
    "build_sigma",
    "dumps_report",
    "gallery_scenario",
    "list_gallery",
    "load_scenario",
    "resolve_scenario",
    "run_scenario",
    "write_outputs",
]
