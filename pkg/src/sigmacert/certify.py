"""Decision procedures for global invertibility and their corroborating evidence.

A certificate checks det DU > tol on a set of boundary vertices (all of them
for :func:`certify_main`, only those over the non-convex part of the target
for :func:`certify_nonconvex`) and, independently of what the boundary
condition alone would allow one to conclude, runs the whole chain: the
alpha-sweep of critical counts, the winding identities, the homotopy
positivity record, an exhaustive interior determinant scan, and a
brute-force injectivity oracle.
"""

import copy
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.spatial import cKDTree

from .coeff import beltrami_pair, check_ellipticity
from .conjugate import beltrami_residual, complex_map, stream_function, wirtinger
from .errors import CertifyError
from .geometry import convex_decompose, preimage_arcs
from .solver import solve_mapping, triangle_gradients
from .topology import alpha_sweep, homotopy_check, verify_m_plus_one, xi_field_count

logger = logging.getLogger(__name__)

DIFFEOMORPHISM = "Diffeomorphism"
BOUNDARY_DEGENERATE = "BoundaryDegenerate"
FOLD_DETECTED = "FoldDetected"
INCONCLUSIVE = "Inconclusive"
VERDICTS = (DIFFEOMORPHISM, BOUNDARY_DEGENERATE, FOLD_DETECTED, INCONCLUSIVE)


@dataclass
class Tolerances:
    det_rel: float = 1e-6  # boundary threshold as a fraction of the median |det DU|
    ellipticity: float = 1e-10
    loop_rel: float = 1e-6
    hull_rel: float = 1e-9
    collision_rel: float = 0.1  # image distance, in units of h * typical stretch
    collision_separation: float = 3.0  # preimage distance, in units of h

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# interior and injectivity evidence


@dataclass
class FoldScan:
    triangles: np.ndarray
    interior_min_det: float

    def to_dict(self, limit=20):
        return {
            "n_fold_triangles": int(self.triangles.size),
            "interior_min_det": self.interior_min_det,
            "fold_triangles": [int(t) for t in self.triangles[:limit]],
        }


def interior_fold_scan(mapping):
    """All triangles with det DU <= 0 and the smallest per-triangle determinant."""
    jac = mapping.jacobians
    return FoldScan(np.flatnonzero(jac <= 0), float(jac.min()))


def _polygon_winding(points, poly):
    """Winding number of a closed polygon around each point (crossing rule)."""
    p = np.asarray(points)[:, None, :]
    a, b = poly[None, :, :], np.roll(poly, -1, axis=0)[None, :, :]
    left = (b[..., 0] - a[..., 0]) * (p[..., 1] - a[..., 1]) - (p[..., 0] - a[..., 0]) * (
        b[..., 1] - a[..., 1]
    )
    up = (a[..., 1] <= p[..., 1]) & (b[..., 1] > p[..., 1]) & (left > 0)
    down = (a[..., 1] > p[..., 1]) & (b[..., 1] <= p[..., 1]) & (left < 0)
    return up.sum(axis=1) - down.sum(axis=1)


def _covering_triangles(points, img_tri, eps=1e-12):
    """For each point, the list of image triangles containing it."""
    a, b, c = img_tri[:, 0], img_tri[:, 1], img_tri[:, 2]
    area = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    usable = np.abs(area) > 1e-300
    out = []
    for start in range(0, len(points), 64):
        p = points[start : start + 64][:, None, :]

        def cross(u, v):
            return (v[None, :, 0] - u[None, :, 0]) * (p[..., 1] - u[None, :, 1]) - (
                v[None, :, 1] - u[None, :, 1]
            ) * (p[..., 0] - u[None, :, 0])

        l0, l1, l2 = cross(b, c) / area, cross(c, a) / area, cross(a, b) / area
        inside = (l0 >= -eps) & (l1 >= -eps) & (l2 >= -eps) & usable[None, :]
        out.extend(np.flatnonzero(row) for row in inside)
    return out


@dataclass
class InjectivityEvidence:
    n_probe: int
    winding_failures: list
    multi_cover: list
    collisions: list
    collision_threshold: float

    @property
    def clean(self):
        return not (self.winding_failures or self.multi_cover or self.collisions)

    @property
    def has_witness(self):
        return not self.clean

    def to_dict(self, limit=10):
        return {
            "clean": self.clean,
            "n_probe": self.n_probe,
            "n_winding_failures": len(self.winding_failures),
            "winding_failures": self.winding_failures[:limit],
            "n_multi_cover": len(self.multi_cover),
            "multi_cover": self.multi_cover[:limit],
            "n_collisions": len(self.collisions),
            "collisions": self.collisions[:limit],
            "collision_threshold": self.collision_threshold,
        }


def injectivity_oracle(mapping, mesh, n_probe=200, seed=0, tolerances=None):
    """Brute-force look for non-injectivity of the discrete map.

    Probes are images U(q) of points q in the disk: the barycenter of every
    triangle along the circle (where folds first appear when the boundary
    condition fails) plus ``n_probe`` seeded random points drawn by area.
    For each probe the winding number of the image boundary loop must be 1
    and exactly one image triangle, or a cluster of mutually adjacent ones,
    may contain it. Separately, vertex images closer than a
    resolution-scaled threshold whose preimages are far apart are reported
    as collisions.
    """
    tol = tolerances or Tolerances()
    rng = np.random.default_rng(seed)
    tri = mesh.triangles
    img = mapping.images()
    img_tri = img[tri]

    pick = rng.choice(mesh.n_triangles, size=n_probe, p=mesh.areas / mesh.areas.sum())
    r = rng.random((n_probe, 2))
    flip = r.sum(axis=1) > 1
    r[flip] = 1 - r[flip]
    bary = np.column_stack([1 - r.sum(axis=1), r])
    trace = mesh.boundary_trace_triangles
    probe_tri = np.concatenate([trace, pick])
    probe_bary = np.vstack([np.full((len(trace), 3), 1.0 / 3.0), bary])
    preimages = np.einsum("nk,nka->na", probe_bary, mesh.vertices[tri[probe_tri]])
    probes = np.einsum("nk,nka->na", probe_bary, img_tri[probe_tri])

    loop = img[mesh.boundary]
    wn = _polygon_winding(probes, loop)
    winding_failures = [
        {"probe": [float(v) for v in probes[k]], "preimage": [float(v) for v in preimages[k]], "winding": int(wn[k])}
        for k in np.flatnonzero(wn != 1)
    ]

    multi = []
    for k, cover in enumerate(_covering_triangles(probes, img_tri)):
        if len(cover) < 2:
            continue
        verts = tri[cover]
        shares = [[bool(np.intersect1d(verts[i], verts[j]).size) for j in range(len(cover))] for i in range(len(cover))]
        if not all(all(row) for row in shares):
            multi.append(
                {
                    "probe": [float(v) for v in probes[k]],
                    "triangles": [int(t) for t in cover],
                    "degree": int(np.sign(mapping.jacobians[cover]).sum()),
                }
            )

    stretch = float(np.median(np.sqrt(np.abs(mapping.jacobians))))
    threshold = tol.collision_rel * mesh.h * stretch
    pairs = cKDTree(img).query_pairs(threshold, output_type="ndarray")
    collisions = []
    if len(pairs):
        sep = np.linalg.norm(mesh.vertices[pairs[:, 0]] - mesh.vertices[pairs[:, 1]], axis=1)
        far = pairs[sep > tol.collision_separation * mesh.h]
        far = far[np.lexsort((far[:, 1], far[:, 0]))]
        collisions = [
            {
                "vertices": [int(i), int(j)],
                "preimage_distance": float(np.linalg.norm(mesh.vertices[i] - mesh.vertices[j])),
                "image_distance": float(np.linalg.norm(img[i] - img[j])),
            }
            for i, j in far
        ]
    return InjectivityEvidence(len(probes), winding_failures, multi, collisions, threshold)


# ---------------------------------------------------------------------------
# certificates


@dataclass
class CertificateReport:
    verdict: str
    kind: str
    threshold: float
    min_boundary_det: float
    median_boundary_det: float
    nc_min_det: object
    n_checked: int
    degenerate_arcs: list
    topology: dict
    interior: dict
    injectivity: dict
    beltrami: dict
    ellipticity: dict
    mesh: dict
    tolerances: dict
    low_confidence_vertices: int
    notes: list
    convex: object = None
    mapping: object = field(default=None, repr=False)
    sweep: object = field(default=None, repr=False)

    def to_dict(self):
        d = {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self) if f.name not in ("mapping", "sweep")}
        d["interior_min_det"] = self.interior.get("interior_min_det")
        d["mesh_h"] = self.mesh.get("h")
        return d


def _arcs(theta, mask):
    """Maximal runs of flagged boundary vertices as [first_theta, last_theta]."""
    n = len(mask)
    if not mask.any():
        return []
    if mask.all():
        return [[float(theta[0]), float(theta[-1])]]
    shift = int(np.flatnonzero(~mask)[0])
    idx = np.roll(np.arange(n), -shift)
    m = mask[idx]
    arcs, k = [], 0
    while k < n:
        if m[k]:
            s = k
            while k < n and m[k]:
                k += 1
            arcs.append([float(theta[idx[s]]), float(theta[idx[k - 1]])])
        else:
            k += 1
    return sorted(arcs)


class _Evidence:
    """Everything computed once per (sigma, phi, mesh) and shared by both certificates."""

    def __init__(self, sigma, phi, mesh, mapping=None, n_alpha=16, n_t=11, n_probe=200, seed=0, tolerances=None):
        self.tol = tolerances or Tolerances()
        self.notes = []
        self.mesh = mesh
        samples = np.vstack([mesh.vertices, mesh.barycenters])
        self.ellipticity = check_ellipticity(sigma, samples, 32, self.tol.ellipticity)
        if not self.ellipticity.passed:
            self.notes.append("sigma fails the sampled ellipticity check for the declared K")
        self.mapping = mapping or solve_mapping(sigma, mesh, phi)
        m = self.mapping

        self.folds = interior_fold_scan(m)
        self.injectivity = injectivity_oracle(m, mesh, n_probe, seed, self.tol)

        self.sweep = alpha_sweep(m, n_alpha)
        self.stream = self.fmap = None
        self.beltrami = {}
        try:
            self.stream = stream_function(sigma, m.u1, mesh, tol=self.tol.loop_rel)
            self.fmap = complex_map(m.u1, self.stream, mesh)
            pair = beltrami_pair(sigma, mesh.barycenters)
            _, rmax = beltrami_residual(self.fmap, pair, mesh)
            # same residual with grad v taken from the P1 interpolant of the vertex values
            f_z, f_zbar = wirtinger(m.u1.gradients, triangle_gradients(mesh, self.stream.vertex_values))
            r_p1 = np.abs(f_zbar - pair.mu * f_z - pair.nu * np.conj(f_z))[mesh.triangle_layer >= 2]
            self.beltrami = {
                "k_bound": pair.k_bound,
                "max_residual": rmax,
                "max_residual_p1_interior": float(r_p1.max()) if r_p1.size else 0.0,
                "max_abs_f_z": float(np.abs(self.fmap.f_z).max()),
                "loop_residual": self.stream.loop_residual,
                "field_scale": self.stream.field_scale,
            }
        except CertifyError as exc:
            self.notes.append(f"stream function: {type(exc).__name__}: {exc}")

        self.xi_count = None
        try:
            self.xi_count = xi_field_count(m)
        except CertifyError as exc:
            self.notes.append(f"xi count: {type(exc).__name__}: {exc}")

        self.m_plus_one = None
        if self.fmap is not None:
            try:
                self.m_plus_one = verify_m_plus_one(self.fmap, self.sweep, phi)
            except CertifyError as exc:
                self.notes.append(f"winding identities: {type(exc).__name__}: {exc}")

        self.homotopy = homotopy_check(m, self.stream, sigma, n_t) if self.stream is not None else None

    def topology(self):
        sweep = self.sweep
        agree = None
        if self.xi_count is not None and sweep.constant:
            agree = self.xi_count == sweep.M
        return {
            "alpha_sweep": sweep.to_dict(),
            "xi_count": self.xi_count,
            "counters_agree": agree,
            "m_plus_one": self.m_plus_one.to_dict() if self.m_plus_one else None,
            "homotopy": self.homotopy.to_dict() if self.homotopy else None,
        }

    def chain_holds(self, require=("topology", "injectivity")):
        """The corroboration chain: M = 0, winding identities, homotopy, interior, oracle.

        ``require`` selects which optional blocks gate the verdict; the interior
        determinant scan is always applied.
        """
        failures = []
        if "topology" in require:
            failures.extend(self._topology_failures())
        if self.folds.interior_min_det <= 0:
            failures.append(f"{self.folds.triangles.size} triangles with det DU <= 0")
        if "injectivity" in require and not self.injectivity.clean:
            failures.append("injectivity oracle found witnesses")
        return failures

    def _topology_failures(self):
        failures = []
        if not (self.sweep.constant and self.sweep.M == 0):
            failures.append(f"alpha-sweep not constantly zero: {self.sweep.counts}")
        if self.m_plus_one is None or not (self.m_plus_one.identity_holds and self.m_plus_one.wn_phi_is_one):
            failures.append("winding identities WN(f) = M + 1, WN(Phi) = 1 not confirmed")
        if self.homotopy is None or self.homotopy.min_boundary_det <= 0:
            failures.append("homotopy determinant not positive")
        return failures


def _certificate(ev, phi, kind, checked, tol, convex=None, require=("topology", "injectivity")):
    m, mesh = ev.mapping, ev.mesh
    bdet = m.boundary_jacobian
    median = float(np.median(np.abs(bdet)))
    threshold = float(tol) if tol is not None else ev.tol.det_rel * median
    notes = list(ev.notes)

    bad = checked & (bdet <= threshold)
    boundary_ok = not bad.any()
    nc_min = float(bdet[checked].min()) if kind == "nonconvex" and checked.any() else None
    if kind == "nonconvex" and not checked.any():
        notes.append("target is convex: the non-convex boundary condition is void")

    failures = ev.chain_holds(require)
    has_fold = ev.folds.triangles.size > 0
    if not boundary_ok:
        verdict = BOUNDARY_DEGENERATE
    elif not failures:
        verdict = DIFFEOMORPHISM
    else:
        notes.extend(failures)
        notes.append(
            "boundary condition holds but the corroboration chain fails: the discrete map "
            "disagrees with the continuum theorem; rerun at higher resolution"
        )
        verdict = FOLD_DETECTED if has_fold and ev.injectivity.has_witness else INCONCLUSIVE

    if (~m.boundary_confidence).any():
        notes.append(f"{int((~m.boundary_confidence).sum())} boundary vertices with low gradient confidence")

    return CertificateReport(
        verdict=verdict,
        kind=kind,
        threshold=threshold,
        min_boundary_det=float(bdet.min()),
        median_boundary_det=median,
        nc_min_det=nc_min,
        n_checked=int(checked.sum()),
        degenerate_arcs=_arcs(mesh.boundary_theta, bad),
        topology=ev.topology(),
        interior=ev.folds.to_dict(),
        injectivity=ev.injectivity.to_dict(),
        beltrami=ev.beltrami,
        ellipticity=ev.ellipticity.to_dict(),
        mesh=mesh.stats(),
        tolerances=ev.tol.to_dict(),
        low_confidence_vertices=int((~m.boundary_confidence).sum()),
        notes=notes,
        convex=convex.to_dict() if convex is not None else None,
        mapping=m,
        sweep=ev.sweep,
    )


def _inconclusive(kind, mesh, tolerances, exc):
    return CertificateReport(
        verdict=INCONCLUSIVE,
        kind=kind,
        threshold=float("nan"),
        min_boundary_det=float("nan"),
        median_boundary_det=float("nan"),
        nc_min_det=None,
        n_checked=0,
        degenerate_arcs=[],
        topology={},
        interior={},
        injectivity={},
        beltrami={},
        ellipticity={},
        mesh=mesh.stats(),
        tolerances=(tolerances or Tolerances()).to_dict(),
        low_confidence_vertices=0,
        notes=[f"{type(exc).__name__}: {exc}"],
    )


def collect_evidence(sigma, phi, mesh, **kwargs):
    return _Evidence(sigma, phi, mesh, **kwargs)


def certify_main(sigma, phi, mesh, tol=None, evidence=None, require=("topology", "injectivity"), **kwargs):
    """Check det DU > tol at every boundary vertex, then run the corroboration suite.

    ``tol`` defaults to ``det_rel`` times the median boundary |det DU|.
    Extra keyword arguments (``n_alpha``, ``n_t``, ``n_probe``, ``seed``,
    ``tolerances``, ``mapping``) are forwarded to the evidence collection.
    ``require`` names the corroboration blocks that must pass for a
    Diffeomorphism verdict.
    """
    try:
        ev = evidence or _Evidence(sigma, phi, mesh, **kwargs)
    except CertifyError as exc:
        return _inconclusive("main", mesh, kwargs.get("tolerances"), exc)
    checked = np.ones(mesh.n_boundary, dtype=bool)
    return _certificate(ev, phi, "main", checked, tol, require=require)


def certify_nonconvex(
    sigma, phi, mesh, tol=None, evidence=None, n_samples=4096, require=("topology", "injectivity"), **kwargs
):
    """Check det DU > tol only over the preimage of the non-convex part of the target."""
    try:
        ev = evidence or _Evidence(sigma, phi, mesh, **kwargs)
    except CertifyError as exc:
        return _inconclusive("nonconvex", mesh, kwargs.get("tolerances"), exc)
    diameter = float(np.max(np.ptp(phi.samples(n_samples)[1], axis=0)))
    decomp = convex_decompose(phi, n_samples, ev.tol.hull_rel * diameter)
    checked = decomp.in_nc(mesh.boundary_theta)
    logger.debug("non-convex arcs %s cover %d boundary vertices", preimage_arcs(decomp), checked.sum())
    return _certificate(ev, phi, "nonconvex", checked, tol, convex=decomp, require=require)
