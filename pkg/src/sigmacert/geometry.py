"""Disk triangulation, boundary maps and the convex/non-convex split of the target."""

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    DegenerateTangent,
    InputError,
    MeshDegenerate,
    OrientationReversed,
    SelfIntersecting,
)
from .expressions import Expression

TWO_PI = 2 * np.pi


# ---------------------------------------------------------------------------
# mesh


def _ring_radii(n_rings, grading):
    k = np.arange(n_rings + 1) / n_rings
    return 1.0 - (1.0 - k) ** grading


def _stitch(inner, outer, inner_angles, outer_angles):
    """Triangulate the annular strip between two concentric vertex rings."""
    m, n = len(inner), len(outer)
    a = np.append(inner_angles, inner_angles[0] + TWO_PI)
    b = np.append(outer_angles, outer_angles[0] + TWO_PI)
    tris = []
    i = j = 0
    while i < m or j < n:
        if i < m and (j == n or a[i + 1] <= b[j + 1]):
            tris.append((inner[i], outer[j % n], inner[(i + 1) % m]))
            i += 1
        else:
            tris.append((inner[i % m], outer[j], outer[(j + 1) % n]))
            j += 1
    return tris


class DiskMesh:
    """Polar-ring triangulation of the closed unit disk.

    Attributes
    ----------
    vertices : (nv, 2) array
    triangles : (nt, 3) int array, counterclockwise
    boundary : (n_boundary,) int array
        Boundary vertex indices ordered counterclockwise from theta = 0.
    boundary_theta : (n_boundary,) array
    vertex_ring : (nv,) int array
        Ring index of every vertex; the boundary ring is ``n_rings``.
    """

    def __init__(self, vertices, triangles, boundary, boundary_theta, vertex_ring):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        self.boundary = np.asarray(boundary, dtype=np.int64)
        self.boundary_theta = np.asarray(boundary_theta, dtype=float)
        self.vertex_ring = np.asarray(vertex_ring, dtype=np.int64)
        self.n_rings = int(self.vertex_ring.max())
        bad = np.flatnonzero(self.areas < 1e-14)
        if bad.size:
            raise MeshDegenerate(f"{bad.size} triangles with area < 1e-14 (first: {bad[0]})")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_boundary(self):
        return len(self.boundary)

    @cached_property
    def signed_areas(self):
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self):
        return self.signed_areas

    @cached_property
    def barycenters(self):
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def basis_gradients(self):
        """(nt, 3, 2) gradients of the three P1 hat functions on each triangle."""
        p = self.vertices[self.triangles]
        # grad phi_k = J (p_{k+2} - p_{k+1}) / (2 area), J the counterclockwise rotation
        opp = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
        g = np.stack([opp[..., 1], -opp[..., 0]], axis=-1)
        return -g / (2 * self.signed_areas[:, None, None])

    @cached_property
    def edges(self):
        """Unique undirected edges (ne, 2) with ``edges[:, 0] < edges[:, 1]``."""
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def h(self):
        p = self.vertices[self.triangles]
        return float(np.max(np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2)))

    @cached_property
    def triangle_layer(self):
        """Distance (in rings) between each triangle and the boundary ring."""
        return self.n_rings - self.vertex_ring[self.triangles].max(axis=1)

    @cached_property
    def boundary_trace_triangles(self):
        """For boundary edge k (vertex k to k+1 in loop order) the unique incident triangle."""
        b = self.boundary
        nxt = np.roll(b, -1)
        lookup = {}
        for t in np.flatnonzero(self.triangle_layer == 0):
            tri = self.triangles[t]
            for a, c in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                lookup[(a, c)] = t
        return np.array([lookup[(i, j)] for i, j in zip(b, nxt)], dtype=np.int64)

    @cached_property
    def vertex_triangles(self):
        """Incident triangles of every vertex as a CSR-like (indptr, indices) pair."""
        order = np.argsort(self.triangles.ravel(), kind="stable")
        counts = np.bincount(self.triangles.ravel(), minlength=self.n_vertices)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return indptr, order // 3

    def incident(self, vertex):
        indptr, tri = self.vertex_triangles
        return tri[indptr[vertex] : indptr[vertex + 1]]

    def locate(self, points):
        """Triangle containing each point (or -1) and barycentric coordinates."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        p = self.vertices[self.triangles]
        tri_idx = np.full(len(pts), -1, dtype=np.int64)
        bary = np.zeros((len(pts), 3))
        T = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)  # (nt, 2, 2)
        Tinv = np.linalg.inv(T)
        for start in range(0, len(pts), 256):
            chunk = pts[start : start + 256]
            lam = np.einsum("tij,ntj->nti", Tinv, chunk[:, None, :] - p[None, :, 0])
            l0 = 1 - lam.sum(axis=2)
            ok = (lam >= -1e-12).all(axis=2) & (l0 >= -1e-12)
            hit = ok.any(axis=1)
            first = ok.argmax(axis=1)
            rows = np.flatnonzero(hit)
            tri_idx[start + rows] = first[rows]
            bary[start + rows, 0] = l0[rows, first[rows]]
            bary[start + rows, 1:] = lam[rows, first[rows]]
        return tri_idx, bary

    def stats(self):
        return {
            "n_boundary": self.n_boundary,
            "n_rings": self.n_rings,
            "n_vertices": self.n_vertices,
            "n_triangles": self.n_triangles,
            "h": self.h,
            "min_area": float(self.areas.min()),
        }


def build_disk_mesh(n_boundary, grading=1.0):
    """Structured polar-ring triangulation with ``n_boundary`` boundary vertices.

    Ring ``k`` sits at radius ``1 - (1 - k/R)**grading`` and carries roughly
    ``n_boundary * r_k`` equally spaced vertices, so element size is uniform
    for ``grading = 1`` and clusters toward the circle for ``grading > 1``.
    """
    if int(n_boundary) != n_boundary or n_boundary < 8:
        raise InputError(f"n_boundary must be an integer >= 8, got {n_boundary}", "resolution")
    if not grading >= 1.0:
        raise InputError("grading must be >= 1", "grading")
    n_boundary = int(n_boundary)
    n_rings = max(2, math.ceil(n_boundary / TWO_PI))
    radii = _ring_radii(n_rings, grading)

    vertices = [(0.0, 0.0)]
    ring_of = [0]
    rings = [np.array([0])]
    angles = [np.array([0.0])]
    for k in range(1, n_rings + 1):
        count = n_boundary if k == n_rings else max(4, round(n_boundary * radii[k]))
        t = TWO_PI * np.arange(count) / count
        start = len(vertices)
        if k == n_rings:
            pts = np.column_stack([np.cos(t), np.sin(t)])
        else:
            pts = radii[k] * np.column_stack([np.cos(t), np.sin(t)])
        vertices.extend(map(tuple, pts))
        ring_of.extend([k] * count)
        rings.append(np.arange(start, start + count))
        angles.append(t)

    tris = [(0, rings[1][j], rings[1][(j + 1) % len(rings[1])]) for j in range(len(rings[1]))]
    for k in range(1, n_rings):
        tris.extend(_stitch(rings[k], rings[k + 1], angles[k], angles[k + 1]))

    return DiskMesh(
        np.array(vertices),
        np.array(tris),
        rings[-1],
        angles[-1],
        np.array(ring_of),
    )


# ---------------------------------------------------------------------------
# boundary maps


class BoundaryMap:
    """Boundary data theta -> Phi(theta) on the unit circle, with derivative.

    Use :meth:`from_expressions`, :meth:`from_points` or :meth:`from_csv`
    rather than calling the constructor with raw callables.
    """

    def __init__(self, phi, phi_prime=None, name="", source=None):
        self._phi = phi
        self._phi_prime = phi_prime
        self.name = name
        self.source = source or {}

    @classmethod
    def from_expressions(cls, x, y, dx=None, dy=None, name=""):
        ex, ey = Expression(x, ("theta",)), Expression(y, ("theta",))

        def phi(theta):
            return np.column_stack([ex(theta=theta), ey(theta=theta)])

        if dx is not None and dy is not None:
            edx, edy = Expression(dx, ("theta",)), Expression(dy, ("theta",))

            def phi_prime(theta):
                return np.column_stack([edx(theta=theta), edy(theta=theta)])

            derivative = "expression"
        elif ex.is_analytic and ey.is_analytic:

            def phi_prime(theta):
                # complex-step differentiation, exact to rounding for analytic expressions
                z = np.asarray(theta, dtype=float) + 1e-30j
                return np.column_stack([ex(theta=z).imag, ey(theta=z).imag]) / 1e-30

            derivative = "complex-step"
        else:

            def phi_prime(theta):
                t = np.asarray(theta, dtype=float)
                step = 1e-3
                f = lambda s: phi(t + s * step)
                return (8 * (f(1) - f(-1)) - (f(2) - f(-2))) / (12 * step)

            derivative = "five-point"
        source = {"kind": "expression", "x": ex.source, "y": ey.source, "derivative": derivative}
        return cls(phi, phi_prime, name=name, source=source)

    @classmethod
    def from_points(cls, theta, x, y, name=""):
        """Periodic cubic-spline fit through samples ``(theta_k, x_k, y_k)``."""
        theta = np.asarray(theta, dtype=float)
        pts = np.column_stack([x, y]).astype(float)
        if len(theta) < 8:
            raise InputError("a point-list boundary needs at least 8 samples", "phi.points")
        order = np.argsort(np.mod(theta, TWO_PI))
        theta, pts = np.mod(theta, TWO_PI)[order], pts[order]
        if np.any(np.diff(theta) <= 0):
            raise InputError("point-list theta values must be distinct mod 2*pi", "phi.points")
        tt = np.append(theta, theta[0] + TWO_PI)
        spline = CubicSpline(tt, np.vstack([pts, pts[:1]]), bc_type="periodic")
        dspline = spline.derivative()
        start = theta[0]

        def phi(t):
            return spline(start + np.mod(np.asarray(t, dtype=float) - start, TWO_PI))

        def phi_prime(t):
            return dspline(start + np.mod(np.asarray(t, dtype=float) - start, TWO_PI))

        source = {"kind": "points", "n_points": int(len(theta)), "interpolation": "periodic-cubic"}
        return cls(phi, phi_prime, name=name, source=source)

    @classmethod
    def from_csv(cls, path, name=""):
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"theta", "x", "y"} <= set(reader.fieldnames):
                raise InputError("CSV must have header columns theta,x,y", "phi.points")
            try:
                rows = [(float(r["theta"]), float(r["x"]), float(r["y"])) for r in reader]
            except (TypeError, ValueError) as exc:
                raise InputError(f"non-numeric value in {path}: {exc}", "phi.points") from None
        arr = np.array(rows)
        bm = cls.from_points(arr[:, 0], arr[:, 1], arr[:, 2], name=name)
        bm.source["file"] = str(path)
        return bm

    def __call__(self, theta):
        return np.atleast_2d(self._phi(np.atleast_1d(np.asarray(theta, dtype=float))))

    def derivative(self, theta):
        if self._phi_prime is None:
            raise InputError("boundary map has no derivative")
        return np.atleast_2d(self._phi_prime(np.atleast_1d(np.asarray(theta, dtype=float))))

    @property
    def has_derivative(self):
        return self._phi_prime is not None

    def samples(self, n):
        theta = TWO_PI * np.arange(n) / n
        return theta, self(theta)


@dataclass
class BoundaryValidation:
    n_samples: int
    signed_area: float
    min_speed: float
    simple: bool = True

    def to_dict(self):
        return {
            "n_samples": self.n_samples,
            "signed_area": self.signed_area,
            "min_speed": self.min_speed,
            "simple": self.simple,
        }


def polygon_signed_area(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (
        c[..., 0] - a[..., 0]
    )


def find_self_intersection(pts):
    """First pair (i, j) of non-adjacent closed-polyline segments that meet, else None."""
    n = len(pts)
    p0, p1 = pts, np.roll(pts, -1, axis=0)
    lo, hi = np.minimum(p0, p1), np.maximum(p0, p1)
    idx = np.arange(n)
    for start in range(0, n, 128):
        i = idx[start : start + 128, None]
        a, b = p0[i[:, 0]][:, None], p1[i[:, 0]][:, None]
        o1, o2 = _orient(a, b, p0[None]), _orient(a, b, p1[None])
        o3 = _orient(p0[None], p1[None], a)
        o4 = _orient(p0[None], p1[None], b)
        boxes = (lo[i[:, 0]][:, None] <= hi[None]).all(axis=2) & (hi[i[:, 0]][:, None] >= lo[None]).all(
            axis=2
        )
        hit = (o1 * o2 <= 0) & (o3 * o4 <= 0) & boxes
        d = (idx[None, :] - i) % n
        hit &= (d > 1) & (d < n - 1)
        rows, cols = np.nonzero(hit)
        if rows.size:
            return int(i[rows[0], 0]), int(cols[0])
    return None


def validate_boundary_map(phi, n_samples=1024):
    """Check that Phi is a simple, counterclockwise, regular closed curve."""
    if n_samples < 64:
        raise InputError("validation needs n_samples >= 64", "n_samples")
    theta, pts = phi.samples(n_samples)
    if not np.all(np.isfinite(pts)):
        raise InputError("boundary map produced non-finite values", "phi")
    if phi.has_derivative:
        speed = np.linalg.norm(phi.derivative(theta), axis=1)
    else:
        speed = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1) * n_samples / TWO_PI
    k = int(np.argmin(speed))
    if speed[k] <= 1e-9 * max(float(np.mean(speed)), 1e-300):
        raise DegenerateTangent(f"|dPhi/dtheta| vanishes at theta = {theta[k]:.6g}", theta[k])
    hit = find_self_intersection(pts)
    if hit is not None:
        i, j = hit
        raise SelfIntersecting(
            f"segments at theta = {theta[i]:.6g} and theta = {theta[j]:.6g} intersect", theta[i]
        )
    area = polygon_signed_area(pts)
    if area <= 0:
        raise OrientationReversed(f"curve is clockwise (signed area {area:.6g})", float(theta[0]))
    return BoundaryValidation(n_samples, area, float(speed[k]))


# ---------------------------------------------------------------------------
# convex decomposition


def monotone_chain(points):
    """Indices of the convex hull vertices, counterclockwise, collinear points dropped."""
    pts = np.asarray(points, dtype=float)
    order = np.lexsort((pts[:, 1], pts[:, 0]))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def half(seq):
        chain = []
        for k in seq:
            while len(chain) >= 2 and cross(pts[chain[-2]], pts[chain[-1]], pts[k]) <= 0:
                chain.pop()
            chain.append(int(k))
        return chain

    lower, upper = half(order), half(order[::-1])
    return np.array(lower[:-1] + upper[:-1], dtype=np.int64)


def _segment_distance(p, a, b):
    ab = b - a
    t = np.clip(((p - a) @ ab) / max(float(ab @ ab), 1e-300), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


def _runs(mask):
    """Maximal cyclic runs of True as (start, length) pairs."""
    n = len(mask)
    if mask.all():
        return [(0, n)]
    if not mask.any():
        return []
    shift = int(np.flatnonzero(~mask)[0])
    rolled = np.roll(mask, -shift)
    runs, k = [], 0
    while k < n:
        if rolled[k]:
            s = k
            while k < n and rolled[k]:
                k += 1
            runs.append(((s + shift) % n, k - s))
        else:
            k += 1
    return runs


@dataclass
class ConvexDecomposition:
    theta: np.ndarray
    on_hull: np.ndarray
    gamma_c: list
    gamma_nc: list
    hull: np.ndarray
    tol: float

    def in_nc(self, theta):
        """Mask of parameters lying in one of the non-convex intervals."""
        t = np.mod(np.asarray(theta, dtype=float), TWO_PI)
        mask = np.zeros(t.shape, dtype=bool)
        for a, b in self.gamma_nc:
            s = np.mod(t - a, TWO_PI)
            mask |= (s > 0) & (s < b - a)
        return mask

    def to_dict(self):
        return {
            "gamma_nc": [[a, b] for a, b in self.gamma_nc],
            "gamma_c": [[a, b] for a, b in self.gamma_c],
            "n_samples": int(len(self.theta)),
            "n_hull_vertices": int(len(self.hull)),
            "tol": self.tol,
        }


def convex_decompose(phi, n_samples=4096, tol=None):
    """Split the parameter circle into convex-part and non-convex-part intervals.

    A sample is on the convex part when it lies within ``tol`` of the convex
    hull boundary of the sampled curve. Interval endpoints are placed halfway
    between neighbouring samples of different class; non-convex runs separated
    by a single convex sample are merged.
    """
    theta, pts = phi.samples(n_samples)
    diameter = float(np.max(np.ptp(pts, axis=0)))
    if tol is None:
        tol = 1e-9 * diameter
    hv = monotone_chain(pts)
    on_hull = np.zeros(n_samples, dtype=bool)
    on_hull[hv] = True
    start = int(np.argmin(hv))
    cyc = np.roll(hv, -start)
    if np.all(np.diff(cyc) > 0):
        for a, b in zip(cyc, np.roll(cyc, -1)):
            between = np.arange(a + 1, b if b > a else b + n_samples) % n_samples
            if between.size:
                on_hull[between] = _segment_distance(pts[between], pts[a], pts[b]) <= tol
    else:
        # hull order disagrees with curve order (should not happen for simple curves)
        rest = np.flatnonzero(~on_hull)
        best = np.full(rest.size, np.inf)
        for a, b in zip(hv, np.roll(hv, -1)):
            best = np.minimum(best, _segment_distance(pts[rest], pts[a], pts[b]))
        on_hull[rest] = best <= tol

    nc = ~on_hull
    for s, length in _runs(on_hull):
        if length == 1 and not on_hull.all():
            left, right = nc[(s - 1) % n_samples], nc[(s + 1) % n_samples]
            if left and right:
                nc[s] = True
    step = TWO_PI / n_samples

    def intervals(mask):
        out = []
        for s, length in _runs(mask):
            if length == n_samples:
                out.append((0.0, TWO_PI))
            else:
                out.append((float(theta[s] - 0.5 * step), float(theta[s] + (length - 0.5) * step)))
        return sorted(out)

    return ConvexDecomposition(
        theta=theta,
        on_hull=~nc,
        gamma_c=intervals(~nc),
        gamma_nc=intervals(nc),
        hull=pts[hv],
        tol=tol,
    )


def preimage_arcs(decomp):
    """Parameter intervals on the unit circle mapped onto the non-convex part."""
    return list(decomp.gamma_nc)
