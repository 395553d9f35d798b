"""Coefficient fields and their pointwise algebra.

A :class:`SigmaField` is a possibly non-symmetric 2x2 matrix field on the
closed unit disk. Everything here is pointwise and vectorised over arrays of
sample points of shape ``(n, 2)``; matrices come back as ``(n, 2, 2)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDilatation,
    InputError,
    InsufficientSmoothness,
    NonInvertibleSigma,
    VanishingDerivative,
)
from .expressions import Expression

SMOOTHNESS_CLASSES = ("Hoelder", "Lipschitz", "Smooth")


def _as_entry(entry):
    if isinstance(entry, Expression):
        return entry
    if isinstance(entry, (str, int, float)) and not isinstance(entry, bool):
        return Expression(entry, ("x", "y"))
    if callable(entry):
        return entry
    raise InputError(f"cannot interpret sigma entry {entry!r}")


@dataclass(frozen=True)
class SigmaField:
    """Matrix field sigma(x) with declared ellipticity constant ``K``.

    ``entries`` is a 2x2 nested sequence; each entry is an
    :class:`~sigmacert.expressions.Expression` in ``x, y``, a number, or a
    vectorised callable ``f(x, y)``.
    """

    entries: tuple
    K: float = 1.0
    smoothness: str = "Smooth"
    name: str = ""

    def __post_init__(self):
        rows = tuple(tuple(_as_entry(e) for e in row) for row in self.entries)
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise InputError("sigma must be a 2x2 array of entries", "sigma.entries")
        if self.smoothness not in SMOOTHNESS_CLASSES:
            raise InputError(
                f"unknown smoothness class {self.smoothness!r}; use one of {SMOOTHNESS_CLASSES}",
                "sigma.smoothness",
            )
        if not np.isfinite(self.K) or self.K < 1:
            raise InputError("ellipticity constant K must be >= 1", "sigma.K")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def constant(cls, matrix, K=None, smoothness="Smooth", name=""):
        m = np.asarray(matrix, dtype=float)
        if K is None:
            K = ellipticity_constant(m)
        return cls(tuple(tuple(float(v) for v in row) for row in m), K, smoothness, name)

    @classmethod
    def identity(cls):
        return cls.constant(np.eye(2), K=1.0, name="identity")

    def __call__(self, points):
        """Evaluate at ``points`` (shape ``(n, 2)`` or ``(2,)``); returns ``(n, 2, 2)``."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        out = np.empty((len(pts), 2, 2))
        for i in range(2):
            for j in range(2):
                e = self.entries[i][j]
                value = e(x=x, y=y) if isinstance(e, Expression) else e(x, y)
                out[:, i, j] = np.broadcast_to(value, x.shape)
        return out[0] if single else out

    @property
    def is_constant(self):
        return all(isinstance(e, Expression) and e.is_constant for row in self.entries for e in row)

    def describe(self):
        return {
            "entries": [[getattr(e, "source", repr(e)) for e in row] for row in self.entries],
            "K": float(self.K),
            "smoothness": self.smoothness,
        }


def ellipticity_constant(matrix):
    """Smallest K with sigma xi.xi >= |xi|^2/K and sigma^-1 xi.xi >= |xi|^2/K."""
    m = np.asarray(matrix, dtype=float)
    sym = 0.5 * (m + m.T)
    inv = np.linalg.inv(m)
    lo = min(np.linalg.eigvalsh(sym)[0], np.linalg.eigvalsh(0.5 * (inv + inv.T))[0])
    return max(1.0, 1.0 / lo)


def direction_grid(n=32):
    t = 2 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(t), np.sin(t)])


@dataclass
class EllipticityCertificate:
    min_form: float
    min_inverse_form: float
    worst_point: np.ndarray
    worst_inverse_point: np.ndarray
    threshold: float
    tol: float
    n_points: int
    n_directions: int

    @property
    def passed(self):
        return min(self.min_form, self.min_inverse_form) >= self.threshold - self.tol

    def to_dict(self):
        return {
            "passed": bool(self.passed),
            "min_form": self.min_form,
            "min_inverse_form": self.min_inverse_form,
            "threshold": self.threshold,
            "worst_point": [float(v) for v in self.worst_point],
            "worst_inverse_point": [float(v) for v in self.worst_inverse_point],
            "n_points": self.n_points,
            "n_directions": self.n_directions,
            "tol": self.tol,
        }


def check_ellipticity(sigma, points, directions=32, tol=1e-10):
    """Sample both quadratic forms of sigma over points x directions.

    Raises :class:`NonInvertibleSigma` if ``det sigma <= 0`` anywhere.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    xi = direction_grid(directions) if np.isscalar(directions) else np.asarray(directions, float)
    if len(xi) == 0:
        raise InputError("direction grid is empty")
    if np.any(np.hypot(pts[:, 0], pts[:, 1]) > 1 + 1e-9):
        raise InputError("ellipticity sample points must lie in the closed unit disk")
    S = sigma(pts)
    det = np.linalg.det(S)
    bad = np.flatnonzero(det <= 0)
    if bad.size:
        p = pts[bad[0]]
        raise NonInvertibleSigma(f"det sigma = {det[bad[0]]:.3e} <= 0 at ({p[0]:.6g}, {p[1]:.6g})")
    Sinv = np.linalg.inv(S)
    q = np.einsum("di,nij,dj->nd", xi, S, xi)
    qi = np.einsum("di,nij,dj->nd", xi, Sinv, xi)
    k, ki = np.unravel_index(q.argmin(), q.shape)[0], np.unravel_index(qi.argmin(), qi.shape)[0]
    return EllipticityCertificate(
        min_form=float(q.min()),
        min_inverse_form=float(qi.min()),
        worst_point=pts[k],
        worst_inverse_point=pts[ki],
        threshold=1.0 / sigma.K,
        tol=tol,
        n_points=len(pts),
        n_directions=len(xi),
    )


@dataclass
class AbForm:
    """sigma rewritten as div(A grad u) + b . grad u = 0 (times gamma)."""

    points: np.ndarray
    sigma_hat: np.ndarray
    sigma_check: np.ndarray
    gamma: np.ndarray
    A: np.ndarray
    b: np.ndarray


def _symmetric_parts(S):
    ST = np.swapaxes(S, -1, -2)
    return 0.5 * (S + ST), 0.5 * (S - ST)


def _gamma_and_check(sigma, pts):
    hat, check = _symmetric_parts(sigma(pts))
    return np.sqrt(np.linalg.det(hat)), check[:, 0, 1]


def _partial(fn, pts, axis, step):
    """d/dx_axis of fn at pts; central where the stencil stays in the disk, else one-sided."""
    e = np.zeros(2)
    e[axis] = step
    inside = lambda p: np.hypot(p[:, 0], p[:, 1]) <= 1 + 1e-12
    fwd, bwd = inside(pts + e), inside(pts - e)
    fp, f0, fm = fn(pts + e), fn(pts), fn(pts - e)
    out = (fp - fm) / (2 * step)
    only_bwd = bwd & ~fwd
    only_fwd = fwd & ~bwd
    out[only_bwd] = ((f0 - fm) / step)[only_bwd]
    out[only_fwd] = ((fp - f0) / step)[only_fwd]
    return out


def reduce_to_ab(sigma, points, step):
    """Split sigma into symmetric/skew parts and build the unit-determinant form.

    ``gamma = sqrt(det sigma_hat)``, ``A = sigma_hat / gamma`` and the drift

        b_j = (A_ij d_i gamma + d_i sigma_check_ij) / gamma

    is obtained from finite differences of spacing ``step``. This drift is
    what expanding ``div(gamma A grad u)`` produces; it reduces to
    ``d_i(gamma delta_ij + sigma_check_ij) / gamma`` when ``A`` is the identity.
    """
    if sigma.smoothness == "Hoelder":
        raise InsufficientSmoothness(
            "the A/b rewrite differentiates sigma; a Hoelder-tagged field has no derivatives"
        )
    if step <= 0:
        raise InputError("finite-difference step must be positive")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    hat, check = _symmetric_parts(sigma(pts))
    gamma = np.sqrt(np.linalg.det(hat))
    A = hat / gamma[:, None, None]

    g = lambda p: _gamma_and_check(sigma, p)[0]
    c = lambda p: _gamma_and_check(sigma, p)[1]
    grad_gamma = np.column_stack([_partial(g, pts, 0, step), _partial(g, pts, 1, step)])
    # sigma_check = [[0, c], [-c, 0]]: d_i check_i1 = -d_y c, d_i check_i2 = d_x c
    div_check = np.column_stack([-_partial(c, pts, 1, step), _partial(c, pts, 0, step)])
    b = (np.einsum("nij,ni->nj", A, grad_gamma) + div_check) / gamma[:, None]
    return AbForm(pts, hat, check, gamma, A, b)


@dataclass
class BeltramiPair:
    mu: np.ndarray
    nu: np.ndarray
    k_bound: float = field(init=False)

    def __post_init__(self):
        self.k_bound = float(np.max(np.abs(self.mu) + np.abs(self.nu))) if np.size(self.mu) else 0.0


def dilatations_from_matrices(S):
    """Complex dilatations (mu, nu) of matrices ``S`` with shape ``(..., 2, 2)``."""
    S = np.asarray(S, dtype=float)
    s11, s12, s21, s22 = S[..., 0, 0], S[..., 0, 1], S[..., 1, 0], S[..., 1, 1]
    det = s11 * s22 - s12 * s21
    denom = 1 + s11 + s22 + det
    mu = (s22 - s11 - 1j * (s12 + s21)) / denom
    nu = (1 - det + 1j * (s12 - s21)) / denom
    return mu, nu


def beltrami_dilatations(sigma, points):
    """mu, nu of ``sigma`` at ``points``; scalars for a single point."""
    return dilatations_from_matrices(sigma(points))


def beltrami_pair(sigma, points):
    return BeltramiPair(*beltrami_dilatations(sigma, np.atleast_2d(points)))


def second_dilatation(mu, nu, f_z, tol=1e-12):
    """mu + conj(f_z)/f_z * nu, undefined where f_z vanishes."""
    f_z = np.asarray(f_z, dtype=complex)
    if np.any(np.abs(f_z) < tol):
        raise VanishingDerivative(f"|f_z| < {tol:g}: critical point, second dilatation undefined")
    return mu + np.conj(f_z) / f_z * nu


def sigma_tilde(mu_tilde):
    """Symmetric unit-determinant matrix associated with a dilatation |mu| < 1."""
    m = np.asarray(mu_tilde, dtype=complex)
    a2 = np.abs(m) ** 2
    if np.any(a2 >= 1):
        raise DegenerateDilatation("|mu_tilde| >= 1 gives no elliptic matrix")
    d = 1 - a2
    off = -2 * m.imag / d
    out = np.empty(m.shape + (2, 2))
    out[..., 0, 0] = np.abs(1 - m) ** 2 / d
    out[..., 1, 1] = np.abs(1 + m) ** 2 / d
    out[..., 0, 1] = off
    out[..., 1, 0] = off
    return out
