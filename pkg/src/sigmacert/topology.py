"""Winding numbers and argument-principle counts on the discrete boundary."""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundaryCritical,
    PreconditionViolated,
    UnderSampled,
    VanishingDerivative,
    VanishingGradient,
)

MAX_TURN = np.pi / 2


@dataclass
class WindingNumberResult:
    value: int
    total_turn: float
    min_speed: float
    residual: float
    max_step_turn: float


def _as_complex(samples):
    s = np.asarray(samples)
    if np.iscomplexobj(s):
        return s.reshape(-1)
    s = s.astype(float)
    if s.ndim != 2 or s.shape[1] != 2:
        raise ValueError("expected complex samples or an (n, 2) array of vectors")
    return s[:, 0] + 1j * s[:, 1]


def winding_number(samples, tol=1e-10, max_turn=MAX_TURN):
    """Turning number of a closed loop of nonzero vectors, sampled in order.

    Increments of the argument between neighbours are taken as
    ``angle(z[k+1] conj(z[k]))``, which is branch-safe while every step turns
    by less than ``max_turn``; larger steps raise :class:`UnderSampled`.
    """
    z = _as_complex(samples)
    speed = np.abs(z)
    k = int(np.argmin(speed))
    if speed[k] <= tol * max(float(speed.max()), 1e-300):
        raise VanishingDerivative(f"sample {k} has modulus {speed[k]:.3e}")
    steps = np.angle(np.roll(z, -1) * np.conj(z))
    worst = int(np.argmax(np.abs(steps)))
    if abs(steps[worst]) >= max_turn:
        raise UnderSampled(
            f"argument jumps by {steps[worst]:.3f} rad between samples {worst} and {(worst + 1) % len(z)}"
        )
    total = float(steps.sum())
    value = int(round(total / (2 * np.pi)))
    residual = abs(total / (2 * np.pi) - value)
    if residual >= 0.05:
        raise UnderSampled(f"accumulated turn {total:.4f} is not close to a multiple of 2 pi")
    return WindingNumberResult(value, total, float(speed[k]), residual, float(abs(steps[worst])))


def dz(gradients):
    """Complex derivative d/dz = (d_x - i d_y)/2 of a real function from its gradient."""
    g = np.asarray(gradients, dtype=float)
    return 0.5 * (g[..., 0] - 1j * g[..., 1])


def boundary_trace(mapping, alpha):
    """Gradient of u_alpha on the triangles along the boundary, in loop order."""
    return mapping.component(alpha)[mapping.mesh.boundary_trace_triangles]


def critical_count(trace, tol=1e-8):
    """Argument-principle count: winding of d_z u along the boundary loop.

    ``trace`` is either complex samples of d_z u or an (n, 2) array of
    gradients of u, ordered counterclockwise along the circle.
    """
    s = np.asarray(trace)
    w = s.reshape(-1) if np.iscomplexobj(s) else dz(s)
    mod = np.abs(w)
    k = int(np.argmin(mod))
    if mod[k] <= tol * max(float(mod.max()), 1e-300):
        raise BoundaryCritical(f"|d_z u| = {mod[k]:.3e} at boundary sample {k}; count undefined")
    return winding_number(w, tol=0.0).value


@dataclass
class AlphaSweep:
    alphas: np.ndarray
    counts: list
    flags: dict = field(default_factory=dict)

    @property
    def constant(self):
        return not self.flags and len(set(self.counts)) == 1

    @property
    def M(self):
        return self.counts[0] if self.constant else None

    def to_dict(self):
        return {
            "alphas": [float(a) for a in self.alphas],
            "counts": self.counts,
            "constant": self.constant,
            "M": self.M,
            "flags": {str(k): v for k, v in sorted(self.flags.items())},
        }


def alpha_sweep(mapping, n_alpha=16):
    """M_alpha on a uniform grid of [0, pi); failures are flagged per alpha."""
    alphas = np.pi * np.arange(n_alpha) / n_alpha
    counts, flags = [], {}
    for j, a in enumerate(alphas):
        try:
            counts.append(critical_count(boundary_trace(mapping, a)))
        except (BoundaryCritical, UnderSampled, VanishingDerivative) as exc:
            counts.append(None)
            flags[j] = f"{type(exc).__name__}: {exc}"
    return AlphaSweep(alphas, counts, flags)


def xi_field_count(mapping, tol=1e-8):
    """Independent count from the unit field xi = J grad u1 / |grad u1| on the boundary.

    xi is read as a complex number with the same convention as d_z (the
    vector (a, b) becomes a - ib); under that reading its winding equals the
    critical count whenever det DU > 0 along the boundary trace.
    """
    tri = mapping.mesh.boundary_trace_triangles
    g = mapping.u1.gradients[tri]
    norm = np.linalg.norm(g, axis=1)
    k = int(np.argmin(norm))
    if norm[k] <= tol * max(float(norm.max()), 1e-300):
        raise VanishingGradient(f"|grad u1| = {norm[k]:.3e} at boundary sample {k}")
    det = mapping.jacobians[tri]
    if np.any(det <= 0):
        bad = int(np.argmin(det))
        raise PreconditionViolated(
            f"det DU = {det[bad]:.3e} <= 0 on the boundary trace (sample {bad}); xi count not applicable"
        )
    xi = np.column_stack([-g[:, 1], g[:, 0]]) / norm[:, None]
    return winding_number(xi[:, 0] - 1j * xi[:, 1]).value


@dataclass
class HomotopyRecord:
    t_grid: np.ndarray
    min_per_t: np.ndarray
    min_boundary_det: float
    det0_min: float
    det0_ellipticity_ok: bool
    stream_consistency: float

    def to_dict(self):
        return {
            "t_grid": [float(t) for t in self.t_grid],
            "min_per_t": [float(m) for m in self.min_per_t],
            "min_boundary_det": self.min_boundary_det,
            "det0_min": self.det0_min,
            "det0_ellipticity_ok": self.det0_ellipticity_ok,
            "stream_consistency": self.stream_consistency,
        }


def homotopy_check(mapping, v1, sigma, n_t=11, rtol=1e-8):
    """det D(u1, (1-t) v1 + t u2) on the boundary for t on a uniform grid.

    At t = 0 the determinant is sigma grad u1 . grad u1; at t = 1 it is det DU.
    ``stream_consistency`` compares det(grad u1, grad v1) with
    sigma grad u1 . grad u1 on the boundary triangles.
    """
    mesh = mapping.mesh
    grad_u1 = mapping.boundary_gradients[:, 0, :]
    S = sigma(mesh.vertices[mesh.boundary])
    det0 = np.einsum("na,nab,nb->n", grad_u1, S, grad_u1)
    det1 = mapping.boundary_jacobian
    t = np.linspace(0.0, 1.0, n_t)
    dets = (1 - t)[:, None] * det0[None, :] + t[:, None] * det1[None, :]
    mins = dets.min(axis=1)

    lower = np.sum(grad_u1**2, axis=1) / sigma.K
    ok = bool(np.all(det0 >= lower * (1 - rtol) - rtol))

    tri = mesh.boundary_trace_triangles
    gu, gv = mapping.u1.gradients[tri], v1.gradients[tri]
    cross = gu[:, 0] * gv[:, 1] - gu[:, 1] * gv[:, 0]
    quad = np.einsum("na,nab,nb->n", gu, sigma(mesh.barycenters[tri]), gu)
    consistency = float(np.max(np.abs(cross - quad)) / max(float(np.abs(quad).max()), 1e-300))
    return HomotopyRecord(t, mins, float(mins.min()), float(det0.min()), ok, consistency)


@dataclass
class MPlusOneReport:
    wn_f: int
    wn_phi: int
    M: int
    identity_holds: bool
    wn_phi_is_one: bool

    def to_dict(self):
        return {
            "wn_f": self.wn_f,
            "wn_phi": self.wn_phi,
            "M": self.M,
            "identity_holds": self.identity_holds,
            "wn_phi_is_one": self.wn_phi_is_one,
        }


def verify_m_plus_one(fmap, sweep, phi):
    """Compare WN(f(dB)) with M + 1 and WN(Phi(dB)) with 1 as integers.

    The tangent of f along the circle is taken from consecutive vertex
    differences; the tangent of Phi from its derivative.
    """
    mesh = fmap.mesh
    fb = fmap.f[mesh.boundary]
    wn_f = winding_number(np.roll(fb, -1) - fb).value
    wn_phi = winding_number(phi.derivative(mesh.boundary_theta)).value
    M = sweep.M
    return MPlusOneReport(
        wn_f=wn_f,
        wn_phi=wn_phi,
        M=M,
        identity_holds=bool(M is not None and wn_f == M + 1),
        wn_phi_is_one=wn_phi == 1,
    )
