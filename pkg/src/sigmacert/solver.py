"""P1 finite elements for div(sigma grad u) = 0 on the disk with Dirichlet data."""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularSystem, SolverDiverged

logger = logging.getLogger(__name__)

ITERATIVE_THRESHOLD = 4096
RESIDUAL_RTOL = 1e-10


@dataclass
class StiffnessSystem:
    """Full stiffness matrix plus its interior/boundary blocks."""

    matrix: sp.csr_matrix
    interior: np.ndarray
    boundary: np.ndarray
    A_II: sp.csc_matrix = field(repr=False)
    A_IB: sp.csr_matrix = field(repr=False)

    @property
    def symmetry_defect(self):
        """||K - K^T||_F / ||K||_F of the full matrix.

        A constant skew part of sigma integrates to a boundary term, so it
        leaves the interior block symmetric and only shows up in rows and
        columns of boundary vertices; use :attr:`interior_symmetry_defect`
        for the block that is actually solved.
        """
        return _defect(self.matrix)

    @property
    def interior_symmetry_defect(self):
        return _defect(self.A_II)

    def lift(self, boundary_values):
        """Right-hand side of the interior system for given boundary values."""
        return -(self.A_IB @ boundary_values)


def _defect(K):
    return float(spla.norm(K - K.T) / spla.norm(K))


def assemble(sigma, mesh):
    """Assemble ``K_ij = sum_T |T| sigma(b_T) grad phi_j . grad phi_i``.

    sigma is sampled once per triangle at the barycenter, which is exact for
    constant coefficients since P1 gradients are piecewise constant.
    """
    S = sigma(mesh.barycenters)
    G = mesh.basis_gradients
    local = mesh.areas[:, None, None] * np.einsum("tia,tab,tjb->tij", G, S, G)
    tri = mesh.triangles
    rows = np.broadcast_to(tri[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(tri[:, None, :], local.shape).ravel()
    n = mesh.n_vertices
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()

    is_boundary = np.zeros(n, dtype=bool)
    is_boundary[mesh.boundary] = True
    interior = np.flatnonzero(~is_boundary)
    return StiffnessSystem(
        matrix=K,
        interior=interior,
        boundary=mesh.boundary,
        A_II=K[interior][:, interior].tocsc(),
        A_IB=K[interior][:, mesh.boundary].tocsr(),
    )


class _Factorized:
    """Reusable solver for one interior matrix."""

    def __init__(self, system, method):
        self.system = system
        self.method = method
        A = system.A_II
        if method == "direct":
            try:
                self._lu = spla.splu(A)
            except RuntimeError as exc:
                raise SingularSystem(f"sparse LU failed: {exc}") from None
        elif method == "bicgstab":
            try:
                ilu = spla.spilu(A, drop_tol=1e-5, fill_factor=20)
            except RuntimeError as exc:
                raise SingularSystem(f"incomplete LU failed: {exc}") from None
            self._M = spla.LinearOperator(A.shape, ilu.solve)
        else:
            raise ValueError(f"unknown solver method {method!r}")

    def solve(self, rhs):
        A = self.system.A_II
        bnorm = float(np.linalg.norm(rhs))
        iterations = None
        if bnorm == 0.0:
            return np.zeros_like(rhs), 0.0, 0
        if self.method == "direct":
            x = self._lu.solve(rhs)
        else:
            count = [0]

            def cb(_):
                count[0] += 1

            x, info = spla.bicgstab(A, rhs, M=self._M, rtol=1e-13, atol=0.0, maxiter=2000, callback=cb)
            iterations = count[0]
            if info != 0:
                res = float(np.linalg.norm(A @ x - rhs)) / bnorm
                raise SolverDiverged(
                    f"BiCGSTAB stopped with info={info} after {iterations} iterations, "
                    f"relative residual {res:.3e}",
                    iterations=iterations,
                    residual=res,
                )
        if not np.all(np.isfinite(x)):
            raise SingularSystem("solution contains non-finite values")
        res = float(np.linalg.norm(A @ x - rhs)) / bnorm
        if res > RESIDUAL_RTOL:
            raise SolverDiverged(
                f"relative residual {res:.3e} exceeds {RESIDUAL_RTOL:g}", iterations=iterations, residual=res
            )
        return x, res, iterations


def factorize(system, mesh, method="auto"):
    """Direct sparse LU below ``ITERATIVE_THRESHOLD`` boundary vertices, else ILU-BiCGSTAB.

    With ``method="auto"`` a failed or out-of-memory LU falls back to BiCGSTAB.
    """
    if method != "auto":
        return _Factorized(system, method)
    if mesh.n_boundary >= ITERATIVE_THRESHOLD:
        return _Factorized(system, "bicgstab")
    try:
        return _Factorized(system, "direct")
    except (SingularSystem, MemoryError) as exc:
        logger.warning("direct factorisation failed (%s); falling back to BiCGSTAB", exc)
        return _Factorized(system, "bicgstab")


@dataclass
class ScalarField:
    vertex_values: np.ndarray
    gradients: np.ndarray
    dirichlet_trace: np.ndarray
    residual: float = 0.0
    method: str = "direct"
    iterations: int = None

    def bounds_defect(self, tol=1e-10):
        """How far the interior values stray outside the range of the boundary data."""
        lo, hi = self.dirichlet_trace.min(), self.dirichlet_trace.max()
        scale = max(hi - lo, 1.0)
        v = self.vertex_values
        return float(max(lo - v.min(), v.max() - hi, 0.0) / scale)


def triangle_gradients(mesh, vertex_values):
    """Constant gradient of the P1 interpolant on every triangle, shape (nt, 2)."""
    return np.einsum("tk,tka->ta", vertex_values[mesh.triangles], mesh.basis_gradients)


def _boundary_values(g, mesh):
    if callable(g):
        return np.asarray(g(mesh.boundary_theta), dtype=float).reshape(-1)
    values = np.asarray(g, dtype=float).reshape(-1)
    if values.shape != (mesh.n_boundary,):
        raise ValueError(f"expected {mesh.n_boundary} boundary values, got {values.shape}")
    return values


def _solve_with(solver, mesh, boundary_values):
    system = solver.system
    u = np.empty(mesh.n_vertices)
    u[system.boundary] = boundary_values
    x, res, its = solver.solve(system.lift(boundary_values))
    u[system.interior] = x
    return ScalarField(u, triangle_gradients(mesh, u), boundary_values.copy(), res, solver.method, its)


def solve_dirichlet(sigma, mesh, g, system=None, method="auto"):
    """Solve div(sigma grad u) = 0 with u = g(theta) on the circle.

    ``g`` is a callable of the boundary angle or an array of boundary values
    in loop order.
    """
    system = system or assemble(sigma, mesh)
    return _solve_with(factorize(system, mesh, method), mesh, _boundary_values(g, mesh))


@dataclass
class DiscreteMapping:
    """U = (u1, u2) on a mesh, with per-triangle and boundary Jacobians."""

    u1: ScalarField
    u2: ScalarField
    jacobians: np.ndarray
    boundary_jacobian: np.ndarray
    boundary_gradients: np.ndarray
    boundary_confidence: np.ndarray
    mesh: object = field(repr=False)
    sigma: object = field(repr=False)
    phi: object = field(repr=False)

    def component(self, alpha):
        """Per-triangle gradients of u_alpha = cos(alpha) u1 + sin(alpha) u2."""
        return np.cos(alpha) * self.u1.gradients + np.sin(alpha) * self.u2.gradients

    def images(self):
        return np.column_stack([self.u1.vertex_values, self.u2.vertex_values])

    def __call__(self, points):
        """Evaluate the P1 interpolant of U at points of the disk (NaN outside)."""
        tri, bary = self.mesh.locate(points)
        vals = self.images()[self.mesh.triangles[np.maximum(tri, 0)]]
        out = np.einsum("nk,nka->na", bary, vals)
        out[tri < 0] = np.nan
        return out


def jacobian_determinants(grad1, grad2):
    return grad1[..., 0] * grad2[..., 1] - grad1[..., 1] * grad2[..., 0]


def boundary_jacobian(mapping_or_fields, mesh, phi=None):
    """det DU at each boundary vertex from exact tangential and recovered normal data.

    The tangential derivative is Phi'(theta) (the circle is parametrised by
    arc length); the normal derivative is the area-weighted mean of
    grad u . n over the triangles incident to the vertex. Returns
    ``(det, gradients, confident)`` where ``gradients[k]`` is the recovered
    2x2 DU (rows u1, u2) and ``confident[k]`` is False when incident
    normal derivatives differ from their mean by more than 50%.
    """
    if isinstance(mapping_or_fields, DiscreteMapping):
        m = mapping_or_fields
        grads = (m.u1.gradients, m.u2.gradients)
        phi = m.phi if phi is None else phi
    else:
        grads = tuple(f.gradients for f in mapping_or_fields)
    theta = mesh.boundary_theta
    n = np.column_stack([np.cos(theta), np.sin(theta)])
    t = np.column_stack([-np.sin(theta), np.cos(theta)])
    dt = phi.derivative(theta)  # (nb, 2): d/dtheta of (phi1, phi2)

    indptr, tri_of = mesh.vertex_triangles
    dn = np.zeros((mesh.n_boundary, 2))
    confident = np.ones(mesh.n_boundary, dtype=bool)
    areas = mesh.areas
    for k, v in enumerate(mesh.boundary):
        tris = tri_of[indptr[v] : indptr[v + 1]]
        w = areas[tris] / areas[tris].sum()
        vals = np.column_stack([grads[0][tris] @ n[k], grads[1][tris] @ n[k]])
        mean = w @ vals
        dn[k] = mean
        spread = np.max(np.linalg.norm(vals - mean, axis=1))
        if spread > 0.5 * np.linalg.norm(mean):
            confident[k] = False

    det = dn[:, 0] * dt[:, 1] - dn[:, 1] * dt[:, 0]
    # grad u_i = (d_n u_i) n + (d_t u_i) t
    DU = dn[:, :, None] * n[:, None, :] + dt[:, :, None] * t[:, None, :]
    return det, DU, confident


def solve_mapping(sigma, mesh, phi, method="auto"):
    """Solve both Dirichlet problems on one factorisation and collect Jacobians."""
    system = assemble(sigma, mesh)
    solver = factorize(system, mesh, method)
    data = phi(mesh.boundary_theta)
    u1 = _solve_with(solver, mesh, data[:, 0])
    u2 = _solve_with(solver, mesh, data[:, 1])
    logger.debug("solved mapping on %d vertices (%s)", mesh.n_vertices, solver.method)
    jac = jacobian_determinants(u1.gradients, u2.gradients)
    bdet, DU, conf = boundary_jacobian((u1, u2), mesh, phi)
    return DiscreteMapping(u1, u2, jac, bdet, DU, conf, mesh, sigma, phi)
