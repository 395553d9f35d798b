"""Stream functions, the complex map f = u + iv and the Beltrami residual.

For a P1 solution u the vector field J sigma grad u is piecewise constant and
its circulation vanishes exactly around every interior vertex along the path
joining the edge midpoints of the incident triangles (this is the discrete
equation itself). The stream function is therefore integrated on the
edge-midpoint graph, where it is exactly closed up to the linear-solver
residual, and then averaged to vertices.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from .errors import NonClosedForm

J = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass
class StreamFunction:
    vertex_values: np.ndarray
    gradients: np.ndarray
    midpoint_values: np.ndarray
    base_vertex: int
    loop_residual: float
    field_scale: float
    n_loops: int = 0

    @property
    def relative_loop_residual(self):
        return self.loop_residual / self.field_scale if self.field_scale > 0 else 0.0


def _edge_structure(mesh):
    """Edge midpoints and the (nt, 3) triangle -> edge map; edge k is opposite vertex k."""
    tri = mesh.triangles
    pairs = np.stack([tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]], axis=1)  # opposite vertex k
    keys = np.sort(pairs, axis=2).reshape(-1, 2)
    edges, inverse = np.unique(keys, axis=0, return_inverse=True)
    tri_edges = inverse.reshape(-1, 3)
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    return edges, tri_edges, midpoints


def stream_function(sigma, u, mesh, base=None, tol=1e-6):
    """Integrate grad v = J sigma grad u, normalised so that v(base) = 0.

    ``base`` defaults to the boundary vertex at theta = 0. Raises
    :class:`NonClosedForm` when the worst circulation mismatch over the
    non-tree arcs exceeds ``tol`` times the field scale (max |sigma grad u|
    times the disk diameter); pass ``tol=None`` to skip the check.
    """
    base = int(mesh.boundary[0] if base is None else base)
    flux = np.einsum("tab,tb->ta", sigma(mesh.barycenters), u.gradients)
    g = flux @ J.T  # J sigma grad u per triangle

    edges, tri_edges, mid = _edge_structure(mesh)
    ne, nt = len(edges), mesh.n_triangles

    # arcs between the three midpoints of each triangle
    a = tri_edges[:, [0, 1, 2]].ravel()
    b = tri_edges[:, [1, 2, 0]].ravel()
    owner = np.repeat(np.arange(nt), 3)
    graph = sp.coo_matrix((np.ones(3 * nt), (a, b)), shape=(ne, ne)).tocsr()
    root = int(tri_edges[mesh.incident(base)[0], 0])
    order, pred = breadth_first_order(graph, root, directed=False, return_predecessors=True)

    # increment along the tree arc entering each node
    down, up = pred[b] == a, pred[a] == b
    child = np.concatenate([b[down], a[up]])
    parent = np.concatenate([a[down], b[up]])
    tri_in = np.concatenate([owner[down], owner[up]])
    inc = np.zeros(ne)
    inc[child] = np.einsum("ta,ta->t", g[tri_in], mid[child] - mid[parent])
    w = np.zeros(ne)
    pred_list, inc_list, w_list = pred.tolist(), inc.tolist(), w.tolist()
    for node in order[1:].tolist():
        w_list[node] = w_list[pred_list[node]] + inc_list[node]
    w = np.array(w_list)

    tree = down | up
    mismatch = np.abs(w[b] - w[a] - np.einsum("ta,ta->t", g[owner], mid[b] - mid[a]))
    loop_residual = float(mismatch[~tree].max()) if (~tree).any() else 0.0
    scale = 2.0 * float(np.linalg.norm(flux, axis=1).max())

    if tol is not None and loop_residual > tol * max(scale, 1e-300):
        raise NonClosedForm(
            f"circulation mismatch {loop_residual:.3e} exceeds {tol:g} x field scale {scale:.3e}; "
            "u is not a discrete solution for this sigma"
        )

    # Crouzeix-Raviart vertex values: v_T(p_k) = sum of incident midpoint values - opposite one
    we = w[tri_edges]
    corner = we.sum(axis=1, keepdims=True) - 2 * we
    area = mesh.areas
    num = np.bincount(mesh.triangles.ravel(), (corner * area[:, None]).ravel(), mesh.n_vertices)
    den = np.bincount(mesh.triangles.ravel(), np.repeat(area, 3), mesh.n_vertices)
    v = num / den
    shift = v[base]
    return StreamFunction(
        vertex_values=v - shift,
        gradients=g,
        midpoint_values=w - shift,
        base_vertex=base,
        loop_residual=loop_residual,
        field_scale=scale,
        n_loops=int((~tree).sum()),
    )


@dataclass
class ComplexMap:
    f: np.ndarray
    f_z: np.ndarray
    f_zbar: np.ndarray
    mesh: object = field(repr=False)


def wirtinger(grad_u, grad_v):
    """(f_z, f_zbar) of f = u + iv from real gradients of shape (..., 2)."""
    ux, uy = grad_u[..., 0], grad_u[..., 1]
    vx, vy = grad_v[..., 0], grad_v[..., 1]
    f_z = 0.5 * ((ux + vy) + 1j * (vx - uy))
    f_zbar = 0.5 * ((ux - vy) + 1j * (vx + uy))
    return f_z, f_zbar


def complex_map(u, v, mesh):
    f_z, f_zbar = wirtinger(u.gradients, v.gradients)
    return ComplexMap(u.vertex_values + 1j * v.vertex_values, f_z, f_zbar, mesh)


def beltrami_residual(fmap, pair, mesh=None):
    """Per-triangle |f_zbar - mu f_z - nu conj(f_z)| and its maximum."""
    r = np.abs(fmap.f_zbar - pair.mu * fmap.f_z - pair.nu * np.conj(fmap.f_z))
    return r, float(r.max())
