"""scikit-learn style front end.

:class:`SigmaHarmonicMap` learns the discrete mapping U from boundary data
and exposes it as a transformer of points in the disk::

    est = SigmaHarmonicMap(sigma=np.diag([1.0, 4.0]), n_boundary=256)
    est.fit(np.column_stack([theta, x, y]))
    est.certificate_.verdict           # "Diffeomorphism"
    est.transform([[0.2, 0.1]])        # U at a point
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .certify import Tolerances, certify_main, certify_nonconvex, collect_evidence
from .coeff import SigmaField
from .errors import InputError
from .geometry import BoundaryMap, build_disk_mesh


def _as_sigma(sigma):
    if sigma is None:
        return SigmaField.identity()
    if isinstance(sigma, SigmaField):
        return sigma
    m = np.asarray(sigma, dtype=float)
    if m.shape != (2, 2):
        raise InputError("expected a SigmaField or a constant 2x2 matrix", "sigma")
    return SigmaField.constant(m)


def _as_boundary_map(X):
    if isinstance(X, BoundaryMap):
        return X
    X = check_array(X, ensure_min_samples=8)
    if X.shape[1] != 3:
        raise ValueError(f"expected boundary samples with columns (theta, x, y), got {X.shape[1]} columns")
    return BoundaryMap.from_points(X[:, 0], X[:, 1], X[:, 2])


class SigmaHarmonicMap(TransformerMixin, BaseEstimator):
    """Discrete sigma-harmonic extension of boundary data, with a certificate.

    Parameters
    ----------
    sigma : SigmaField, array-like of shape (2, 2) or None
        Coefficient field; None means the identity.
    n_boundary : int
        Boundary vertices of the disk mesh.
    grading : float
        Ring-radius grading exponent of the mesh.
    n_alpha : int
        Size of the alpha grid for critical-point counts.
    check : {"main", "nonconvex", "all"}
        Certificate(s) issued by :meth:`fit`.
    n_probe : int
        Random probes for the injectivity oracle.
    seed : int
        Seed of the probe sampler.
    tolerances : Tolerances or None

    Attributes
    ----------
    boundary_map_ : BoundaryMap
    mesh_ : DiskMesh
    mapping_ : DiscreteMapping
    stream_ : StreamFunction or None
    certificates_ : dict
        ``{"main": CertificateReport, ...}`` for the requested checks.
    certificate_ : CertificateReport
        The main certificate if requested, else the non-convex one.
    verdict_ : str
    """

    def __init__(
        self,
        sigma=None,
        n_boundary=256,
        grading=1.0,
        n_alpha=16,
        check="main",
        n_probe=200,
        seed=0,
        tolerances=None,
    ):
        self.sigma = sigma
        self.n_boundary = n_boundary
        self.grading = grading
        self.n_alpha = n_alpha
        self.check = check
        self.n_probe = n_probe
        self.seed = seed
        self.tolerances = tolerances

    def fit(self, X, y=None):
        """Solve for U with boundary data X.

        Parameters
        ----------
        X : BoundaryMap or array-like of shape (n_samples, 3)
            Boundary map, or samples ``(theta, x, y)`` fitted by a periodic
            cubic spline.
        y : ignored
        """
        if self.check not in ("main", "nonconvex", "all"):
            raise InputError(f"unknown check {self.check!r}", "check")
        sigma = _as_sigma(self.sigma)
        phi = _as_boundary_map(X)
        tol = self.tolerances or Tolerances()
        mesh = build_disk_mesh(int(self.n_boundary), self.grading)
        ev = collect_evidence(
            sigma, phi, mesh, n_alpha=self.n_alpha, n_probe=self.n_probe, seed=self.seed, tolerances=tol
        )
        kinds = ("main", "nonconvex") if self.check == "all" else (self.check,)
        self.certificates_ = {}
        for kind in kinds:
            fn = certify_main if kind == "main" else certify_nonconvex
            self.certificates_[kind] = fn(sigma, phi, mesh, evidence=ev)

        self.sigma_ = sigma
        self.boundary_map_ = phi
        self.mesh_ = mesh
        self.mapping_ = ev.mapping
        self.stream_ = ev.stream
        self.certificate_ = self.certificates_.get("main") or self.certificates_["nonconvex"]
        self.verdict_ = self.certificate_.verdict
        self.n_features_in_ = 2
        return self

    def _points(self, X):
        check_is_fitted(self, "mapping_")
        X = check_array(X)
        if X.shape[1] != 2:
            raise ValueError(f"expected points with 2 columns, got {X.shape[1]}")
        return X

    def transform(self, X):
        """U at points of the closed disk; rows outside the disk are NaN."""
        X = self._points(X)
        return self.mapping_(X)

    def jacobian(self, X):
        """det DU of the triangle containing each point (NaN outside the disk)."""
        X = self._points(X)
        tri, _ = self.mesh_.locate(X)
        out = self.mapping_.jacobians[np.maximum(tri, 0)].astype(float)
        out[tri < 0] = np.nan
        return out

    def predict(self, X):
        """True where U is orientation preserving (det DU > 0) at the point."""
        return np.nan_to_num(self.jacobian(X), nan=0.0) > 0
