"""Certify or refute global invertibility of sigma-harmonic mappings of the unit disk.

The typical pipeline::

    sigma = SigmaField([["1", "0"], ["0", "1"]])
    phi = BoundaryMap.from_expressions("2*cos(theta)", "sin(theta)")
    mesh = build_disk_mesh(256)
    report = certify_main(sigma, phi, mesh)
"""

from .certify import (
    BOUNDARY_DEGENERATE,
    DIFFEOMORPHISM,
    FOLD_DETECTED,
    INCONCLUSIVE,
    CertificateReport,
    Tolerances,
    certify_main,
    certify_nonconvex,
    collect_evidence,
    injectivity_oracle,
    interior_fold_scan,
)
from .coeff import (
    SigmaField,
    beltrami_dilatations,
    beltrami_pair,
    check_ellipticity,
    reduce_to_ab,
    second_dilatation,
    sigma_tilde,
)
from .conjugate import beltrami_residual, complex_map, stream_function
from .errors import CertifyError, InputError
from .estimator import SigmaHarmonicMap
from .expressions import Expression
from .geometry import (
    BoundaryMap,
    DiskMesh,
    build_disk_mesh,
    convex_decompose,
    preimage_arcs,
    validate_boundary_map,
)
from .scenario import gallery_scenario, list_gallery, run_scenario
from .solver import assemble, solve_dirichlet, solve_mapping
from .topology import alpha_sweep, critical_count, homotopy_check, verify_m_plus_one, winding_number, xi_field_count

__version__ = "0.1.0"

__all__ = [
    "BOUNDARY_DEGENERATE",
    "DIFFEOMORPHISM",
    "FOLD_DETECTED",
    "INCONCLUSIVE",
    "BoundaryMap",
    "CertificateReport",
    "CertifyError",
    "DiskMesh",
    "Expression",
    "InputError",
    "SigmaField",
    "SigmaHarmonicMap",
    "Tolerances",
    "alpha_sweep",
    "assemble",
    "beltrami_dilatations",
    "beltrami_pair",
    "beltrami_residual",
    "build_disk_mesh",
    "certify_main",
    "certify_nonconvex",
    "check_ellipticity",
    "collect_evidence",
    "complex_map",
    "convex_decompose",
    "critical_count",
    "gallery_scenario",
    "homotopy_check",
    "injectivity_oracle",
    "interior_fold_scan",
    "list_gallery",
    "preimage_arcs",
    "reduce_to_ab",
    "run_scenario",
    "second_dilatation",
    "sigma_tilde",
    "solve_dirichlet",
    "solve_mapping",
    "stream_function",
    "validate_boundary_map",
    "verify_m_plus_one",
    "winding_number",
    "xi_field_count",
]
