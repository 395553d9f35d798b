import numpy as np
import pytest

from sigmacert import (
    BOUNDARY_DEGENERATE,
    DIFFEOMORPHISM,
    FOLD_DETECTED,
    INCONCLUSIVE,
    SigmaField,
    certify_main,
    certify_nonconvex,
    convex_decompose,
    injectivity_oracle,
    interior_fold_scan,
)
from sigmacert.certify import _arcs

from conftest import CIRCLE, ELLIPSE, gallery_case


def test_identity_certificate(mesh256, identity_mapping):
    rep = certify_main(SigmaField.identity(), CIRCLE, mesh256, mapping=identity_mapping)
    assert rep.verdict == DIFFEOMORPHISM
    assert rep.min_boundary_det == pytest.approx(1.0, abs=1e-8)
    assert rep.topology["alpha_sweep"]["M"] == 0
    assert rep.degenerate_arcs == [] and rep.notes == []
    d = rep.to_dict()
    assert "mapping" not in d and d["interior_min_det"] == pytest.approx(1.0) and d["mesh_h"] == mesh256.h


def test_ellipse_main_and_vacuous_nonconvex(mesh256, ellipse_mapping):
    main = certify_main(SigmaField.identity(), ELLIPSE, mesh256, mapping=ellipse_mapping)
    nc = certify_nonconvex(SigmaField.identity(), ELLIPSE, mesh256, mapping=ellipse_mapping)
    assert main.verdict == nc.verdict == DIFFEOMORPHISM
    assert nc.n_checked == 0 and nc.nc_min_det is None
    assert any("void" in n for n in nc.notes)


def test_fold_scan_and_oracle_on_affine_maps(mesh256, identity_mapping, ellipse_mapping):
    for m, det in ((identity_mapping, 1.0), (ellipse_mapping, 2.0)):
        scan = interior_fold_scan(m)
        assert scan.triangles.size == 0 and scan.interior_min_det == pytest.approx(det)
        ev = injectivity_oracle(m, mesh256, n_probe=100, seed=3)
        assert ev.clean and ev.n_probe == 100 + mesh256.n_boundary


def test_strong_dent_is_refuted():
    sigma, phi, mesh, ev = gallery_case("choquet-strong")
    main = certify_main(sigma, phi, mesh, evidence=ev)
    nc = certify_nonconvex(sigma, phi, mesh, evidence=ev)
    for rep in (main, nc):
        assert rep.verdict == BOUNDARY_DEGENERATE
        # the negative arc sits under the dent, around theta = pi/2
        assert any(a < np.pi / 2 < b for a, b in rep.degenerate_arcs)
    assert nc.nc_min_det < 0
    assert ev.folds.triangles.size > 0
    assert ev.injectivity.has_witness


def test_mild_dent_and_hopf_pass_both_certificates():
    for name in ("choquet-mild", "dent-hopf"):
        sigma, phi, mesh, ev = gallery_case(name)
        assert certify_main(sigma, phi, mesh, evidence=ev).verdict == DIFFEOMORPHISM
        nc = certify_nonconvex(sigma, phi, mesh, evidence=ev)
        assert nc.verdict == DIFFEOMORPHISM and nc.n_checked > 0 and nc.nc_min_det > 0


def test_nonconvex_certificate_ignores_the_convex_part():
    # a threshold that only vertices over the convex part fail
    sigma, phi, mesh, ev = gallery_case("dent-hopf")
    bdet = ev.mapping.boundary_jacobian
    in_nc = convex_decompose(phi).in_nc(mesh.boundary_theta)
    assert bdet[~in_nc].min() < bdet[in_nc].min()
    tol = 0.5 * (bdet[~in_nc].min() + bdet[in_nc].min())
    assert certify_main(sigma, phi, mesh, tol=tol, evidence=ev).verdict == BOUNDARY_DEGENERATE
    assert certify_nonconvex(sigma, phi, mesh, tol=tol, evidence=ev).verdict == DIFFEOMORPHISM


def test_saddle_is_not_certified():
    sigma, phi, mesh, ev = gallery_case("saddle")
    rep = certify_main(sigma, phi, mesh, evidence=ev)
    assert rep.verdict in (INCONCLUSIVE, FOLD_DETECTED)
    assert rep.verdict != DIFFEOMORPHISM
    assert any("alpha-sweep" in n for n in rep.notes)
    # with the evidence gates removed only the boundary and interior checks remain
    loose = certify_main(sigma, phi, mesh, evidence=ev, require=())
    assert loose.verdict == (DIFFEOMORPHISM if ev.folds.triangles.size == 0 else rep.verdict)


def test_explicit_threshold(mesh256, identity_mapping):
    rep = certify_main(SigmaField.identity(), CIRCLE, mesh256, tol=2.0, mapping=identity_mapping)
    assert rep.verdict == BOUNDARY_DEGENERATE
    assert rep.degenerate_arcs == [[0.0, float(mesh256.boundary_theta[-1])]]


def test_arcs_wrap_around():
    theta = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    mask = np.array([1, 0, 0, 0, 0, 0, 1, 1], dtype=bool)
    arcs = _arcs(theta, mask)
    assert len(arcs) == 1 and arcs[0][0] == pytest.approx(theta[6])
