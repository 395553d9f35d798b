import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sigmacert import (
    SigmaField,
    beltrami_dilatations,
    beltrami_pair,
    check_ellipticity,
    reduce_to_ab,
    second_dilatation,
    sigma_tilde,
)
from sigmacert.coeff import dilatations_from_matrices, ellipticity_constant
from sigmacert.errors import (
    DegenerateDilatation,
    InputError,
    InsufficientSmoothness,
    NonInvertibleSigma,
    VanishingDerivative,
)


def disk_points(n, seed=0):
    rng = np.random.default_rng(seed)
    r, t = np.sqrt(rng.random(n)) * 0.999, 2 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(t), r * np.sin(t)])


PTS = disk_points(500)


# --- SigmaField -------------------------------------------------------------


def test_field_evaluates_expressions_numbers_and_callables():
    s = SigmaField([["1 + x^2", 0.5], [lambda x, y: -0.5 + 0 * x, "2"]], K=5)
    out = s(np.array([[0.5, 0.0], [0.0, 0.2]]))
    assert out.shape == (2, 2, 2)
    assert np.allclose(out[0], [[1.25, 0.5], [-0.5, 2.0]])
    assert s(np.array([0.5, 0.0])).shape == (2, 2)


@pytest.mark.parametrize(
    "kwargs",
    [dict(entries=[["1"]]), dict(entries=[["1", "0"], ["0", "1"]], K=0.5), dict(entries=[["1", "0"], ["0", "1"]], smoothness="C2")],
)
def test_field_rejects_bad_declarations(kwargs):
    with pytest.raises(InputError):
        SigmaField(**kwargs)


# --- ellipticity ------------------------------------------------------------


def test_identity_is_elliptic_with_k_one():
    cert = check_ellipticity(SigmaField.identity(), PTS)
    assert cert.passed
    assert cert.min_form == pytest.approx(1.0) and cert.min_inverse_form == pytest.approx(1.0)


def test_diag_two_half_attains_the_bound():
    cert = check_ellipticity(SigmaField.constant(np.diag([2.0, 0.5]), K=2), PTS)
    assert cert.passed
    assert cert.min_form == pytest.approx(0.5)


def test_diag_four_one_fails_for_k_two():
    cert = check_ellipticity(SigmaField.constant(np.diag([4.0, 1.0]), K=2), PTS)
    assert not cert.passed
    assert cert.min_inverse_form == pytest.approx(0.25)


def test_singular_sigma_raises():
    s = SigmaField([["x", "0"], ["0", "1"]], K=10)
    with pytest.raises(NonInvertibleSigma):
        check_ellipticity(s, PTS)


def test_ellipticity_constant_of_matrices():
    assert ellipticity_constant(np.diag([1.0, 4.0])) == pytest.approx(4.0)
    assert ellipticity_constant(np.eye(2)) == 1.0
    # a skew part does not change the symmetric form of sigma, but does change the inverse
    k = ellipticity_constant([[1.0, 0.3], [-0.3, 1.0]])
    assert 1.0 < k < 1.1


# --- A/b reduction ----------------------------------------------------------


def test_ab_constant_nonsymmetric():
    ab = reduce_to_ab(SigmaField.constant([[2.0, 1.0], [0.0, 1.0]], K=3), PTS[:5], 1e-4)
    assert np.allclose(ab.sigma_hat, [[2.0, 0.5], [0.5, 1.0]])
    assert np.allclose(ab.sigma_check, [[0.0, 0.5], [-0.5, 0.0]])
    assert np.allclose(ab.b, 0.0, atol=1e-9)


def test_ab_diag_four_one():
    ab = reduce_to_ab(SigmaField.constant(np.diag([4.0, 1.0])), PTS[:5], 1e-4)
    assert np.allclose(ab.gamma, 2.0)
    assert np.allclose(ab.A, np.diag([2.0, 0.5]))
    assert np.allclose(np.linalg.det(ab.A), 1.0, atol=1e-14)


def test_ab_skew_drift():
    s = SigmaField([["1", "x"], ["-x", "1"]], K=3, smoothness="Lipschitz")
    ab = reduce_to_ab(s, PTS[:50] * 0.9, 1e-5)
    assert np.allclose(ab.b, [0.0, 1.0], atol=1e-8)


def test_ab_rejects_hoelder():
    s = SigmaField([["1 + x^2/2", "0"], ["0", "1 + x^2/2"]], K=1.5, smoothness="Hoelder")
    with pytest.raises(InsufficientSmoothness):
        reduce_to_ab(s, PTS, 1e-4)


def _symbolic_drift(entries):
    """Oracle: b such that div(sigma grad u) = gamma (div(A grad u) + b . grad u), by sympy."""
    x, y = sp.symbols("x y")
    S = sp.Matrix(entries)
    hat = (S + S.T) / 2
    gamma = sp.sqrt(hat.det())
    A = hat / gamma
    X = (x, y)
    # first-order coefficients of div(sigma grad u) minus those of gamma div(A grad u)
    b = [sp.simplify((sum(sp.diff(S[i, j], X[i]) for i in range(2)) - gamma * sum(sp.diff(A[i, j], X[i]) for i in range(2))) / gamma) for j in range(2)]
    return sp.lambdify((x, y), b, "numpy")


def test_ab_drift_matches_symbolic_expansion():
    # anisotropic, variable and skew all at once so that A != I
    x, y = sp.symbols("x y")
    entries = [[2 + x**2, sp.Rational(1, 5) * y + x * y / 2], [x * y / 2 - sp.Rational(1, 5) * y, 1 + y**2 / 3]]
    oracle = _symbolic_drift(entries)
    s = SigmaField([["2 + x^2", "0.2*y + x*y/2"], ["x*y/2 - 0.2*y", "1 + y^2/3"]], K=10, smoothness="Smooth")
    pts = PTS[:200] * 0.95
    ab = reduce_to_ab(s, pts, 1e-5)
    expected = np.column_stack([np.broadcast_to(v, len(pts)) for v in oracle(pts[:, 0], pts[:, 1])])
    assert np.allclose(ab.b, expected, atol=1e-7)


def test_ab_det_a_is_one_for_variable_field():
    s = SigmaField([["2 + sin(x)", "0.3*y"], ["0.3*y", "1 + x^2"]], K=10, smoothness="Lipschitz")
    ab = reduce_to_ab(s, PTS, 1e-4)
    assert np.max(np.abs(np.linalg.det(ab.A) - 1)) < 1e-12


# --- Beltrami dilatations ---------------------------------------------------


@pytest.mark.parametrize(
    "matrix, mu, nu",
    [(np.eye(2), 0.0, 0.0), (2 * np.eye(2), 0.0, -1 / 3), (np.diag([1.0, 4.0]), 0.3, -0.3)],
)
def test_dilatations_hand_values(matrix, mu, nu):
    m, n = beltrami_dilatations(SigmaField.constant(matrix), np.zeros((1, 2)))
    assert m[0] == pytest.approx(mu) and n[0] == pytest.approx(nu)


def test_pair_bound():
    pair = beltrami_pair(SigmaField.constant(np.diag([1.0, 4.0])), PTS)
    assert pair.k_bound == pytest.approx(0.6)


def test_second_dilatation():
    mu, nu = np.array([0.1]), np.array([0.2])
    assert second_dilatation(mu, np.zeros(1), np.array([1 + 2j])) == pytest.approx(mu)
    assert second_dilatation(mu, nu, np.array([3.0 + 0j]))[0] == pytest.approx(0.3)
    with pytest.raises(VanishingDerivative):
        second_dilatation(mu, nu, np.array([0.0 + 0j]))


def test_sigma_tilde_values():
    assert np.allclose(sigma_tilde(0.0), np.eye(2))
    r = 0.4
    assert np.allclose(sigma_tilde(r), np.diag([(1 - r) / (1 + r), (1 + r) / (1 - r)]))
    with pytest.raises(DegenerateDilatation):
        sigma_tilde(1.0)


@st.composite
def elliptic_matrices(draw):
    a = draw(st.floats(0.05, 20))
    c = draw(st.floats(0.05, 20))
    off = draw(st.floats(-1, 1)) * np.sqrt(a * c) * 0.99
    skew = draw(st.floats(-5, 5))
    return np.array([[a, off + skew], [off - skew, c]])


@settings(max_examples=200, deadline=None)
@given(elliptic_matrices())
def test_dilatations_are_strictly_contracting(m):
    mu, nu = dilatations_from_matrices(m)
    assert abs(mu) + abs(nu) < 1


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 0.999), st.floats(0, 2 * np.pi))
def test_sigma_tilde_has_unit_determinant(r, t):
    m = r * np.exp(1j * t)
    S = sigma_tilde(m)
    assert np.linalg.det(S) == pytest.approx(1.0, rel=1e-9)
    assert np.allclose(S, S.T)
    # and it round-trips: a symmetric unit-determinant matrix has nu = 0
    mu, nu = dilatations_from_matrices(S)
    assert abs(nu) < 1e-9 * max(1.0, np.abs(S).max())
    assert mu == pytest.approx(m, abs=1e-9 * max(1.0, np.abs(S).max()))


def test_sigma_tilde_determinant_symbolically():
    a, b = sp.symbols("a b", real=True)
    m = a + sp.I * b
    d = 1 - (a**2 + b**2)
    S = sp.Matrix([[sp.expand(sp.Abs(1 - m) ** 2) / d, -2 * b / d], [-2 * b / d, sp.expand(sp.Abs(1 + m) ** 2) / d]])
    assert sp.simplify(S.det() - 1) == 0
    num = sigma_tilde(0.3 - 0.2j)
    assert num[0, 1] == pytest.approx(float(S[0, 1].subs({a: 0.3, b: -0.2})))
