import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semispec.errors import AmbiguousMultiplicityError, EllipticityError, SymbolError
from semispec.symbols import (PolynomialSymbol, QuadraticSymbol, check_elliptic, closed_form_spectrum,
                              hamilton_map, load_symbol, poisson_bracket_nonnormality, quadratic_part,
                              schrodinger_symbol, sigma, symplectic_matrix)
from semispec.verify import random_doubly_characteristic

P = PolynomialSymbol
x = P.variable(1, 0)
xi = P.variable(1, 1)


def random_elliptic(seed: int, d: int) -> QuadraticSymbol:
    """e^{i theta}(A + i t B) with A positive definite, so Re(e^{-i theta} q) > 0."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((2 * d, 2 * d))
    A = G @ G.T + 0.5 * np.eye(2 * d)
    B = rng.standard_normal((2 * d, 2 * d))
    theta = rng.uniform(-math.pi, math.pi)
    return QuadraticSymbol(d, np.exp(1j * theta) * (A + 1j * rng.uniform(0, 3) * (B + B.T)))


# ----------------------------------------------------------------------------
# polynomial symbols


def test_zero_coefficients_dropped():
    p = P.from_terms(1, [((2,), (0,), 1.0), ((2,), (0,), -1.0), ((0,), (2,), 2.0)])
    assert list(p.terms) == [((0,), (2,))]
    assert p.max_degree == 2


def test_arithmetic_and_evaluation():
    p = xi ** 2 + 1j * x ** 2 + 0.1 * x ** 3
    X = np.array([[0.3, -1.2], [2.0, 0.5]])
    ref = X[:, 1] ** 2 + 1j * X[:, 0] ** 2 + 0.1 * X[:, 0] ** 3
    assert np.allclose(p(X), ref, rtol=1e-15)
    assert p.is_doubly_characteristic and not p.is_real


def test_json_roundtrip_and_digest(tmp_path):
    p = xi ** 2 + 1j * x ** 2 + 0.1 * x ** 3
    assert P.from_json(p.to_json()) == p
    path = tmp_path / "p.json"
    path.write_text(p.to_json())
    assert load_symbol(path) == p
    assert load_symbol(json.loads(p.to_json())).digest() == p.digest()
    with pytest.raises(SymbolError):
        P.from_dict({"d": 1, "terms": [{"alpha": [1]}]})


def test_quadratic_symbol_matches_expansion():
    rng = np.random.default_rng(3)
    for d in (1, 2, 3):
        q = random_elliptic(int(rng.integers(1000)), d)
        assert np.array_equal(q.Q, q.Q.T)
        X = rng.standard_normal((20, 2 * d))
        assert np.allclose(q.evaluate(X), q.to_polynomial()(X), rtol=1e-12, atol=1e-12)


# ----------------------------------------------------------------------------
# Hamilton map


def test_hamilton_map_harmonic():
    F = hamilton_map(QuadraticSymbol.harmonic(1))
    vals = sorted(F.eigen_data, key=lambda t: t[0].imag)
    assert np.allclose([v for v, _ in vals], [-1j, 1j], atol=1e-14)
    assert [r for _, r in vals] == [1, 1]


def test_hamilton_map_davies():
    F = hamilton_map(QuadraticSymbol.davies())
    got = sorted((v for v, _ in F.eigen_data), key=lambda z: z.imag)
    assert np.allclose(got, [cmath.exp(-1j * math.pi / 4), cmath.exp(3j * math.pi / 4)], atol=1e-14)
    assert len(F.positive_half) == 1
    assert abs(F.positive_half[0][0] - cmath.exp(3j * math.pi / 4)) < 1e-14


def test_hamilton_map_zero_form():
    F = hamilton_map(QuadraticSymbol(1, np.zeros((2, 2))))
    assert not F.F.any()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 3))
def test_hamilton_map_defining_relations(seed, d):
    q = random_elliptic(seed, d)
    F = hamilton_map(q).F
    rng = np.random.default_rng(seed + 1)
    X, Y = rng.standard_normal((2, 2 * d))
    assert abs(sigma(X, F @ X) - q.evaluate(X)) <= 1e-12 * max(1.0, abs(q.evaluate(X)))
    lhs, rhs = sigma(X, F @ Y), -sigma(F @ X, Y)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 3))
def test_eigenvalue_pairing(seed, d):
    q = random_elliptic(seed, d)
    try:
        F = hamilton_map(q)
    except AmbiguousMultiplicityError:
        return
    vals = np.array([v for v, _ in F.eigen_data])
    assert sum(r for _, r in F.eigen_data) == 2 * d
    for lam, r in F.eigen_data:
        k = int(np.argmin(np.abs(vals + lam)))
        assert abs(vals[k] + lam) <= 1e-10 * abs(lam)
        assert F.eigen_data[k][1] == r


def test_symplectic_form_convention():
    J = symplectic_matrix(1)
    X, Y = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    # sigma((x, xi), (y, eta)) = xi y - eta x
    assert sigma(X, Y) == -1.0 and J.shape == (2, 2)


# ----------------------------------------------------------------------------
# ellipticity and brackets


def test_elliptic_harmonic():
    rep = check_elliptic(QuadraticSymbol.harmonic(1))
    assert rep.elliptic and abs(rep.min_modulus_on_sphere - 1) < 1e-9
    assert abs(rep.halfplane_angle) < 1e-12


def test_elliptic_davies_angle():
    rep = check_elliptic(QuadraticSymbol.davies())
    assert rep.elliptic
    rot = (np.exp(1j * rep.halfplane_angle) * QuadraticSymbol.davies().Q).real
    assert np.linalg.eigvalsh(rot)[0] > 0
    # the symmetric choice -pi/4 is within the 720-angle scan
    assert abs(rep.halfplane_angle + math.pi / 4) < 2 * math.pi / 720 + 1e-12


def test_not_elliptic():
    rep = check_elliptic(QuadraticSymbol(1, np.diag([1.0, -1.0])))
    assert not rep.elliptic and rep.flag == "vanishes_on_sphere"


def test_range_whole_plane_flag():
    # (x + i xi)^2 has modulus 1 on the unit circle but takes every argument
    rep = check_elliptic(QuadraticSymbol(1, np.array([[1.0, 1j], [1j, -1.0]])))
    assert not rep.elliptic and rep.flag == "range_whole_plane"
    assert abs(rep.min_modulus_on_sphere - 1) < 1e-9


def test_samples_minimum():
    with pytest.raises(ValueError):
        check_elliptic(QuadraticSymbol.harmonic(1), samples=10)


def test_poisson_bracket():
    assert not poisson_bracket_nonnormality(QuadraticSymbol.harmonic(1)).nonnormal
    rep = poisson_bracket_nonnormality(QuadraticSymbol.davies())
    assert rep.nonnormal and rep.bracket == 4 * x * xi
    assert not poisson_bracket_nonnormality(1j * QuadraticSymbol.harmonic(1)).nonnormal


# ----------------------------------------------------------------------------
# lattice


def test_lattice_harmonic():
    lat = closed_form_spectrum(hamilton_map(QuadraticSymbol.harmonic(1)), 1.0, 10.0)
    assert np.allclose(lat.values, [1, 3, 5, 7, 9], rtol=1e-14)
    assert list(lat.multiplicities) == [1] * 5


def test_lattice_davies():
    lat = closed_form_spectrum(hamilton_map(QuadraticSymbol.davies()), 0.1, 1.0)
    ref = 0.1 * cmath.exp(1j * math.pi / 4) * (2 * np.arange(5) + 1)
    assert np.allclose(lat.values, ref, rtol=1e-13)


def test_lattice_anisotropic():
    lat = closed_form_spectrum(hamilton_map(QuadraticSymbol.harmonic(2, [1.0, 2.0])), 1.0, 6.0)
    assert np.allclose(lat.values, [3, 5], rtol=1e-14)
    assert list(lat.multiplicities) == [1, 1]


def test_lattice_isotropic_multiplicities():
    lat = closed_form_spectrum(hamilton_map(QuadraticSymbol.harmonic(2)), 1.0, 8.0)
    assert np.allclose(lat.values, [2, 4, 6, 8])
    assert list(lat.multiplicities) == [1, 2, 3, 4]
    lat3 = closed_form_spectrum(hamilton_map(QuadraticSymbol.harmonic(3)), 1.0, 9.0)
    # number of k in N^3 with |k| = n is C(n+2, 2)
    assert list(lat3.multiplicities) == [1, 3, 6, 10]


def test_lattice_refuses_real_eigenvalue():
    F = hamilton_map(QuadraticSymbol(1, np.diag([1.0, -1.0])))
    with pytest.raises(EllipticityError):
        closed_form_spectrum(F, 1.0, 5.0)


def test_lattice_brute_force_d2():
    q = QuadraticSymbol(2, np.diag([np.exp(0.6j), 1.0, 1.0, math.sqrt(2)]))
    F = hamilton_map(q)
    h, R = 0.2, 3.0
    mu = [h / 1j * lam for lam, _ in F.positive_half]
    brute = sorted(abs(v) for v in (mu[0] * (2 * a + 1) + mu[1] * (2 * b + 1)
                                     for a in range(40) for b in range(40)) if abs(v) <= R)
    lat = closed_form_spectrum(F, h, R)
    assert np.allclose(sorted(np.abs(lat.expanded())), brute, rtol=1e-12)


def test_lattice_csv_roundtrip(tmp_path):
    lat = closed_form_spectrum(hamilton_map(QuadraticSymbol.harmonic(2)), 1.0, 6.0)
    path = tmp_path / "lat.csv"
    lat.to_csv(path)
    assert lat.read_csv(path) == list(lat.entries)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-math.pi, math.pi), st.sampled_from(["davies", "harmonic2", "mixed"]))
def test_lattice_scalar_covariance(mod, arg, which):
    q = {"davies": QuadraticSymbol.davies(), "harmonic2": QuadraticSymbol.harmonic(2, [1.0, math.sqrt(3)]),
         "mixed": QuadraticSymbol(2, np.diag([np.exp(0.6j), 1.0, 1.0, math.sqrt(2)]))}[which]
    c = mod * cmath.exp(1j * arg)
    h, R = 0.3, 2.5
    a = closed_form_spectrum(hamilton_map(q), h, R).expanded() * c
    b = closed_form_spectrum(hamilton_map(c * q), h, abs(c) * R).expanded()
    assert len(a) == len(b)
    assert np.allclose(np.sort_complex(a), np.sort_complex(b), rtol=1e-10, atol=0)


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-4, 2.0))
def test_lattice_harmonic_all_h(h):
    lat = closed_form_spectrum(hamilton_map(QuadraticSymbol.harmonic(1)), h, 15 * h)
    assert np.allclose(lat.values, h * (2 * np.arange(8) + 1), rtol=1e-12)


# ----------------------------------------------------------------------------
# symbol manipulations


def test_quadratic_part_split():
    q, rem = quadratic_part(xi ** 2 + 1j * x ** 2 + x ** 3)
    assert q == QuadraticSymbol.davies()
    assert rem == x ** 3
    q2, rem2 = quadratic_part(xi ** 2 + x ** 2)
    assert rem2.is_zero


def test_quadratic_part_rejects_linear():
    with pytest.raises(SymbolError, match=r"alpha=\(1,\)"):
        quadratic_part(x + xi ** 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 3))
def test_quadratic_part_recombines(seed, d):
    p = random_doubly_characteristic(np.random.default_rng(seed), d)
    q, rem = quadratic_part(p)
    diff = p - (q.to_polynomial() + rem)
    assert max((abs(c) for c in diff.terms.values()), default=0.0) <= 1e-15 * max(
        abs(c) for c in p.terms.values())


def test_schrodinger_symbol():
    assert schrodinger_symbol(x ** 2, P(1, {})) == xi ** 2 + x ** 2
    assert schrodinger_symbol(x ** 2, x ** 3) == xi ** 2 + x ** 2 + 1j * x ** 3
    with pytest.raises(SymbolError):
        schrodinger_symbol(x ** 2, x)
    with pytest.raises(SymbolError):
        schrodinger_symbol(-(x ** 2), P(1, {}))


def test_symbol_document_rejects_unknown_term_keys():
    with pytest.raises(SymbolError, match="re/im"):
        load_symbol('{"d": 1, "terms": [{"alpha": [0], "beta": [2], "coeff": [1, 0]}]}')
    with pytest.raises(SymbolError):
        load_symbol('{"d": 1, "terms": [{"alpha": [0], "beta": [2]}]}')
