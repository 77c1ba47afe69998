import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semispec.fredholm import (DiscFunctionSample, FredholmData, determinant_suite, eig_count_exponent,
                               fredholm_det, inequality_suite, jensen_harnack_check, jensen_harnack_suite,
                               k1_decomposition, zero_bound_constants, mode_projection, random_trial_matrix,
                               trace_norm, trace_norm_via_gram)
from semispec.symbols import QuadraticSymbol

DAVIES = QuadraticSymbol.davies()


def test_trace_norm_examples():
    assert trace_norm(np.zeros((3, 3))) == 0.0
    assert trace_norm(np.diag([1.0, -2.0])) == pytest.approx(3.0, rel=1e-15)


@pytest.mark.parametrize("seed", range(3))
def test_trace_norm_two_paths(seed):
    rng = np.random.default_rng(seed)
    K = rng.standard_normal((50, 50)) + 1j * rng.standard_normal((50, 50))
    assert abs(trace_norm(K) - trace_norm_via_gram(K)) <= 1e-10 * trace_norm(K)


def test_det_examples():
    assert fredholm_det(np.zeros((4, 4))) == 1
    assert fredholm_det(np.eye(2)) == pytest.approx(4.0, rel=1e-15)


@pytest.mark.parametrize("seed", range(3))
def test_det_two_paths(seed):
    rng = np.random.default_rng(seed)
    K = (rng.standard_normal((30, 30)) + 1j * rng.standard_normal((30, 30))) / 10
    direct = np.linalg.det(np.eye(30) + K)
    assert abs(fredholm_det(K) - direct) <= 1e-9 * abs(direct)


def test_fredholm_data_invariants():
    rng = np.random.default_rng(5)
    fd = FredholmData.from_matrix(rng.standard_normal((12, 12)) * 0.3)
    assert np.all(fd.singular_values >= 0) and np.all(np.diff(fd.singular_values) <= 0)
    assert abs(fd.determinant) <= math.exp(fd.trace_norm) * (1 + 1e-10)
    with pytest.raises(ValueError):
        fd.K[0, 0] = 1


def test_inequality_suite_scalar_case():
    rep = inequality_suite(np.array([[-0.5]]))
    legs = {l.name: l for l in rep.legs}
    assert rep.passed
    assert math.exp(legs["det_chain"].lhs) == pytest.approx(0.5)
    assert math.exp(legs["inverse_bound"].lhs) == pytest.approx(2.0)
    assert math.exp(legs["inverse_bound"].rhs) == pytest.approx(2 * math.exp(0.5))
    assert math.exp(legs["inverse_bound"].rhs) == pytest.approx(3.297, abs=5e-4)


def test_inequality_suite_zero_is_tight():
    rep = inequality_suite(np.zeros((3, 3)))
    assert rep.passed
    for leg in rep.legs:
        if leg.name != "product_rule":
            assert leg.margin == pytest.approx(0.0, abs=1e-15)
    assert all(r["pass"] for r in rep.to_records({"n": 3}))


def test_inequality_suite_skips_singular():
    rep = inequality_suite(np.diag([-1.0, 0.2]))
    skipped = [l.name for l in rep.legs if l.passed is None]
    assert skipped == ["inverse_bound", "product_rule"]
    assert rep.passed


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_weyl_product_inequality(seed):
    K = random_trial_matrix(np.random.default_rng(seed), max_dim=40)
    s = np.linalg.svd(K, compute_uv=False)
    lam = np.linalg.eigvals(K)
    assert np.sum(np.log(np.abs(1 + lam))) <= np.sum(np.log1p(s)) + 1e-10 * max(1, np.sum(np.log1p(s)))
    assert inequality_suite(K).passed


def test_determinant_suite_small():
    out = determinant_suite(trials=50, max_dim=60, seed=3)
    assert out.passed and out.max_det_rel_error < 1e-9
    again = determinant_suite(trials=50, max_dim=60, seed=3, threads=2)
    assert again.failures == out.failures and again.max_det_rel_error == out.max_det_rel_error


def test_mode_projection_rank():
    P = mode_projection(5, 2, 3)
    assert np.trace(P) == 3
    # the three lowest total-degree modes: (0,0), (0,1), (1,0)
    assert set(np.flatnonzero(np.diag(P))) == {0, 1, 5}


def test_k1_trivial_when_c1_zero():
    res = k1_decomposition(DAVIES, 0.1, 40, 5, 0.0, -0.05)
    assert not np.any(res.fredholm.K)
    assert res.residual == 0.0


def test_k1_reference_instance():
    res = k1_decomposition(DAVIES, 0.1, 200, 20, 5.0, -0.05)
    assert res.residual <= 1e-10 * res.resolvent_norm
    assert res.residual < 1e-8
    assert res.k2_relative_residual <= 1e-10
    assert inequality_suite(res.fredholm.K).passed


def test_k1_spectrum_clash():
    with pytest.raises(ValueError, match="spectrum"):
        k1_decomposition(QuadraticSymbol.harmonic(1), 1.0, 20, 2, 0.0, 3.0)


def test_count_reference_values():
    fit = eig_count_exponent(QuadraticSymbol.harmonic(1), 1.0, [0.01])
    assert fit.counts == [50] and math.isnan(fit.exponent)
    fit = eig_count_exponent(QuadraticSymbol.harmonic(1), 1.0, [1e-1, 1e-2, 1e-3, 1e-4])
    assert fit.exponent == pytest.approx(1.0, abs=0.01)
    with pytest.raises(ValueError):
        eig_count_exponent(QuadraticSymbol.harmonic(1), 0.5, [1.0, 0.1])


@pytest.mark.parametrize("q", [QuadraticSymbol.harmonic(2), QuadraticSymbol.harmonic(2, [1.0, math.sqrt(2)])])
def test_count_exponent_two_dimensions(q):
    fit = eig_count_exponent(q, 1.0, np.logspace(-0.5, -3.5, 7))
    assert abs(fit.exponent - 2) <= 0.1


def test_jensen_linear_example():
    s = DiscFunctionSample.from_coefficients([1, -2], 0.6, 0.8)
    assert s.lam == pytest.approx(math.log(3), rel=1e-10)
    rep = jensen_harnack_check(s)
    assert rep.count_r == 1
    assert rep.constants_used["C_count"] * s.lam == pytest.approx(math.log(3) / math.log(4 / 3), rel=1e-10)
    assert rep.constants_used["C_count"] * s.lam == pytest.approx(3.82, abs=5e-3)
    assert rep.count_bound_ok and rep.product_bound_ok


def test_jensen_constant_function():
    s = DiscFunctionSample.from_coefficients([1], 0.5, 0.75)
    rep = jensen_harnack_check(s)
    assert s.lam == 0 and rep.count_R == 0
    assert rep.count_bound_ok and rep.product_bound_ok


def test_disc_sample_validation():
    with pytest.raises(ValueError):
        DiscFunctionSample.from_coefficients([2, 1], 0.5, 0.75)
    with pytest.raises(ValueError):
        DiscFunctionSample.from_roots([0.0, 1.0], 0.5, 0.75)
    with pytest.raises(ValueError):
        DiscFunctionSample.from_roots([1.0], 0.8, 0.5)


def test_roots_and_coefficients_agree():
    roots = np.array([0.3 + 0.1j, -0.7, 1.5j])
    a = DiscFunctionSample.from_roots(roots, 0.5, 0.75)
    b = DiscFunctionSample.from_coefficients(a.coefficients, 0.5, 0.75)
    assert a.lam == pytest.approx(b.lam, rel=1e-9)
    assert np.sort_complex(b.zeros) == pytest.approx(np.sort_complex(roots), abs=1e-12)


def test_zero_bound_constants_chain():
    c = zero_bound_constants(0.5, 0.75)
    assert c["C_count"] == pytest.approx(1 / math.log(1.5))
    assert c["harnack"] == pytest.approx(2 * 1.25 / 0.25)
    assert c["C_prod"] == pytest.approx(c["C0"] * (c["harnack"] - 1))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(min_magnitude=0.05, max_magnitude=2.0), max_size=12),
       st.floats(0.2, 0.6), st.floats(0.05, 0.35))
def test_jensen_never_violated(roots, r, gap):
    R = min(r + gap, 0.95)
    rep = jensen_harnack_check(DiscFunctionSample.from_roots(roots, r, R))
    assert rep.count_bound_ok and rep.product_bound_ok


def test_jensen_suite_small_and_reproducible():
    a = jensen_harnack_suite(trials=40, seed=7)
    b = jensen_harnack_suite(trials=40, seed=7, threads=2)
    assert a.passed and b.passed
    assert (a.count_violations, a.product_violations) == (b.count_violations, b.product_violations)
