"""Runnable invariant suites, one per numerical module, with crash isolation."""
from __future__ import annotations

import math
import traceback

import numpy as np

from . import bargmann as bg
from . import fredholm as fr
from . import quantize as qz
from . import resolvent as rv
from . import symbols as sy
from .config import ExperimentConfig


def _check(name: str, passed, value=None, threshold=None, **extra) -> dict:
    out = {"name": name, "passed": bool(passed), "value": value, "threshold": threshold}
    out.update(extra)
    return out


def reference_symbols() -> dict:
    """Elliptic quadratic symbols used across the suites."""
    return {
        "harmonic_1d": sy.QuadraticSymbol.harmonic(1),
        "davies": sy.QuadraticSymbol.davies(),
        "rotated_harmonic": sy.QuadraticSymbol(1, np.exp(0.3j) * np.eye(2)),
        "harmonic_2d": sy.QuadraticSymbol.harmonic(2),
        "anisotropic_2d": sy.QuadraticSymbol.harmonic(2, [1.0, math.sqrt(2)]),
        "nonnormal_2d": sy.QuadraticSymbol(2, np.diag([np.exp(0.6j), 1.0, 1.0, math.sqrt(2)])),
    }


def random_doubly_characteristic(rng: np.random.Generator, d: int, max_degree: int = 4,
                                 n_terms: int = 6) -> sy.PolynomialSymbol:
    items = []
    for _ in range(n_terms):
        k = int(rng.integers(2, max_degree + 1))
        cuts = np.sort(rng.integers(0, k + 1, 2 * d - 1))
        parts = np.diff(np.concatenate([[0], cuts, [k]]))
        c = complex(rng.standard_normal(), rng.standard_normal())
        items.append((tuple(parts[:d]), tuple(parts[d:]), c))
    return sy.PolynomialSymbol.from_terms(d, items)


# ----------------------------------------------------------------------------
# symbol_core


def suite_symbols(cfg: ExperimentConfig) -> list:
    out = []
    q = sy.QuadraticSymbol.harmonic(1)
    F = sy.hamilton_map(q)
    worst = 0.0
    for h in (1.0, 0.5, 0.1, 0.01, 1e-3):
        lat = sy.closed_form_spectrum(F, h, 20 * h)
        ref = h * (2 * np.arange(10) + 1)
        worst = max(worst, float(np.max(np.abs(lat.values - ref) / ref)))
        worst = max(worst, float(np.any(lat.multiplicities != 1)))
    out.append(_check("harmonic_lattice", worst < 1e-12, worst, 1e-12))

    lat = sy.closed_form_spectrum(sy.hamilton_map(sy.QuadraticSymbol.harmonic(2)), 1.0, 8.0)
    mults = [int(m) for m in lat.multiplicities]
    out.append(_check("isotropic_multiplicities", mults == [1, 2, 3, 4], mults, [1, 2, 3, 4]))

    worst = 0.0
    for q in reference_symbols().values():
        Fq = sy.hamilton_map(q)
        vals = np.array([l for l, _ in Fq.eigen_data])
        for lam, r in Fq.eigen_data:
            k = int(np.argmin(np.abs(vals + lam)))
            worst = max(worst, abs(vals[k] + lam) / abs(lam) + (Fq.eigen_data[k][1] != r))
    out.append(_check("eigenvalue_pairing", worst < 1e-10, worst, 1e-10))

    c = 2.0 * np.exp(0.4j)
    worst = 0.0
    for q in reference_symbols().values():
        h, R = 0.3, 3.0
        a = sy.closed_form_spectrum(sy.hamilton_map(q), h, R)
        b = sy.closed_form_spectrum(sy.hamilton_map(c * q), h, abs(c) * R)
        ea, eb = a.expanded() * c, b.expanded()
        if len(ea) != len(eb):
            worst = math.inf
            break
        worst = max(worst, float(np.max(np.abs(np.sort_complex(ea) - np.sort_complex(eb)) / np.abs(eb))))
    out.append(_check("scalar_covariance", worst < 1e-10, worst, 1e-10))

    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(200):
        p = random_doubly_characteristic(rng, int(rng.integers(1, 3)))
        qp, rem = sy.quadratic_part(p)
        diff = p - (qp.to_polynomial() + rem)
        worst = max(worst, max((abs(v) for v in diff.terms.values()), default=0.0))
    out.append(_check("quadratic_part_roundtrip", worst < 1e-14, worst, 1e-14))
    return out


# ----------------------------------------------------------------------------
# quantize


def suite_quantize(cfg: ExperimentConfig) -> list:
    out = []
    worst = 0.0
    sizes = {1: (128, 4), 2: (16, 6)}
    for name, q in reference_symbols().items():
        N, count = sizes[q.d]
        for h in (1.0, 0.1, 0.05):
            m = qz.oracle_match(q, h, N, count, cfg.eig_tol)
            if not m.passed(cfg.eig_tol):
                worst = math.inf
            worst = max(worst, m.max_rel_error)
    out.append(_check("oracle_equivalence", worst < cfg.eig_tol, worst, cfg.eig_tol))

    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(20):
        p = random_doubly_characteristic(rng, 1)
        re = p.real_part
        M = qz.weyl_quantize(re, 0.2, 24).entries
        A = qz.weyl_quantize(1j * re, 0.2, 24).entries
        worst = max(worst, float(np.max(np.abs(M - M.conj().T))), float(np.max(np.abs(A + A.conj().T))))
    out.append(_check("hermiticity", worst < 1e-12, worst, 1e-12))

    worst = 0.0
    for q in reference_symbols().values():
        N = 40 if q.d == 1 else 8
        for h in (0.5, 0.1, 0.013):
            A = qz.weyl_quantize(q, h, N).entries
            B = h * qz.weyl_quantize(q, 1.0, N).entries
            worst = max(worst, float(np.max(np.abs(A - B))))
    out.append(_check("h_homogeneity", worst == 0.0, worst, 0.0))

    worst = 0.0
    for d in (1, 2):
        N = 10
        Xs, Ds = qz.ladder_matrices(1.0, N + 2, d)
        V = Xs + Ds
        cut = np.ix_(*[np.ravel_multi_index(np.indices((N,) * d).reshape(d, -1), (N + 2,) * d)] * 2)
        for i in range(2 * d):
            for j in range(i, 2 * d):
                e = [0] * (2 * d)
                e[i] += 1
                e[j] += 1
                mono = sy.PolynomialSymbol.monomial(d, e[:d], e[d:])
                ref = ((V[i] @ V[j] + V[j] @ V[i]) / 2)[cut]
                got = qz.weyl_quantize(mono, 1.0, N).entries
                worst = max(worst, float(np.max(np.abs(got - ref))))
    out.append(_check("degree2_anticommutator", worst < 1e-12, worst, 1e-12))
    return out


# ----------------------------------------------------------------------------
# resolvent_lab


def suite_resolvent(cfg: ExperimentConfig) -> list:
    out = []
    q = sy.QuadraticSymbol.harmonic(1)
    ps = rv.pseudospectrum_sweep(q, 1.0, rv.GridSpec(0.0, 4.0, -1.0, 1.0, 9, 5), 32, cfg.doubling_tol,
                                 threads=1)
    dist = np.min(np.abs(ps.z[..., None] - (2 * np.arange(40) + 1)), axis=-1)
    ok = ps.converged & np.isfinite(ps.values)
    dev = float(np.max(np.abs(ps.values[ok] * dist[ok] - 1)))
    out.append(_check("normal_exactness", dev < 0.01 and ok.any(), dev, 0.01))

    p = sy.QuadraticSymbol.davies()
    ps = rv.pseudospectrum_sweep(p, 0.1, rv.GridSpec(0.0, 1.0, -0.2, 0.8, 7, 7), 64, cfg.doubling_tol,
                                 threads=1)
    d = ps.distance_to_spectrum()
    fin = np.isfinite(ps.values)
    gap = float(np.min(ps.values[fin] - (1 / d[fin]) * (1 - 1e-9)))
    out.append(_check("lower_bound", gap >= 0, gap, 0.0))

    worst = 0.0
    for z0 in (2.0 + 1.0j, 0.5 + 2.5j, -1.0 + 0.3j):
        base = rv.resolvent_norm(qz.weyl_quantize(p, 1.0, 64), z0).value
        for h in (0.1, 0.01):
            v = rv.resolvent_norm(qz.weyl_quantize(p, h, 64), h * z0).value
            worst = max(worst, abs(h * v / base - 1))
    out.append(_check("scaling_consistency", worst < 1e-8, worst, 1e-8))

    fr_ = []
    for h in (1e-2, 1e-4, 1e-8):
        reg = rv.admissible_region(p, h, cfg.gamma, cfg.C_prime)
        fr_.append(rv.excluded_fraction(reg, seed=cfg.seed).fraction)
    mono = all(a >= b for a, b in zip(fr_, fr_[1:]))
    out.append(_check("excluded_fraction_monotone", mono, fr_))
    return out


# ----------------------------------------------------------------------------
# bounds_certify


def suite_bounds(cfg: ExperimentConfig, threads=None) -> list:
    out = []
    s = fr.determinant_suite(cfg.det_trials, seed=cfg.seed, threads=threads)
    out.append(_check("determinant_suite", s.passed, len(s.failures), 0, trials=s.trials,
                      max_det_rel_error=s.max_det_rel_error, min_margins=s.min_margins))

    k = fr.k1_decomposition(sy.QuadraticSymbol.davies(), 0.1, 200, 20, 5.0, -0.05)
    worst = max(k.residual, k.k2_residual)
    out.append(_check("k1_residual", worst < 1e-8 and k.relative_residual < 1e-10
                      and k.k2_relative_residual < 1e-10, worst, 1e-8,
                      relative=[k.relative_residual, k.k2_relative_residual]))

    worst = 0.0
    for q in reference_symbols().values():
        hl = np.logspace(-1, -4, 7) if q.d == 1 else np.logspace(-0.5, -3.5, 7)
        worst = max(worst, abs(fr.eig_count_exponent(q, 1.0, hl).exponent - q.d))
    out.append(_check("count_exponent", worst <= 0.1, worst, 0.1))

    js = fr.jensen_harnack_suite(cfg.zero_trials, seed=cfg.seed, threads=threads)
    out.append(_check("jensen_harnack_suite", js.passed,
                      len(js.count_violations) + len(js.product_violations), 0, trials=js.trials))
    return out


# ----------------------------------------------------------------------------
# bargmann_side


def suite_bargmann(cfg: ExperimentConfig) -> list:
    out = []
    worst = max(bg.unitarity_defect(h, 100, 10, cfg.seed, cfg.quad_base, cfg.quad_tol) for h in (1.0, 0.1))
    out.append(_check("unitarity", worst < 1e-6, worst, 1e-6))

    worst = 0.0
    for q in reference_symbols().values():
        worst = max(worst, bg.egorov_check(q, 0.1, 64 if q.d == 1 else 10))
    out.append(_check("egorov", worst < 1e-10, worst, 1e-10))

    c1, c2 = bg.schur_constant(bg.phi0_matrix(1)), bg.schur_constant(bg.phi0_matrix(2))
    out.append(_check("schur_constants", c1 == 2.5 and c2 == 6.25, [c1, c2], [2.5, 6.25]))

    rng = np.random.default_rng(cfg.seed)
    worst = bg.kernel_modulus_check(bg.phi0_matrix(1), seed=cfg.seed)
    for d in (1, 2):
        A = rng.standard_normal((2 * d, 2 * d))
        worst = max(worst, bg.kernel_modulus_check(A + A.T, seed=cfg.seed))
    out.append(_check("kernel_modulus", worst < 1e-10, worst, 1e-10))

    # every acceptance-side norm must settle under grid doubling; stable_integral raises otherwise
    p = sy.QuadraticSymbol.davies()
    for h in (0.2, 0.05, 0.01):
        bg.fbi_transform(bg.DEFAULT_PROBE, h).norm(cfg.quad_base, cfg.quad_tol)
        bg.weighted_graph_norm(np.ones(10) / math.sqrt(10), h, cfg.quad_base, cfg.quad_tol)
    st = bg.quant_mult_check(p, bg.RadialBump(1.0), [0.2, 0.1], base=cfg.quad_base, tol=cfg.quad_tol)
    out.append(_check("quadrature_doubling", True, [d["grid_size"] for d in st.detail]))
    return out


def cubic_test_symbol() -> sy.PolynomialSymbol:
    """xi^2 + i x^2 + 0.1 x^3."""
    return sy.QuadraticSymbol.davies().to_polynomial() + sy.PolynomialSymbol.monomial(1, (3,), (0,), 0.1)


def bargmann_studies(cfg: ExperimentConfig, p=None) -> list:
    """Slope and graph-norm studies on the transform side (d = 1)."""
    out = []
    q = sy.QuadraticSymbol.davies() if p is None else sy.as_quadratic(sy.quadratic_part(p)[0])
    st = bg.quant_mult_check(q, bg.RadialBump(1.0), [0.2, 0.1, 0.05, 0.025], base=cfg.quad_base,
                             tol=cfg.quad_tol)
    out.append(_check("quant_mult_slope", st.slope is not None and st.slope >= 0.9, st.slope, 0.9,
                      residuals=st.values))

    cp = p if p is not None and not sy.quadratic_part(p)[1].is_zero else cubic_test_symbol()
    cr = bg.cubic_remainder_check(cp, [0.05, 0.1, 0.2, 0.4], 1e-4)
    out.append(_check("cubic_remainder_slope", cr.slope is not None and cr.slope >= 2.7, cr.slope, 2.7,
                      ratios=cr.values))

    hl = [1.0, 0.1, 0.01]
    real = bg.graph_norm_ratio(q, hl, cfg.trials, cfg.seed)
    out.append(_check("graph_norm_spread_real", real.spread_variation < 0.1, real.spread_variation, 0.1,
                      stats=real.to_dict()))
    fbi = bg.fbi_graph_norm_check(q, hl, cfg.trials, cfg.seed, base=cfg.quad_base, tol=cfg.quad_tol)
    out.append(_check("graph_norm_spread_fbi", fbi.spread_variation < 0.1, fbi.spread_variation, 0.1,
                      stats=fbi.to_dict()))
    return out


SUITES = {
    "symbol_core": suite_symbols,
    "quantize": suite_quantize,
    "resolvent_lab": suite_resolvent,
    "bounds_certify": suite_bounds,
    "bargmann_side": suite_bargmann,
}


def run_suites(cfg: ExperimentConfig, names=None, threads=None) -> dict:
    """Run the named suites (all by default); a crashing suite is reported as failed, the rest still run."""
    report = []
    for name in names or SUITES:
        fn = SUITES[name]
        try:
            checks = fn(cfg, threads) if name == "bounds_certify" else fn(cfg)
            report.append({"suite": name, "passed": all(c["passed"] for c in checks), "checks": checks})
        except Exception as exc:  # isolation is the point here
            report.append({"suite": name, "passed": False, "checks": [],
                           "error": f"{type(exc).__name__}: {exc}",
                           "traceback": traceback.format_exc(limit=3)})
    return {"passed": all(s["passed"] for s in report), "suites": report}
