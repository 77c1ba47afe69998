"""End-to-end acceptance checks, one test per criterion, each printing a PASS/FAIL line."""
import cmath
import math
import time

import numpy as np

from semispec import bargmann as bg
from semispec import fredholm as fr
from semispec import resolvent as rv
from semispec.quantize import oracle_match, rescale_check, weyl_quantize
from semispec.symbols import QuadraticSymbol
from semispec.verify import cubic_test_symbol, reference_symbols

DAVIES = QuadraticSymbol.davies()
HARM = QuadraticSymbol.harmonic(1)
GAMMA = 0.1
# 13 points, log-spaced over two decades
H_SWEEP = [float(f"{h:.6g}") for h in np.logspace(-1, -3, 13)]


def test_01_lattice_oracle(report):
    t0 = time.perf_counter()
    m = oracle_match(DAVIES, 0.05, 400, 10)
    dt = time.perf_counter() - t0
    ref = 0.05 * cmath.exp(1j * math.pi / 4) * (2 * np.arange(10) + 1)
    direct = float(np.max(np.abs(np.sort_complex(m.numerical) - np.sort_complex(ref)) / np.abs(ref)))
    ok = m.converged.all() and m.max_rel_error < 1e-6 and direct < 1e-6 and dt < 60
    assert report(1, "lattice oracle", ok, f"max rel error {m.max_rel_error:.2e}, {dt:.1f} s")


def test_02_normal_exactness(report):
    grid = rv.GridSpec(0.0, 4.0, -1.0, 1.0, 41, 41)
    ps = rv.pseudospectrum_sweep(HARM, 1.0, grid, 64)
    lattice = 2 * np.arange(200) + 1.0
    dist = np.min(np.abs(ps.z[..., None] - lattice), axis=-1)
    sel = ps.converged & np.isfinite(ps.values)
    dev = float(np.max(np.abs(ps.values[sel] * dist[sel] - 1)))
    ok = sel.sum() >= 41 * 41 - 2 and dev < 0.01
    assert report(2, "normal-operator exactness", ok, f"max deviation {dev:.2e} over {int(sel.sum())} points")


def test_03_admissible_upper_bound(report):
    def path(h):
        reg = rv.admissible_region(DAVIES, h, GAMMA, rv.DEFAULT_C_PRIME, allow_preasymptotic=True)
        return rv.snap(reg, math.pi / 4)

    res = rv.scaling_study(DAVIES, path, H_SWEEP, GAMMA, N0=32, N_max=1024)
    ok = len(H_SWEEP) >= 8 and not res.excluded and res.global_slope <= 1 + GAMMA + 0.3
    assert report(3, "polynomial resolvent bound on the admissible path", ok,
                  f"global slope {res.global_slope:.3f} <= {1 + GAMMA + 0.3:.1f}")


def test_04_superpolynomial_regime(report):
    w = cmath.exp(1j * math.pi / 4)
    res = rv.scaling_study(DAVIES, lambda h: math.sqrt(h) * w, H_SWEEP, GAMMA, N0=128, N_max=2048)
    s = res.window_slopes
    ok = not res.excluded and s[0] < s[1] < s[2] and s[2] > 2
    assert report(4, "superpolynomial growth along h^(1/2)", ok, "window slopes " + ", ".join(f"{v:.3f}" for v in s))


def test_05_count_exponent(report):
    t0 = time.perf_counter()
    cases = [(1, HARM, np.logspace(-1, -4, 7)), (1, DAVIES, np.logspace(-1, -4, 7))]
    for name in ("harmonic_2d", "anisotropic_2d", "nonnormal_2d"):
        cases.append((2, reference_symbols()[name], np.logspace(-0.5, -3.5, 7)))
    exps = [(d, fr.eig_count_exponent(q, 1.0, hs).exponent) for d, q, hs in cases]
    dt = time.perf_counter() - t0
    ok = all(abs(e - d) <= 0.1 for d, e in exps) and dt < 10
    assert report(5, "eigenvalue count exponent", ok,
                  ", ".join(f"d={d}: {e:.3f}" for d, e in exps) + f", {dt:.1f} s")


def test_06_excluded_fraction(report):
    fracs, ok = [], True
    for h in (1e-2, 1e-4, 1e-8):
        reg = rv.admissible_region(DAVIES, h, GAMMA)
        an = rv.excluded_fraction(reg, "analytic")
        mc = rv.excluded_fraction(reg, "monte_carlo", seed=0)
        ok = ok and an.fraction <= 2 / reg.f_h and abs(an.fraction - mc.fraction) <= 3 * mc.stderr
        fracs.append(an.fraction)
    ok = ok and fracs[0] > fracs[1] > fracs[2]
    assert report(6, "excluded fraction", ok, ", ".join(f"{f:.4f}" for f in fracs))


def test_07_exact_identities(report):
    h = 0.01
    M = weyl_quantize(DAVIES, h, 64)
    resc = rescale_check(DAVIES, h, h ** (2 / 3), 64) / M.norm
    ego = max(bg.egorov_check(reference_symbols()[n], 0.1, 64)
              for n in ("harmonic_1d", "davies", "rotated_harmonic"))
    k1 = fr.k1_decomposition(DAVIES, 0.1, 200, 20, 5.0, -0.05)
    ok = resc <= 1e-12 and ego <= 1e-10 and k1.relative_residual <= 1e-10 and k1.k2_relative_residual <= 1e-10
    assert report(7, "exact identities", ok,
                  f"rescale {resc:.1e}, Egorov {ego:.1e}, K1 {k1.relative_residual:.1e}, "
                  f"K2 {k1.k2_relative_residual:.1e}")


def test_08_determinant_suite(report):
    s = fr.determinant_suite(trials=1000, max_dim=200, max_radius=0.9, seed=0)
    assert report(8, "determinant inequalities", s.passed,
                  f"{len(s.failures)} failures in {s.trials}, max det error {s.max_det_rel_error:.1e}")


def test_09_zero_counting_bounds(report):
    s = fr.jensen_harnack_suite(trials=1000, r=0.5, R=0.75, seed=0)
    assert report(9, "zero-counting bounds", s.passed,
                  f"{len(s.count_violations)} count and {len(s.product_violations)} product violations in {s.trials}")


def test_10_fbi_suite(report):
    unit = max(bg.unitarity_defect(h, trials=100, n_modes=10) for h in (1.0, 0.1))
    c1, c2 = bg.schur_constant(bg.phi0_matrix(1)), bg.schur_constant(bg.phi0_matrix(2))
    qm = bg.quant_mult_check(DAVIES, bg.RadialBump(1.0), [0.2, 0.1, 0.05, 0.025])
    cr = bg.cubic_remainder_check(cubic_test_symbol(), [0.05, 0.1, 0.2, 0.4], 1e-4)
    ok = unit < 1e-6 and c1 == 2.5 and c2 == 6.25 and qm.slope >= 0.9 and cr.slope >= 2.7
    assert report(10, "transform-side suite", ok,
                  f"unitarity {unit:.1e}, Schur {c1}/{c2}, multiplication slope {qm.slope:.3f}, "
                  f"cubic slope {cr.slope:.3f}")


def test_11_graph_norms(report):
    hs = [1.0, 0.1, 0.01]
    real = bg.graph_norm_ratio(DAVIES, hs, trials=200, seed=0)
    fbi = bg.fbi_graph_norm_check(DAVIES, hs, trials=200, seed=0)
    ok = real.spread_variation < 0.1 and fbi.spread_variation < 0.1
    assert report(11, "graph norm equivalences", ok,
                  f"spread variation {real.spread_variation:.1e} (real side), {fbi.spread_variation:.1e} (transform side)")
