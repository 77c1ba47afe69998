"""Trace norms, Fredholm determinants, resolvent decompositions and zero-counting bounds.

Everything here works on finite matrices standing in for trace-class operators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import optimize

from .errors import ConvergenceError
from .parallel import pmap
from .quantize import weyl_quantize
from .symbols import as_quadratic, closed_form_spectrum, hamilton_map


def singular_values(K) -> np.ndarray:
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    return np.linalg.svd(K, compute_uv=False)


def trace_norm(K) -> float:
    """Sum of singular values."""
    return float(np.sum(singular_values(K)))


def trace_norm_via_gram(K) -> float:
    """Trace of (K^*K)^{1/2} from the eigenvalues of the Gram matrix (independent route)."""
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    ev = np.linalg.eigvalsh(K.conj().T @ K)
    return float(np.sum(np.sqrt(np.clip(ev, 0, None))))


def fredholm_det(K) -> complex:
    """det(1 + K) as the product of (1 + lambda_j)."""
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    return complex(np.prod(1 + np.linalg.eigvals(K)))


@dataclass(frozen=True, eq=False)
class FredholmData:
    z: Optional[complex]
    K: np.ndarray
    singular_values: np.ndarray
    eigenvalues: np.ndarray
    trace_norm: float
    determinant: complex

    @classmethod
    def from_matrix(cls, K, z=None) -> "FredholmData":
        K = np.atleast_2d(np.array(K, dtype=complex))
        s = singular_values(K)
        ev = np.linalg.eigvals(K)
        K.flags.writeable = False
        return cls(z, K, s, ev, float(s.sum()), complex(np.prod(1 + ev)))


# ----------------------------------------------------------------------------
# inequality chain


@dataclass(frozen=True)
class Leg:
    name: str
    lhs: float
    rhs: float
    passed: Optional[bool]  # None when skipped

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


@dataclass
class InequalityReport:
    legs: list

    @property
    def passed(self) -> bool:
        return all(l.passed is not False for l in self.legs)

    def to_records(self, params=None) -> list:
        return [{"test": l.name, "params": params or {}, "margin": l.margin,
                 "pass": l.passed, "skipped": l.passed is None} for l in self.legs]


def inequality_suite(K, slack: float = 1e-10) -> InequalityReport:
    """Determinant bounds in log form.

    det_chain:     log|det(1+K)| <= sum log(1+s_j)
    exp_chain:     sum log(1+s_j) <= ||K||_tr
    inverse_bound: log||(1+K)^{-1}|| <= ||K||_tr - log|det(1+K)|
    product_rule:  log det((1+K)^{-1}) = -log det(1+K)   (compared as complex logs)
    """
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    n = K.shape[0]
    s = singular_values(K)
    tr = float(s.sum())
    lps = float(np.sum(np.log1p(s)))
    A = np.eye(n) + K
    sign, logdet = np.linalg.slogdet(A)
    legs = []
    if sign == 0:
        ld = -math.inf
    else:
        ld = float(logdet)
    tol = slack * max(1.0, abs(lps), abs(ld) if math.isfinite(ld) else 0.0)
    legs.append(Leg("det_chain", ld, lps, ld <= lps + tol))
    legs.append(Leg("exp_chain", lps, tr, lps <= tr + slack * max(1.0, tr)))
    sA = np.linalg.svd(A, compute_uv=False)
    if sign == 0 or sA[-1] < 1e-13 * max(sA[0], 1.0):
        legs.append(Leg("inverse_bound", math.nan, math.nan, None))
        legs.append(Leg("product_rule", math.nan, math.nan, None))
        return InequalityReport(legs)
    linv = -math.log(sA[-1])
    rhs = tr - ld
    legs.append(Leg("inverse_bound", linv, rhs, bool(linv <= rhs + slack * max(1.0, abs(rhs)))))
    sign_i, logdet_i = np.linalg.slogdet(np.linalg.inv(A))
    lhs = complex(math.log(abs(sign_i)) + 1j * np.angle(sign_i) + logdet_i)
    ref = -(logdet + 1j * np.angle(sign))
    dev = abs(np.exp(lhs - ref) - 1)
    legs.append(Leg("product_rule", dev, slack, bool(dev <= slack)))
    return InequalityReport(legs)


def random_trial_matrix(rng: np.random.Generator, max_dim: int = 200, max_radius: float = 0.9) -> np.ndarray:
    n = int(rng.integers(1, max_dim + 1))
    K = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)
    rho = np.max(np.abs(np.linalg.eigvals(K)))
    target = rng.uniform(0.05, max_radius)
    return K * (target / rho) if rho > 0 else K


@dataclass
class SuiteSummary:
    trials: int
    failures: list
    max_det_rel_error: float
    min_margins: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures


def determinant_suite(trials: int = 1000, max_dim: int = 200, max_radius: float = 0.9, seed: int = 0,
                      slack: float = 1e-10, det_rtol: float = 1e-9, threads=None) -> SuiteSummary:
    """Random inequality and determinant cross-checks; each trial has its own spawned seed."""
    seqs = np.random.SeedSequence(seed).spawn(trials)

    def trial(k):
        K = random_trial_matrix(np.random.default_rng(seqs[k]), max_dim, max_radius)
        rep = inequality_suite(K, slack)
        d1 = fredholm_det(K)
        sign, ld = np.linalg.slogdet(np.eye(len(K)) + K)
        d2 = sign * np.exp(ld)
        return k, rep, abs(d1 - d2) / abs(d2)

    out = pmap(trial, range(trials), threads)
    fails, margins, worst = [], {}, 0.0
    for k, rep, err in out:
        worst = max(worst, err)
        if not rep.passed or err > det_rtol:
            fails.append(k)
        for leg in rep.legs:
            if leg.passed is not None:
                margins[leg.name] = min(margins.get(leg.name, math.inf), leg.margin)
    return SuiteSummary(trials, fails, worst, margins)


# ----------------------------------------------------------------------------
# resolvent decomposition


def mode_projection(N: int, d: int, m_rank: int) -> np.ndarray:
    """Diagonal projection onto the m_rank lowest modes (total degree, then lexicographic)."""
    idx = np.array(np.unravel_index(np.arange(N ** d), (N,) * d)).T
    order = np.lexsort(tuple(idx[:, j] for j in reversed(range(d))) + (idx.sum(axis=1),))
    diag = np.zeros(N ** d)
    diag[order[:m_rank]] = 1.0
    return np.diag(diag)


@dataclass
class K1Result:
    fredholm: FredholmData
    residual: float
    relative_residual: float
    k2_residual: float
    k2_relative_residual: float
    resolvent_norm: float


def k1_decomposition(p, h: float, N: int, m_rank: int, C1: float, z: complex) -> K1Result:
    """K1 = (P~ - z)^{-1}(P - P~) for P~ = P + C1 Pi_m, with both resolvent identities checked."""
    P = weyl_quantize(p, h, N).entries
    n = P.shape[0]
    I = np.eye(n)
    Pt = P + C1 * mode_projection(N, p.d if hasattr(p, "d") else 1, m_rank)
    for name, A in (("P~ - z", Pt - z * I), ("P - z", P - z * I)):
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] < 1e-14 * s[0]:
            raise ValueError(f"z={z} lies in the spectrum of {name} at this truncation")
    Rt = np.linalg.solve(Pt - z * I, I)
    Rp = np.linalg.solve(P - z * I, I)
    K1 = Rt @ (P - Pt)
    K2 = Rp @ (Pt - P)
    rhs = np.linalg.solve(I + K1, Rt)
    res = float(np.linalg.norm(Rp - rhs, 2))
    nR = float(np.linalg.norm(Rp, 2))
    inv2 = np.linalg.solve(I + K2, I)
    res2 = float(np.linalg.norm(inv2 - (I + K1), 2))
    return K1Result(FredholmData.from_matrix(K1, z), res, res / nR, res2,
                    res2 / float(np.linalg.norm(I + K1, 2)), nR)


# ----------------------------------------------------------------------------
# eigenvalue counting


@dataclass
class CountFit:
    exponent: float
    h_list: list
    counts: list


def eig_count_exponent(q, rho: float, h_list) -> CountFit:
    """Fit log(#eigenvalues in |z| <= rho) against log(1/h), multiplicities included."""
    q = as_quadratic(q)
    F = hamilton_map(q)
    hs = [float(h) for h in h_list]
    counts = [closed_form_spectrum(F, h, rho).count() for h in hs]
    if min(counts) == 0:
        raise ValueError("rho is below the smallest eigenvalue modulus for some h")
    if len(set(hs)) < 2:
        return CountFit(math.nan, hs, counts)
    slope = np.polyfit(np.log(1 / np.array(hs)), np.log(np.array(counts, dtype=float)), 1)[0]
    return CountFit(float(slope), hs, counts)


# ----------------------------------------------------------------------------
# zeros of holomorphic functions in a disc


def _sup_log_modulus(logabs, mesh: int = 4096, tol: float = 1e-8, max_mesh: int = 1 << 20) -> float:
    """max over theta of logabs(theta) by mesh search, Brent polish and mesh doubling."""

    def once(m):
        th = 2 * np.pi * np.arange(m) / m
        v = logabs(th)
        best = float(v.max())
        step = 2 * np.pi / m
        for k in np.argsort(v)[-3:]:
            a, b = th[k] - step, th[k] + step
            res = optimize.minimize_scalar(lambda t: -float(logabs(np.array([t]))[0]), bounds=(a, b),
                                           method="bounded", options={"xatol": 1e-13})
            best = max(best, -float(res.fun))
        return best

    prev = once(mesh)
    while mesh < max_mesh:
        mesh *= 2
        cur = once(mesh)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise ConvergenceError("supremum of |u| on the unit circle did not stabilise")


@dataclass(frozen=True, eq=False)
class DiscFunctionSample:
    """Polynomial u with u(0) = 1, and its zero data relative to radii r < R < 1."""

    coefficients: np.ndarray  # ascending powers
    zeros: np.ndarray
    lam: float
    r: float
    R: float
    factored: bool = False  # zeros are exact, log|u| evaluated from the product

    def __post_init__(self):
        _check_radii(self.r, self.R)

    @classmethod
    def from_roots(cls, roots, r: float, R: float) -> "DiscFunctionSample":
        """u(z) = prod(1 - z/z_j); u(0) = 1 by construction."""
        _check_radii(r, R)
        roots = np.asarray(roots, dtype=complex).ravel()
        if np.any(roots == 0):
            raise ValueError("u(0) = 1 forbids a zero at the origin")
        coeffs = npoly.polyfromroots(roots) / np.prod(-roots) if len(roots) else np.array([1.0 + 0j])
        coeffs = np.asarray(coeffs, dtype=complex)
        coeffs[0] = 1.0
        lam = _sup_log_modulus(lambda th: _log_abs_roots(np.exp(1j * th), roots)) if len(roots) else 0.0
        return cls(coeffs, roots, max(lam, 0.0), r, R, True)

    @classmethod
    def from_coefficients(cls, coeffs, r: float, R: float) -> "DiscFunctionSample":
        _check_radii(r, R)
        coeffs = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
        if len(coeffs) == 0 or coeffs[0] != 1:
            raise ValueError("u(0) must equal 1")
        roots = npoly.polyroots(coeffs) if len(coeffs) > 1 else np.zeros(0, complex)
        lam = _sup_log_modulus(lambda th: np.log(np.abs(npoly.polyval(np.exp(1j * th), coeffs))))
        return cls(coeffs, roots, max(lam, 0.0), r, R, False)

    def log_abs(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.factored:
            return _log_abs_roots(z, self.zeros)
        return np.log(np.abs(npoly.polyval(z, self.coefficients)))

    def zeros_within(self, rad: float) -> np.ndarray:
        return self.zeros[np.abs(self.zeros) <= rad]


def _check_radii(r: float, R: float) -> None:
    if not 0 < r < R < 1:
        raise ValueError("need 0 < r < R < 1")


def _log_abs_roots(z, roots) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if len(roots) == 0:
        return np.zeros(z.shape)
    return np.sum(np.log(np.abs(1 - z[..., None] / roots)), axis=-1)


@dataclass
class JensenHarnackReport:
    count_bound_ok: bool
    product_bound_ok: bool
    constants_used: dict
    count_r: int
    count_R: int
    lam: float
    min_product_margin: float


def zero_bound_constants(r: float, R: float) -> dict:
    """Explicit constants for the zero-count and lower-product bounds on the unit disc.

    Jensen between radii r and R gives the count constant; between R and 1 it
    bounds #Z(R) by lam/log(1/R). A radius R' in ((R+r)/2, R) with
    -sum log|R' - |z_j|| <= 4/(R-r) #Z(R) exists by averaging, so on |z| = R' the
    zero-free quotient has log-modulus at most C0 lam, and Harnack on |z| <= r
    with factor H = 2(R+r)/(R-r) gives the product constant C0 (H - 1).
    """
    C_count = 1 / math.log(R / r)
    C1 = 4 / ((R - r) * math.log(1 / R))
    C0 = 1 + C1
    H = 2 * (R + r) / (R - r)
    return {"C_count": C_count, "C_zeros_R": 1 / math.log(1 / R), "C1": C1, "C0": C0,
            "harnack": H, "C_prod": C0 * (H - 1)}


def jensen_harnack_check(s: DiscFunctionSample, n_points: int = 128, seed: int = 0,
                         scan: int = 2001, slack: float = 1e-9) -> JensenHarnackReport:
    if abs(s.log_abs(0.0)) > 1e-12:
        raise ValueError("u(0) must equal 1")
    c = zero_bound_constants(s.r, s.R)
    lam = s.lam
    zr, zR = s.zeros_within(s.r), s.zeros_within(s.R)
    count_ok = len(zr) <= c["C_count"] * lam + slack

    # mean-value choice of R'
    grid = np.linspace((s.R + s.r) / 2, s.R, scan + 2)[1:-1]
    if len(zR):
        S = -np.sum(np.log(np.abs(grid[:, None] - np.abs(zR)[None, :])), axis=1)
        k = int(np.argmin(S))
        Rp, Smin = float(grid[k]), float(S[k])
    else:
        Rp, Smin = float(grid[len(grid) // 2]), 0.0
    c.update({"R_prime": Rp, "S_min": Smin, "S_bound": 4 / (s.R - s.r) * len(zR)})
    scan_ok = Smin <= c["S_bound"] + slack

    rng = np.random.default_rng(seed)
    m = max(n_points, 100)
    rad = s.r * np.sqrt(rng.random(m // 2))
    pts = np.concatenate([rad * np.exp(2j * np.pi * rng.random(m // 2)),
                          s.r * np.exp(2j * np.pi * np.arange(m - m // 2) / (m - m // 2))])
    lhs = s.log_abs(pts)
    prod = np.sum(np.log(np.abs(pts[:, None] - zR[None, :])), axis=1) if len(zR) else np.zeros(m)
    margin = lhs - (prod - c["C_prod"] * lam)
    prod_ok = bool(scan_ok and np.all(margin >= -slack * max(1.0, c["C_prod"] * lam)))
    return JensenHarnackReport(bool(count_ok), prod_ok, c, len(zr), len(zR), lam, float(margin.min()))


def random_disc_sample(rng: np.random.Generator, r: float, R: float, max_degree: int = 20,
                       root_radius: float = 2.0) -> DiscFunctionSample:
    deg = int(rng.integers(0, max_degree + 1))
    roots = root_radius * np.sqrt(rng.random(deg)) * np.exp(2j * np.pi * rng.random(deg))
    return DiscFunctionSample.from_roots(roots, r, R)


@dataclass
class ZeroBoundSummary:
    trials: int
    count_violations: list
    product_violations: list

    @property
    def passed(self) -> bool:
        return not self.count_violations and not self.product_violations


def jensen_harnack_suite(trials: int = 1000, r: float = 0.5, R: float = 0.75, seed: int = 0,
                         max_degree: int = 20, threads=None) -> ZeroBoundSummary:
    seqs = np.random.SeedSequence(seed).spawn(trials)

    def trial(k):
        rng = np.random.default_rng(seqs[k])
        rep = jensen_harnack_check(random_disc_sample(rng, r, R, max_degree), seed=int(rng.integers(2 ** 31)))
        return k, rep

    out = pmap(trial, range(trials), threads)
    return ZeroBoundSummary(trials, [k for k, rep in out if not rep.count_bound_ok],
                             [k for k, rep in out if not rep.product_bound_ok])
