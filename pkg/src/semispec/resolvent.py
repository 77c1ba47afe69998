"""Resolvent norms, pseudospectra, the admissible region and h-scaling studies."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, RegionError
from .parallel import pmap
from .quantize import OperatorMatrix, weyl_quantize
from .symbols import (SpectralLattice, as_quadratic, closed_form_spectrum, hamilton_map,
                      require_elliptic)

# f(0.01) = 3.0005 for gamma = 0.1, d = 1; see calibrate_C_prime
DEFAULT_C_PRIME = 0.1005
H_STRICT = math.exp(-math.e)


def calibrate_C_prime(target: float = 3.0, h: float = 0.01, gamma: float = 0.1, d: int = 1) -> float:
    """C' for which the growth factor at ``h`` equals ``target``."""
    L = math.log(1 / h)
    return (L / math.log(L)) ** (1 / d) / target * gamma ** (1 / d)


def growth_factor(h: float, gamma: float, C_prime: float = DEFAULT_C_PRIME, d: int = 1,
                  allow_preasymptotic: bool = False):
    """Return (f(h), C_gamma) with C_gamma = C'/gamma^{1/d}, f = (log(1/h)/loglog(1/h))^{1/d}/C_gamma.

    By default h must lie below e^{-e}, where loglog(1/h) > 1. With
    ``allow_preasymptotic`` any h < 1/e is accepted; f is still positive there.
    """
    if not 0 < gamma < 1 / 8:
        raise ValueError(f"gamma={gamma} outside (0, 1/8)")
    if C_prime <= 0 or d < 1:
        raise ValueError("C_prime must be positive and d >= 1")
    limit = 1 / math.e if allow_preasymptotic else H_STRICT
    if not 0 < h < limit:
        raise ValueError(f"f undefined/non-positive at this h (h={h}, need 0 < h < {limit:.6g})")
    C_gamma = C_prime / gamma ** (1 / d)
    L = math.log(1 / h)
    return (L / math.log(L)) ** (1 / d) / C_gamma, C_gamma


# ----------------------------------------------------------------------------
# admissible region


@dataclass(frozen=True, eq=False)
class AdmissibleRegion:
    h: float
    gamma: float
    C_prime: float
    C_gamma: float
    f_h: float
    d: int
    outer_radius: float
    threshold: float
    centers: np.ndarray
    lattice: SpectralLattice

    @property
    def excluded(self) -> list:
        return [(complex(c), self.threshold) for c in self.centers]

    def distance_to_lattice(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if len(self.centers) == 0:
            return np.full(z.shape, np.inf)
        return np.min(np.abs(z[..., None] - self.centers), axis=-1)

    def contains(self, z, rtol: float = 1e-12) -> bool:
        return bool(abs(z) <= self.outer_radius * (1 + rtol)
                    and self.distance_to_lattice(z) >= self.threshold * (1 - rtol))


def admissible_region(q, h: float, gamma: float, C_prime: float = DEFAULT_C_PRIME,
                      allow_preasymptotic: bool = False) -> AdmissibleRegion:
    q = as_quadratic(q)
    require_elliptic(q)
    f, Cg = growth_factor(h, gamma, C_prime, q.d, allow_preasymptotic)
    outer = h * f
    thr = h * f ** ((1 - q.d) / 2)
    lat = closed_form_spectrum(hamilton_map(q), h, outer + thr)
    centers = lat.values.copy()
    centers.flags.writeable = False
    return AdmissibleRegion(float(h), float(gamma), float(C_prime), Cg, f, q.d, outer, thr, centers, lat)


def _circle_intersections(c1: complex, r1: float, c2: complex, r2: float) -> list:
    d = abs(c2 - c1)
    if d == 0 or d > r1 + r2 or d < abs(r1 - r2):
        return []
    a = (r1 ** 2 - r2 ** 2 + d ** 2) / (2 * d)
    hh = math.sqrt(max(r1 ** 2 - a ** 2, 0.0))
    u = (c2 - c1) / d
    base = c1 + a * u
    return [base + 1j * u * hh, base - 1j * u * hh]


def snap(region: AdmissibleRegion, angle: float) -> complex:
    """Nearest admissible point to the outer-circle point of argument ``angle``.

    The nearest point of (outer disc minus open excluded discs) is either the
    target itself, a radial projection onto an excluded circle, or a corner where
    two of the boundary circles meet, so those candidates are enumerated.
    """
    R, t = region.outer_radius, region.threshold
    P = R * complex(math.cos(angle), math.sin(angle))
    cands = [P]
    C = region.centers
    for c in C:
        v = P - c
        if abs(v) > 0:
            cands.append(c + t * v / abs(v))
        cands.extend(_circle_intersections(0j, R, c, t))
    for i in range(len(C)):
        for j in range(i + 1, len(C)):
            cands.extend(_circle_intersections(C[i], t, C[j], t))
    ok = [z for z in cands if region.contains(z, rtol=1e-10)]
    if not ok:
        raise RegionError(f"no admissible point at h={region.h}: every candidate lies in an excluded disc")
    return min(ok, key=lambda z: (round(abs(z - P) / R, 12), math.atan2(z.imag, z.real)))


# ----------------------------------------------------------------------------
# resolvent norms


def smallest_singular_value(A: np.ndarray, dense_limit: int = 2000, tol: float = 1e-12,
                            maxiter: int = 300) -> float:
    """sigma_min by dense SVD below ``dense_limit``, else inverse iteration on A^H A."""
    n = A.shape[0]
    if n < dense_limit:
        return float(np.linalg.svd(A, compute_uv=False)[-1])
    lu = sla.lu_factor(A)
    v = np.random.default_rng(0).standard_normal(n) + 0j
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(maxiter):
        w = sla.lu_solve(lu, sla.lu_solve(lu, v), trans=2)
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0:
            return 0.0
        v = w / nw
        if abs(nw - est) <= tol * nw:
            est = nw
            break
        est = nw
    return float(1 / math.sqrt(est))


@dataclass(frozen=True)
class ResolventEstimate:
    value: float
    converged: bool
    N: int
    sigma_min: float

    @property
    def in_spectrum(self) -> bool:
        return math.isinf(self.value)


def _resnorm(M: np.ndarray, z: complex, mnorm: float):
    s = smallest_singular_value(M - z * np.eye(M.shape[0]))
    if s < 1e-14 * mnorm:
        return math.inf, s
    return 1 / s, s


def resolvent_norm(M: OperatorMatrix, z: complex, rtol: float = 1e-3, certify: bool = True) -> ResolventEstimate:
    """1/sigma_min(M - z), certified against the same quantity at 2N."""
    v1, s1 = _resnorm(M.entries, z, M.norm)
    if not certify:
        return ResolventEstimate(v1, True, M.N, s1)
    M2 = M.rebuild(2 * M.N)
    v2, s2 = _resnorm(M2.entries, z, M2.norm)
    if math.isinf(v1) or math.isinf(v2):
        return ResolventEstimate(math.inf, math.isinf(v1) and math.isinf(v2), M2.N, s2)
    return ResolventEstimate(v2, abs(v2 - v1) <= rtol * v2, M2.N, s2)


def certified_resolvent(p, h: float, z: complex, N0: int = 64, N_max: int = 1024, rtol: float = 1e-3):
    """Double N from N0 until successive resolvent norms agree; returns the last estimate."""
    N = N0
    prev = _resnorm(weyl_quantize(p, h, N).entries, z, 1.0)[0]
    while 2 * N <= N_max:
        M = weyl_quantize(p, h, 2 * N)
        cur, s = _resnorm(M.entries, z, M.norm)
        if math.isinf(cur) or abs(cur - prev) <= rtol * cur:
            return ResolventEstimate(cur, True, 2 * N, s)
        prev, N = cur, 2 * N
    return ResolventEstimate(prev, False, N, 1 / prev if prev else 0.0)


# ----------------------------------------------------------------------------
# pseudospectrum grids


@dataclass(frozen=True)
class GridSpec:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    n_re: int
    n_im: int

    def __post_init__(self):
        if self.n_re < 1 or self.n_im < 1:
            raise ValueError("grid resolution must be positive")

    @classmethod
    def point(cls, z: complex) -> "GridSpec":
        return cls(z.real, z.real, z.imag, z.imag, 1, 1)

    def axes(self):
        re = np.linspace(self.re_min, self.re_max, self.n_re) if self.n_re > 1 else np.array([self.re_min])
        im = np.linspace(self.im_min, self.im_max, self.n_im) if self.n_im > 1 else np.array([self.im_min])
        return re, im

    def points(self) -> np.ndarray:
        """Complex grid of shape (n_im, n_re); rows share an imaginary part."""
        re, im = self.axes()
        return re[None, :] + 1j * im[:, None]


@dataclass(frozen=True, eq=False)
class PseudospectrumGrid:
    grid: GridSpec
    z: np.ndarray
    values: np.ndarray
    converged: np.ndarray
    N: int
    spectrum: np.ndarray

    def distance_to_spectrum(self) -> np.ndarray:
        return np.min(np.abs(self.z[..., None] - self.spectrum), axis=-1)

    def to_csv(self, path=None, preamble: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in preamble:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re_z", "im_z", "resnorm", "converged", "N"])
        for z, v, c in zip(self.z.ravel(), self.values.ravel(), self.converged.ravel()):
            w.writerow([repr(float(z.real)), repr(float(z.imag)), "inf" if math.isinf(v) else repr(float(v)),
                        int(bool(c)), self.N])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def pseudospectrum_sweep(p, h: float, grid: GridSpec, N: int, rtol: float = 1e-3,
                         threads=None) -> PseudospectrumGrid:
    """Certified resolvent norms on a rectangular grid; each row is an independent job."""
    M1 = weyl_quantize(p, h, N)
    M2 = M1.rebuild(2 * N)
    Z = grid.points()

    def row(zs):
        vals, conv = [], []
        for z in zs:
            v1, _ = _resnorm(M1.entries, z, M1.norm)
            v2, _ = _resnorm(M2.entries, z, M2.norm)
            if math.isinf(v1) or math.isinf(v2):
                vals.append(math.inf)
                conv.append(math.isinf(v1) and math.isinf(v2))
            else:
                vals.append(v2)
                conv.append(abs(v2 - v1) <= rtol * v2)
        return vals, conv

    rows = pmap(row, list(Z), threads)
    values = np.array([r[0] for r in rows], dtype=float)
    conv = np.array([r[1] for r in rows], dtype=bool)
    spec = np.linalg.eigvals(M2.entries)
    return PseudospectrumGrid(grid, Z, values, conv, 2 * N, spec)


# ----------------------------------------------------------------------------
# scaling studies


def fit_slope(h, values) -> float:
    """Least-squares slope of log(values) against log(1/h)."""
    x = np.log(1 / np.asarray(h, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def window_slopes(h, values, n_windows: int = 3) -> list:
    """Slopes on equal-width windows of log(1/h), ordered from large h to small h."""
    x = np.log(1 / np.asarray(h, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    edges = np.linspace(x.min(), x.max(), n_windows + 1)
    out = []
    for k in range(n_windows):
        sel = (x >= edges[k] - 1e-12) & (x <= edges[k + 1] + 1e-12)
        if sel.sum() < 2:
            raise ValueError("each window needs at least two h values")
        out.append(float(np.polyfit(x[sel], y[sel], 1)[0]))
    return out


@dataclass
class ScalingResult:
    records: list
    global_slope: float
    window_slopes: list
    verdict: str
    gamma: float
    tol: float
    excluded: list = field(default_factory=list)

    @property
    def polynomial_bound_ok(self) -> bool:
        return self.global_slope <= 1 + self.gamma + self.tol

    @property
    def superpolynomial(self) -> bool:
        s = self.window_slopes
        return all(a < b for a, b in zip(s, s[1:])) and s[-1] > 2

    def to_dict(self) -> dict:
        return {
            "records": self.records,
            "slope_fits": {"global": self.global_slope, "windows": self.window_slopes},
            "verdict": self.verdict,
            "gamma": self.gamma,
            "tol": self.tol,
            "excluded": self.excluded,
        }


def scaling_study(p, z_path: Callable[[float], complex], h_list, gamma: float, N0: int = 64,
                  N_max: int = 1024, rtol: float = 1e-3, n_windows: int = 3, tol: float = 0.3,
                  threads=None) -> ScalingResult:
    """Fit the growth exponent of the resolvent norm along z(h).

    Each h gets its own truncation, doubled until the norm is stable. Points that
    never stabilise are reported and left out of the fits.
    """
    h_list = [float(h) for h in h_list]
    if len(h_list) < 2:
        raise ValueError("h_list needs at least two values")
    if math.log10(max(h_list) / min(h_list)) < 1.5 - 1e-12:
        raise ValueError("h_list must span at least 1.5 decades")

    def job(h):
        z = complex(z_path(h))
        est = certified_resolvent(p, h, z, N0=N0, N_max=N_max, rtol=rtol)
        return {"h": h, "z": [z.real, z.imag], "resnorm": est.value, "N": est.N, "converged": est.converged}

    recs = pmap(job, h_list, threads)
    good = [r for r in recs if r["converged"] and math.isfinite(r["resnorm"])]
    bad = [r["h"] for r in recs if r not in good]
    if len(good) < 2 * n_windows:
        raise ConvergenceError(f"too few converged points for a fit (excluded h: {bad})")
    hs = [r["h"] for r in good]
    vs = [r["resnorm"] for r in good]
    res = ScalingResult(recs, fit_slope(hs, vs), window_slopes(hs, vs, n_windows), "", gamma, tol, bad)
    if res.superpolynomial:
        res.verdict = "superpolynomial"
    elif res.polynomial_bound_ok:
        res.verdict = "polynomial"
    else:
        res.verdict = "inconclusive"
    return res


# ----------------------------------------------------------------------------
# excluded area


def lens_area(d: float, r: float, R: float) -> float:
    """Area of a disc of radius r centred at distance d from the origin, inside the disc of radius R."""
    if d + r <= R:
        return math.pi * r * r
    if d >= R + r:
        return 0.0
    if d + R <= r:
        return math.pi * R * R
    # half-angles from Heron's factored form, stable when r << R
    k = (-d + r + R) * (d + r - R) * (d - r + R) * (d + r + R)
    s = math.sqrt(max(k, 0.0))
    alpha = math.atan2(s, d * d + r * r - R * R)
    beta = math.atan2(s, d * d + R * R - r * r)
    return 0.5 * (r * r * _chord_gap(2 * alpha) + R * R * _chord_gap(2 * beta))


def _chord_gap(x: float) -> float:
    """x - sin(x) without cancellation for small x."""
    if x < 1e-2:
        x2 = x * x
        return x * x2 / 6 * (1 - x2 / 20 * (1 - x2 / 42))
    return x - math.sin(x)


@dataclass(frozen=True)
class ExcludedFraction:
    fraction: float
    method: str
    stderr: float = 0.0
    n_discs: int = 0


def _discs_disjoint(C: np.ndarray, t: float) -> bool:
    if len(C) < 2:
        return True
    D = np.abs(C[:, None] - C[None, :])
    np.fill_diagonal(D, np.inf)
    return bool(D.min() >= 2 * t * (1 - 1e-9))


def excluded_fraction(region: AdmissibleRegion, method: str = "auto", samples: int = 1_000_000,
                      seed: int = 0) -> ExcludedFraction:
    """Share of the outer disc covered by the excluded discs."""
    R, t, C = region.outer_radius, region.threshold, region.centers
    C = C[np.abs(C) < R + t]
    if method == "auto":
        method = "analytic" if _discs_disjoint(C, t) else "monte_carlo"
    if method == "analytic":
        if not _discs_disjoint(C, t):
            raise ValueError("analytic area needs pairwise disjoint discs")
        area = sum(lens_area(abs(c), t, R) for c in C)
        return ExcludedFraction(area / (math.pi * R * R), "analytic", 0.0, len(C))
    if samples < 1_000_000:
        raise ValueError("Monte Carlo estimate needs at least 10^6 samples")
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < samples:
        n = min(250_000, samples - done)
        rad = R * np.sqrt(rng.random(n))
        phi = 2 * np.pi * rng.random(n)
        z = rad * np.exp(1j * phi)
        if len(C):
            hits += int(np.count_nonzero(np.min(np.abs(z[:, None] - C[None, :]), axis=1) < t))
        done += n
    p = hits / samples
    return ExcludedFraction(p, "monte_carlo", math.sqrt(p * (1 - p) / samples), len(C))
