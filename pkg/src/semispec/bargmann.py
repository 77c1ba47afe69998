"""FBI-Bargmann transform with the phase (i/2)(x-y)^2 and checks on the transform side.

The transform is T u(x) = C_T h^{-3/4} int exp(-(x-y)^2/(2h)) u(y) dy. Images of
Hermite modes are polynomials times exp(-x^2/(4h)), so functions on the transform
side are stored as coefficients in the scaled variable X = x/sqrt(h):

    u(x) = sum_k c_k X^k exp(-X^2/4).

The weight is Phi0(x) = (Im x)^2/2. For x = a + ib the weighted density
|u|^2 exp(-2 Phi0/h) equals |P(X)|^2 exp(-|x|^2/(2h)), so Gauss-Hermite nodes in
a and b scaled by sqrt(2h) integrate it without overflow.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from numpy.polynomial import hermite as nherm
from numpy.polynomial import polynomial as npoly
from scipy import special

from .errors import QuadratureError
from .quantize import weyl_from_ladders, weyl_quantize, weyl_quantize_sparse
from .symbols import PolynomialSymbol, QuadraticSymbol, as_quadratic, quadratic_part

# ----------------------------------------------------------------------------
# mode images by the Gaussian-integral recursion


@functools.lru_cache(maxsize=8)
def _mode_table(n_max: int) -> np.ndarray:
    """Row n: coefficients of P_n with int exp(-(X-t)^2/2 - t^2/2) hhat_n(t) dt = exp(-X^2/4) P_n(X).

    hhat_n are the normalised Hermite polynomials H_n/sqrt(2^n n!). Since
    t K = (X + d/dX) K for the kernel K, the three-term Hermite recursion turns into
    P_{n+1} = sqrt(2/(n+1)) (X P_n/2 + P_n') - sqrt(n/(n+1)) P_{n-1}, P_0 = sqrt(pi).
    """
    T = np.zeros((n_max + 1, n_max + 2))
    T[0, 0] = math.sqrt(math.pi)
    for n in range(n_max):
        Pn = T[n]
        nxt = np.zeros(n_max + 2)
        nxt[1:] += Pn[:-1] / 2
        nxt[:-1] += Pn[1:] * np.arange(1, n_max + 2)
        nxt *= math.sqrt(2 / (n + 1))
        if n > 0:
            nxt -= math.sqrt(n / (n + 1)) * T[n - 1]
        T[n + 1] = nxt
    out = T[:, :n_max + 1]
    out.flags.writeable = False
    return out


def mode_table(n_max: int) -> np.ndarray:
    size = 16
    while size < n_max:
        size *= 2
    return _mode_table(size)[:n_max + 1, :n_max + 1]


def _prefactor(h: float, C_T: float) -> float:
    # C_T h^{-3/4} * sqrt(h) (change of variables) * (pi h)^{-1/4} (mode normalisation)
    return C_T * h ** -0.75 * math.sqrt(h) * (math.pi * h) ** -0.25


# ----------------------------------------------------------------------------
# functions on the transform side


@dataclass(frozen=True, eq=False)
class BargmannFunction:
    """Closed-form element of the weighted space: polynomial in x/sqrt(h) times exp(-x^2/(4h))."""

    h: float
    coefficients: np.ndarray
    d: int = 1

    def __post_init__(self):
        c = np.trim_zeros(np.atleast_1d(np.asarray(self.coefficients, dtype=complex)), "b")
        if len(c) == 0:
            c = np.zeros(1, complex)
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        X = x / math.sqrt(self.h)
        return npoly.polyval(X, self.coefficients) * np.exp(-X * X / 4)

    __call__ = evaluate

    def reduced(self, grid: "WeightedGrid") -> np.ndarray:
        """u exp(Re(x^2)/(4h)); its squared modulus times the grid weights gives the weighted norm."""
        X = grid.x / math.sqrt(self.h)
        return npoly.polyval(X, self.coefficients) * np.exp(-1j * grid.a * grid.b / (2 * self.h))

    def __add__(self, other: "BargmannFunction"):
        n = max(len(self.coefficients), len(other.coefficients))
        c = np.zeros(n, complex)
        c[:len(self.coefficients)] += self.coefficients
        c[:len(other.coefficients)] += other.coefficients
        return BargmannFunction(self.h, c)

    def __mul__(self, s):
        return BargmannFunction(self.h, complex(s) * self.coefficients)

    __rmul__ = __mul__

    def times_x(self) -> "BargmannFunction":
        """Multiplication by x."""
        c = np.concatenate([[0], self.coefficients]) * math.sqrt(self.h)
        return BargmannFunction(self.h, c)

    def times_hD(self) -> "BargmannFunction":
        """(h/i) d/dx applied to P(X) exp(-X^2/4)."""
        c = self.coefficients
        dP = npoly.polyder(c) if len(c) > 1 else np.zeros(1, complex)
        XP = np.concatenate([[0], c]) / 2
        out = -XP
        out[:len(dP)] += dP
        return BargmannFunction(self.h, out * math.sqrt(self.h) / 1j)

    def norm(self, base: int = 64, tol: float = 1e-8) -> float:
        val, _ = stable_integral(lambda g: np.sum(g.w * np.abs(self.reduced(g)) ** 2), self.h, base, tol)
        return math.sqrt(max(val.real, 0.0))

    def sample(self, grid: "WeightedGrid") -> "BargmannSamples":
        return BargmannSamples(self.h, grid, self.reduced(grid))


@dataclass(frozen=True)
class WeightedGrid:
    """Tensor Gauss-Hermite grid over C adapted to exp(-|x|^2/(2h))."""

    h: float
    n: int

    @functools.cached_property
    def _nodes(self):
        t, w = special.roots_hermite(self.n)
        s = math.sqrt(2 * self.h)
        A, B = np.meshgrid(s * t, s * t, indexing="ij")
        W = 2 * self.h * np.outer(w, w)
        return A, B, W

    @property
    def a(self):
        return self._nodes[0]

    @property
    def b(self):
        return self._nodes[1]

    @property
    def x(self):
        return self._nodes[0] + 1j * self._nodes[1]

    @property
    def w(self):
        return self._nodes[2]


@dataclass(frozen=True)
class PolarGrid:
    """Gauss-Legendre in |x| on the pieces between ``breaks``, trapezoid in the angle.

    The last break truncates the domain, so this grid is for integrands that vanish
    beyond it (compactly supported cutoffs).
    """

    h: float
    n: int
    breaks: tuple = (0.0, 1.0, 2.0)

    @functools.cached_property
    def _nodes(self):
        rs, ws = [], []
        for lo, hi in zip(self.breaks[:-1], self.breaks[1:]):
            t, w = special.roots_legendre(self.n)
            rs.append(lo + (hi - lo) * (t + 1) / 2)
            ws.append(w * (hi - lo) / 2)
        r = np.concatenate(rs)
        wr = np.concatenate(ws)
        nt = 2 * self.n
        th = 2 * np.pi * np.arange(nt) / nt
        x = r[:, None] * np.exp(1j * th[None, :])
        W = np.repeat((wr * r * np.exp(-r ** 2 / (2 * self.h)) * 2 * np.pi / nt)[:, None], nt, axis=1)
        return x, W

    @property
    def x(self):
        return self._nodes[0]

    @property
    def a(self):
        return self._nodes[0].real

    @property
    def b(self):
        return self._nodes[0].imag

    @property
    def w(self):
        return self._nodes[1]


@dataclass(frozen=True, eq=False)
class BargmannSamples:
    """Reduced samples of a transform-side function on a weighted grid."""

    h: float
    grid: WeightedGrid
    values: np.ndarray

    def norm(self) -> float:
        return float(math.sqrt(np.sum(self.grid.w * np.abs(self.values) ** 2)))


@functools.lru_cache(maxsize=32)
def _grid(h: float, n: int, breaks=None):
    return WeightedGrid(h, n) if breaks is None else PolarGrid(h, n, breaks)


def stable_integral(fn: Callable[[WeightedGrid], complex], h: float, base: int = 64, tol: float = 1e-8,
                    max_nodes: int = 512, abs_floor: float = 1e-300, breaks=None):
    """Evaluate ``fn`` on grids of base, 2 base, ... nodes per axis until successive values agree.

    ``breaks`` selects the polar grid with those radial pieces instead of the
    Gauss-Hermite tensor grid.
    """
    n = base
    prev = complex(fn(_grid(h, n, breaks)))
    report = [(n, prev)]
    while 2 * n <= max_nodes:
        n *= 2
        cur = complex(fn(_grid(h, n, breaks)))
        report.append((n, cur))
        if abs(cur - prev) <= tol * max(abs(cur), abs_floor):
            return cur, n
        prev = cur
    raise QuadratureError(f"weighted quadrature not stable to {tol} with {max_nodes} nodes per axis", report)


def cauchy_riemann_residual(u: BargmannFunction, extent: float = 8.0, per_unit: int = 40) -> float:
    """sqrt(h) ||dbar u|| / ||u|| in the weighted norm, fourth-order differences on a uniform grid."""
    h = u.h
    s = math.sqrt(h)
    n = int(2 * extent * per_unit) + 1
    ax = np.linspace(-extent * s, extent * s, n)
    dlt = ax[1] - ax[0]
    A, B = np.meshgrid(ax, ax, indexing="ij")
    U = u.evaluate(A + 1j * B)

    def d4(F, axis):
        return (-np.roll(F, -2, axis) + 8 * np.roll(F, -1, axis) - 8 * np.roll(F, 1, axis)
                + np.roll(F, 2, axis)) / (12 * dlt)

    dbar = 0.5 * (d4(U, 0) + 1j * d4(U, 1))
    wgt = np.exp(-B ** 2 / h)
    inner = (slice(2, -2), slice(2, -2))
    num = np.sum(np.abs(dbar[inner]) ** 2 * wgt[inner])
    den = np.sum(np.abs(U[inner]) ** 2 * wgt[inner])
    return float(s * math.sqrt(num / den)) if den > 0 else 0.0


# ----------------------------------------------------------------------------
# the transform


@functools.lru_cache(maxsize=4)
def calibrate_fbi_constant(h: float = 1.0, base: int = 64, tol: float = 1e-12) -> float:
    """C_T making the ground-state image have unit weighted norm."""
    P0 = mode_table(0)[0]
    g = BargmannFunction(h, _prefactor(h, 1.0) * P0)
    val, _ = stable_integral(lambda gr: np.sum(gr.w * np.abs(g.reduced(gr)) ** 2), h, base, tol)
    return 1 / math.sqrt(val.real)


def fbi_constant() -> float:
    return calibrate_fbi_constant()


def fbi_transform(v, h: float) -> BargmannFunction:
    """Image of the Hermite combination sum v_n u_n in closed form."""
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    if not np.any(v):
        return BargmannFunction(h, np.zeros(1))
    n = len(v) - 1
    c = _prefactor(h, fbi_constant()) * (v @ mode_table(n))
    return BargmannFunction(h, c)


def mode_image(n: int, h: float) -> BargmannFunction:
    e = np.zeros(n + 1)
    e[n] = 1
    return fbi_transform(e, h)


def transform_by_quadrature(v, h: float, x, nodes: int = 200) -> np.ndarray:
    """Direct evaluation of the transform integral by Gauss-Hermite quadrature in y."""
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    t, w = nherm.hermgauss(nodes)
    y = math.sqrt(h) * t
    herm = nherm.hermvander(t, len(v) - 1) / np.sqrt(2.0 ** np.arange(len(v)) * special.factorial(np.arange(len(v))))
    u_red = (herm @ v) * (math.pi * h) ** -0.25  # u(y) = u_red exp(-t^2/2)
    x = np.asarray(x, dtype=complex)
    # exp(-(x-y)^2/2h - y^2/2h) = exp(-t^2) exp(-(x^2 - 2 x y)/(2h))
    ker = np.exp(-(x[..., None] ** 2 - 2 * x[..., None] * y) / (2 * h))
    return fbi_constant() * h ** -0.75 * math.sqrt(h) * np.sum(w * u_red * ker, axis=-1)


def unitarity_defect(h: float, trials: int = 100, n_modes: int = 10, seed: int = 0,
                     base: int = 64, tol: float = 1e-8) -> float:
    """max | ||T v|| / ||v|| - 1 | over seeded random mode combinations, norms by quadrature."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)
        worst = max(worst, abs(fbi_transform(v, h).norm(base, tol) / np.linalg.norm(v) - 1))
    return worst


def expand_in_modes(u: BargmannFunction, n_modes: int) -> np.ndarray:
    """Coefficients of u in the orthonormal image basis, by triangular back-substitution."""
    h = u.h
    n = max(n_modes, len(u.coefficients)) - 1
    U = _prefactor(h, fbi_constant()) * mode_table(n).T  # columns: mode images
    c = np.zeros(n + 1, complex)
    c[:len(u.coefficients)] = u.coefficients
    coef = sla.solve_triangular(np.triu(U), c)
    return coef[:n_modes]


def bargmann_ladders(h: float, N: int):
    """Matrices of x and hD_x on the transform side in the mode-image basis, from function arithmetic."""
    Xb = np.zeros((N, N), complex)
    Db = np.zeros((N, N), complex)
    for n in range(N):
        e = mode_image(n, h)
        Xb[:, n] = expand_in_modes(e.times_x(), N + 1)[:N]
        Db[:, n] = expand_in_modes(e.times_hD(), N + 1)[:N]
    return Xb, Db


# ----------------------------------------------------------------------------
# conjugation identities


def kappa_inverse(d: int) -> np.ndarray:
    """Matrix of (x, xi) -> (x + i xi, xi)."""
    I = np.eye(d)
    Z = np.zeros((d, d))
    return np.block([[I, 1j * I], [Z, I]])


def transformed_symbol(p) -> PolynomialSymbol:
    """p composed with the inverse canonical transformation of T."""
    if isinstance(p, QuadraticSymbol):
        p = p.to_polynomial()
    return p.substitute_linear(kappa_inverse(p.d))


def egorov_check(q, h: float, N: int) -> float:
    """Relative gap between T q^w T^{-1} and the transform-side quantization of the composed symbol.

    T maps the n-th Hermite mode to the n-th image, so the first matrix is the
    Hermite-basis matrix of q^w. The second is assembled from x and hD acting on
    the image functions themselves.
    """
    q = as_quadratic(q)
    if q.d > 3:
        raise ValueError("supported for d <= 3")
    real = weyl_quantize(q, h, N).entries
    qq = transformed_symbol(q)
    pad = N + 4
    Xb, Db = bargmann_ladders(h, pad)
    bar = weyl_from_ladders(qq, Xb, Db, N)
    scale = np.max(np.abs(real))
    dev = np.max(np.abs(real - bar))
    return float(dev / scale) if scale > 0 else float(dev)


def _levi(S: np.ndarray) -> np.ndarray:
    d = S.shape[0] // 2
    H = 2 * np.asarray(S, dtype=float)
    Haa, Hab, Hba, Hbb = H[:d, :d], H[:d, d:], H[d:, :d], H[d:, d:]
    return 0.25 * (Haa + Hbb + 1j * (Hab - Hba))


def phi0_matrix(d: int = 1) -> np.ndarray:
    """Phi0(x) = |Im x|^2/2 written as v^T S v for v = (Re x, Im x)."""
    return np.diag(np.concatenate([np.zeros(d), 0.5 * np.ones(d)]))


def schur_constant(S, d: Optional[int] = None) -> float:
    """2^d |det(d_x dbar_x Phi + I)| for Phi(x) = v^T S v, v = (Re x, Im x)."""
    S = np.asarray(S, dtype=float)
    if d is None:
        d = S.shape[0] // 2
    if S.shape != (2 * d, 2 * d) or not np.allclose(S, S.T, atol=0):
        raise ValueError("S must be a real symmetric 2d x 2d matrix")
    L = _levi(S)
    if np.linalg.eigvalsh(L)[0] <= 1e-14 * max(1.0, np.abs(L).max()):
        raise ValueError("weight is not strictly plurisubharmonic")
    return float(2 ** d * abs(np.linalg.det(L + np.eye(d))))


def kernel_exponent(S, h: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Real part of the conjugated Weyl-kernel exponent on the contour through (x+y)/2."""
    S = np.asarray(S, dtype=float)

    def phi(z):
        v = np.concatenate([z.real, z.imag], axis=-1)
        return np.einsum("...i,ij,...j->...", v, S, v)

    def dphi(z):
        d = z.shape[-1]
        g = 2 * np.concatenate([z.real, z.imag], axis=-1) @ S
        return 0.5 * (g[..., :d] - 1j * g[..., d:])

    theta = (2 / 1j) * dphi((x + y) / 2) + 1j * np.conj(x - y)
    ex = -phi(x) + 1j * np.sum((x - y) * theta, axis=-1) + phi(y)
    return (ex / h).real


def kernel_modulus_check(S, h: float = 0.1, n_pairs: int = 100, seed: int = 0) -> float:
    """Largest relative gap between the kernel exponent and -|x-y|^2/h over random pairs."""
    S = np.asarray(S, dtype=float)
    d = S.shape[0] // 2
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_pairs, d)) + 1j * rng.standard_normal((n_pairs, d))
    y = rng.standard_normal((n_pairs, d)) + 1j * rng.standard_normal((n_pairs, d))
    ref = -np.sum(np.abs(x - y) ** 2, axis=-1) / h
    got = kernel_exponent(S, h, x, y)
    return float(np.max(np.abs(got - ref) / np.abs(ref)))


# ----------------------------------------------------------------------------
# quantization against multiplication


@dataclass(frozen=True)
class RadialBump:
    """Smooth radial cutoff. ``plateau``: 1 on |x| <= r, 0 beyond 2r; ``gaussian``: exp(-|x|^2/(2 r^2))."""

    radius: float = 1.0
    profile: str = "plateau"

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x)
        if math.isinf(self.radius):
            return np.ones(x.shape)
        r = np.abs(x) / self.radius
        if self.profile == "gaussian":
            return np.exp(-r ** 2 / 2)
        if self.profile == "plateau":
            s = np.clip(r - 1, 0, 1)

            def g(t):
                return np.where(t > 0, np.exp(-1 / np.where(t > 0, t, 1)), 0.0)

            return g(1 - s) / (g(1 - s) + g(s))
        raise ValueError(f"unknown profile {self.profile!r}")

    @property
    def breaks(self):
        """Radial pieces for polar quadrature, or None when the support is unbounded."""
        if self.profile == "plateau" and math.isfinite(self.radius):
            return (0.0, self.radius, 2 * self.radius)
        return None


DEFAULT_PROBE = np.array([1.0])


def _apply_quantized(p: PolynomialSymbol, h: float, v: np.ndarray) -> np.ndarray:
    """Exact coefficients of p^w v for v supported on len(v) modes."""
    N = len(v) + max(p.max_degree, 1)
    M = weyl_quantize(p, h, N).entries
    return M[:, :len(v)] @ v


@dataclass
class SlopeStudy:
    slope: Optional[float]
    xs: list
    values: list
    detail: list = field(default_factory=list)


def _loglog_slope(xs, ys) -> Optional[float]:
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    if np.any(ys <= 0):
        return None
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def quant_mult_check(p, chi: RadialBump, h_list, v=None, base: int = 64, tol: float = 1e-8) -> SlopeStudy:
    """Residual of <chi T p^w v, T v> against int chi p(Re x, -Im x) |Tv|^2 e^{-2Phi0/h}, per h."""
    if isinstance(p, QuadraticSymbol):
        p = p.to_polynomial()
    if p.d != 1:
        raise ValueError("quadrature-backed checks are one-dimensional")
    v = np.asarray(DEFAULT_PROBE if v is None else v, dtype=complex)
    v = v / np.linalg.norm(v)
    res, detail = [], []
    for h in h_list:
        Tv = fbi_transform(v, h)
        Tw = fbi_transform(_apply_quantized(p, h, v), h)

        def lhs_fn(g):
            return np.sum(g.w * chi(g.x) * Tw.reduced(g) * np.conj(Tv.reduced(g)))

        def rhs_fn(g):
            pts = np.stack([g.a, -g.b], axis=-1)
            return np.sum(g.w * chi(g.x) * p.evaluate(pts) * np.abs(Tv.reduced(g)) ** 2)

        lhs, n1 = stable_integral(lhs_fn, h, base, tol, abs_floor=h, breaks=chi.breaks)
        rhs, n2 = stable_integral(rhs_fn, h, base, tol, abs_floor=h, breaks=chi.breaks)
        r = abs(lhs - rhs)
        res.append(r)
        detail.append({"h": h, "lhs": [lhs.real, lhs.imag], "rhs": [rhs.real, rhs.imag], "residual": r,
                       "grid_size": max(n1, n2)})
    return SlopeStudy(_loglog_slope(h_list, res), list(h_list), res, detail)


# ----------------------------------------------------------------------------
# localized cubic remainder


def disc_mode_weights(n_modes: int, eps: float, h: float) -> np.ndarray:
    """Weighted mass of each normalised mode image inside |x| <= eps.

    |e_n|^2 exp(-2 Phi0/h) is proportional to |x|^{2n} exp(-|x|^2/(2h)), so the mass
    in a centred disc is the regularised incomplete gamma P(n+1, eps^2/(2h)).
    """
    return special.gammainc(np.arange(n_modes) + 1, eps ** 2 / (2 * h))


def disc_mass_polar(coeffs, eps: float, h: float, n_r: int = 200, n_theta: int = 256) -> float:
    """Weighted squared norm of sum c_n e_n on |x| <= eps by polar quadrature."""
    u = fbi_transform(coeffs, h)
    r, wr = np.polynomial.legendre.leggauss(n_r)
    r = eps * (r + 1) / 2
    wr = wr * eps / 2
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    R, TH = np.meshgrid(r, th, indexing="ij")
    x = R * np.exp(1j * TH)
    dens = np.abs(u.evaluate(x)) ** 2 * np.exp(-x.imag ** 2 / h)
    return float(np.sum(dens * R * wr[:, None]) * 2 * np.pi / n_theta)


def cubic_remainder_check(p, eps_list, h: float, N: Optional[int] = None) -> SlopeStudy:
    """sup_u ||1_{|x|<=eps} T (p^w - q^w) u|| / ||u|| for each eps, with its log-log slope.

    The supremum runs over the first N modes; N is chosen so that modes beyond it
    carry no weight inside the largest disc.
    """
    if isinstance(p, QuadraticSymbol):
        p = p.to_polynomial()
    if p.d != 1:
        raise ValueError("quadrature-backed checks are one-dimensional")
    for eps in eps_list:
        if eps < math.sqrt(h) * (1 - 1e-12):
            raise ValueError(f"eps={eps} below sqrt(h)={math.sqrt(h):.4g}")
    _, rem = quadratic_part(p)
    if rem.is_zero:
        return SlopeStudy(None, list(eps_list), [0.0] * len(eps_list))
    deg = rem.max_degree
    if N is None:
        m = max(eps_list) ** 2 / (2 * h)
        N = int(3 * m + 10 * math.sqrt(m)) + 64
    B = weyl_quantize_sparse(rem, h, N + deg)[:, :N].tocsc()
    ratios, detail = [], []
    for eps in eps_list:
        W = sp.diags(disc_mode_weights(N + deg, eps, h))
        G = (B.conj().T @ W @ B).tocsr()
        bw = 2 * deg
        band = np.zeros((bw + 1, N), complex)
        for k in range(bw + 1):
            band[bw - k, k:] = G.diagonal(k)
        lam = sla.eigvals_banded(band, lower=False, select="i", select_range=(N - 1, N - 1))
        ratios.append(float(math.sqrt(max(lam[-1].real, 0.0))))
        detail.append({"eps": eps, "N": N, "ratio": ratios[-1]})
    return SlopeStudy(_loglog_slope(eps_list, ratios), list(eps_list), ratios, detail)


# ----------------------------------------------------------------------------
# graph norms


@dataclass
class RatioStats:
    per_h: list  # dicts with h, min, max, spread
    overall_min: float
    overall_max: float

    @property
    def spread_variation(self) -> float:
        s = [r["spread"] for r in self.per_h]
        return max(s) / min(s) - 1

    def to_dict(self) -> dict:
        return {"per_h": self.per_h, "min": self.overall_min, "max": self.overall_max,
                "spread_variation": self.spread_variation}


def _trial_vectors(trials: int, n_modes: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((trials, n_modes)) + 1j * rng.standard_normal((trials, n_modes))
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def _graph_lhs(q, h: float, V: np.ndarray) -> np.ndarray:
    n = V.shape[1]
    M = weyl_quantize(q, h, n + 2).entries[:, :n]
    return np.linalg.norm(V, axis=1) + np.linalg.norm(V @ M.T, axis=1) / h


def _stats(h_list, ratios) -> RatioStats:
    per = []
    for h, r in zip(h_list, ratios):
        r = r[np.isfinite(r)]
        per.append({"h": h, "min": float(r.min()), "max": float(r.max()), "spread": float(r.max() / r.min())})
    return RatioStats(per, min(p["min"] for p in per), max(p["max"] for p in per))


def graph_norm_ratio(q, h_list, trials: int = 200, seed: int = 0, n_modes: int = 10) -> RatioStats:
    """(||u|| + ||q^w u||/h) / (||u|| + ||(x^2 + (hD)^2) u||/h) over seeded random mode combinations."""
    q = as_quadratic(q)
    V = _trial_vectors(trials, n_modes, seed)
    ref = QuadraticSymbol.harmonic(q.d)
    if q.d != 1:
        raise ValueError("trial vectors are one-dimensional mode combinations")
    ratios = [_graph_lhs(q, h, V) / _graph_lhs(ref, h, V) for h in h_list]
    return _stats(list(h_list), ratios)


def weighted_graph_norm(v, h: float, base: int = 64, tol: float = 1e-8) -> float:
    """||(1 + |x|^2/h) T v|| in the weighted space, by quadrature."""
    u = fbi_transform(v, h)
    val, _ = stable_integral(
        lambda g: np.sum(g.w * (1 + np.abs(g.x) ** 2 / h) ** 2 * np.abs(u.reduced(g)) ** 2), h, base, tol)
    return math.sqrt(max(val.real, 0.0))


def fbi_graph_norm_check(q, h_list, trials: int = 200, seed: int = 0, n_modes: int = 10,
                         base: int = 64, tol: float = 1e-8) -> RatioStats:
    """(||u|| + ||q^w u||/h) / ||(1 + |x|^2/h) T u|| over seeded random mode combinations."""
    q = as_quadratic(q)
    if q.d != 1:
        raise ValueError("quadrature-backed checks are one-dimensional")
    V = _trial_vectors(trials, n_modes, seed)
    ratios = []
    for h in h_list:
        lhs = _graph_lhs(q, h, V)
        rhs = np.array([weighted_graph_norm(v, h, base, tol) for v in V])
        ratios.append(lhs / rhs)
    return _stats(list(h_list), ratios)
