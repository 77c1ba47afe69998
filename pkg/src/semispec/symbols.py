"""Phase-space symbols, Hamilton maps, ellipticity and the closed-form spectral lattice.

Phase space points are X = (x, xi) in R^{2d}, x first. The symplectic form is
sigma(X, Y) = xi.y - eta.x = X^T J Y with J = [[0, -I], [I, 0]], and the Hamilton
map of q(X) = X^T Q X is F = J^{-1} Q.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

import numpy as np
from scipy import optimize, special
from scipy.stats import qmc

from .errors import AmbiguousMultiplicityError, EllipticityError, SymbolError

Monomial = tuple[tuple[int, ...], tuple[int, ...]]


def symplectic_matrix(d: int) -> np.ndarray:
    I = np.eye(d)
    Z = np.zeros((d, d))
    return np.block([[Z, -I], [I, Z]])


def sigma(X, Y) -> complex:
    """Symplectic form xi.y - eta.x for X = (x, xi), Y = (y, eta)."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    d = X.shape[-1] // 2
    return X @ symplectic_matrix(d) @ Y


# ----------------------------------------------------------------------------
# polynomial symbols


def _canon_key(alpha, beta, d: int) -> Monomial:
    a = tuple(int(v) for v in alpha)
    b = tuple(int(v) for v in beta)
    if len(a) != d or len(b) != d:
        raise SymbolError(f"multi-index {(a, b)} does not match dimension d={d}")
    if any(v < 0 for v in a + b):
        raise SymbolError(f"negative exponent in multi-index {(a, b)}")
    return a, b


@dataclass(frozen=True)
class PolynomialSymbol:
    """Finite polynomial p(x, xi) = sum c_{ab} x^a xi^b on R^{2d}.

    Zero coefficients are dropped at construction so every stored term is nonzero.
    """

    d: int
    terms: Mapping[Monomial, complex] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.d) < 1:
            raise SymbolError("dimension d must be positive")
        clean = {}
        for (alpha, beta), c in dict(self.terms).items():
            key = _canon_key(alpha, beta, self.d)
            c = complex(c)
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise SymbolError(f"non-finite coefficient at {key}")
            c = clean.get(key, 0j) + c
            clean[key] = c
        clean = {k: v for k, v in sorted(clean.items()) if v != 0}
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "terms", MappingProxyType(clean))

    # construction helpers
    @classmethod
    def from_terms(cls, d: int, items: Iterable) -> "PolynomialSymbol":
        """Build from an iterable of ``(alpha, beta, coeff)`` triples; repeated keys add up."""
        acc: dict = {}
        for alpha, beta, c in items:
            key = _canon_key(alpha, beta, d)
            acc[key] = acc.get(key, 0j) + complex(c)
        return cls(d, acc)

    @classmethod
    def monomial(cls, d: int, alpha, beta, coeff=1.0) -> "PolynomialSymbol":
        return cls(d, {_canon_key(alpha, beta, d): coeff})

    @classmethod
    def variable(cls, d: int, index: int) -> "PolynomialSymbol":
        """Coordinate function: index < d gives x_index, otherwise xi_{index-d}."""
        e = [0] * (2 * d)
        e[index] = 1
        return cls.monomial(d, e[:d], e[d:])

    @classmethod
    def constant(cls, d: int, c=1.0) -> "PolynomialSymbol":
        return cls.monomial(d, (0,) * d, (0,) * d, c)

    # structure
    @property
    def max_degree(self) -> int:
        return max((sum(a) + sum(b) for a, b in self.terms), default=0)

    @property
    def min_degree(self) -> int:
        return min((sum(a) + sum(b) for a, b in self.terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_doubly_characteristic(self) -> bool:
        return all(sum(a) + sum(b) >= 2 for a, b in self.terms)

    @property
    def is_real(self) -> bool:
        return all(c.imag == 0 for c in self.terms.values())

    def homogeneous_part(self, k: int) -> "PolynomialSymbol":
        return PolynomialSymbol(self.d, {m: c for m, c in self.terms.items() if sum(m[0]) + sum(m[1]) == k})

    def degree_at_least(self, k: int) -> "PolynomialSymbol":
        return PolynomialSymbol(self.d, {m: c for m, c in self.terms.items() if sum(m[0]) + sum(m[1]) >= k})

    @property
    def real_part(self) -> "PolynomialSymbol":
        """Re p as a function on real phase space."""
        return PolynomialSymbol(self.d, {m: c.real for m, c in self.terms.items()})

    @property
    def imag_part(self) -> "PolynomialSymbol":
        return PolynomialSymbol(self.d, {m: c.imag for m, c in self.terms.items()})

    # arithmetic
    def _coerce(self, other) -> "PolynomialSymbol":
        if isinstance(other, PolynomialSymbol):
            if other.d != self.d:
                raise SymbolError("dimension mismatch")
            return other
        if isinstance(other, QuadraticSymbol):
            return self._coerce(other.to_polynomial())
        if np.isscalar(other):
            return PolynomialSymbol.constant(self.d, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc = dict(self.terms)
        for m, c in other.terms.items():
            acc[m] = acc.get(m, 0j) + c
        return PolynomialSymbol(self.d, acc)

    __radd__ = __add__

    def __neg__(self):
        return PolynomialSymbol(self.d, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return PolynomialSymbol(self.d, {m: complex(other) * c for m, c in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc: dict = {}
        for (a1, b1), c1 in self.terms.items():
            for (a2, b2), c2 in other.terms.items():
                key = (tuple(i + j for i, j in zip(a1, a2)), tuple(i + j for i, j in zip(b1, b2)))
                acc[key] = acc.get(key, 0j) + c1 * c2
        return PolynomialSymbol(self.d, acc)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = PolynomialSymbol.constant(self.d, 1.0)
        for _ in range(int(n)):
            out = out * self
        return out

    def derivative(self, index: int) -> "PolynomialSymbol":
        """Partial derivative in coordinate ``index`` (x_j for index < d, xi_j otherwise)."""
        d = self.d
        acc = {}
        for (a, b), c in self.terms.items():
            e = list(a + b)
            k = e[index]
            if k == 0:
                continue
            e[index] = k - 1
            acc[(tuple(e[:d]), tuple(e[d:]))] = c * k
        return PolynomialSymbol(d, acc)

    def substitute_linear(self, A) -> "PolynomialSymbol":
        """Composition p(A X) for a complex 2d x 2d matrix A."""
        A = np.asarray(A, dtype=complex)
        d = self.d
        forms = []
        for i in range(2 * d):
            f = PolynomialSymbol(d, {})
            for j in range(2 * d):
                if A[i, j] != 0:
                    f = f + A[i, j] * PolynomialSymbol.variable(d, j)
            forms.append(f)
        out = PolynomialSymbol(d, {})
        powers: dict = {}
        for (a, b), c in self.terms.items():
            term = PolynomialSymbol.constant(d, c)
            for i, k in enumerate(a + b):
                if k:
                    if (i, k) not in powers:
                        powers[(i, k)] = forms[i] ** k
                    term = term * powers[(i, k)]
            out = out + term
        return out

    def evaluate(self, X) -> np.ndarray:
        """Evaluate at points X of shape (..., 2d); complex arguments are allowed."""
        X = np.asarray(X)
        if X.shape[-1] != 2 * self.d:
            raise SymbolError(f"expected trailing dimension {2 * self.d}, got {X.shape[-1]}")
        out = np.zeros(X.shape[:-1], dtype=complex)
        for (a, b), c in self.terms.items():
            t = np.full(X.shape[:-1], c, dtype=complex)
            for i, k in enumerate(a + b):
                if k:
                    t = t * X[..., i] ** k
            out = out + t
        return out

    __call__ = evaluate

    # serialisation
    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "terms": [
                {"alpha": list(a), "beta": list(b), "re": c.real, "im": c.imag}
                for (a, b), c in self.terms.items()
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "PolynomialSymbol":
        try:
            d = int(doc["d"])
            items = []
            for t in doc["terms"]:
                extra = set(t) - {"alpha", "beta", "re", "im"}
                if extra or not ({"re", "im"} & set(t)):
                    raise ValueError(f"term needs alpha, beta and re/im, got keys {sorted(t)}")
                items.append((t["alpha"], t["beta"], complex(float(t.get("re", 0.0)), float(t.get("im", 0.0)))))
        except (KeyError, TypeError, ValueError) as exc:
            raise SymbolError(f"malformed symbol document: {exc}") from exc
        return cls.from_terms(d, items)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PolynomialSymbol":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        """Stable short hash of the canonical JSON form."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def __repr__(self):
        parts = []
        for (a, b), c in self.terms.items():
            parts.append(f"({c:g})*x^{list(a)}*xi^{list(b)}")
        return f"PolynomialSymbol(d={self.d}: " + (" + ".join(parts) or "0") + ")"


def load_symbol(source) -> PolynomialSymbol:
    """Accept a PolynomialSymbol, a dict document, a JSON string or a file path."""
    if isinstance(source, PolynomialSymbol):
        return source
    if isinstance(source, QuadraticSymbol):
        return source.to_polynomial()
    if isinstance(source, Mapping):
        return PolynomialSymbol.from_dict(source)
    if isinstance(source, (str, Path)):
        text = str(source).strip()
        if text.startswith("{"):
            return PolynomialSymbol.from_json(text)
        with open(source, "r", encoding="utf-8") as fh:
            return PolynomialSymbol.from_json(fh.read())
    raise SymbolError(f"cannot interpret symbol source of type {type(source).__name__}")


# ----------------------------------------------------------------------------
# quadratic forms


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class QuadraticSymbol:
    """Complex quadratic form q(X) = X^T Q X, Q symmetric of size 2d."""

    d: int
    Q: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=complex)
        if Q.shape != (2 * self.d, 2 * self.d):
            raise SymbolError(f"Q must be {2 * self.d}x{2 * self.d}, got {Q.shape}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "Q", _readonly(0.5 * (Q + Q.T)))

    @classmethod
    def from_polynomial(cls, p: PolynomialSymbol) -> "QuadraticSymbol":
        d = p.d
        Q = np.zeros((2 * d, 2 * d), dtype=complex)
        for (a, b), c in p.terms.items():
            e = a + b
            if sum(e) != 2:
                raise SymbolError(f"term {(a, b)} is not of degree 2")
            idx = [i for i, k in enumerate(e) for _ in range(k)]
            i, j = idx
            if i == j:
                Q[i, i] += c
            else:
                Q[i, j] += c / 2
                Q[j, i] += c / 2
        return cls(d, Q)

    @classmethod
    def harmonic(cls, d: int = 1, weights=None) -> "QuadraticSymbol":
        """sum_j w_j (x_j^2 + xi_j^2)."""
        w = np.ones(d) if weights is None else np.asarray(weights, dtype=float)
        return cls(d, np.diag(np.concatenate([w, w])))

    @classmethod
    def davies(cls) -> "QuadraticSymbol":
        """xi^2 + i x^2 in one dimension."""
        return cls(1, np.diag([1j, 1.0]))

    def to_polynomial(self) -> PolynomialSymbol:
        d = self.d
        acc = {}
        for i in range(2 * d):
            for j in range(i, 2 * d):
                c = self.Q[i, i] if i == j else 2 * self.Q[i, j]
                if c == 0:
                    continue
                e = [0] * (2 * d)
                e[i] += 1
                e[j] += 1
                acc[(tuple(e[:d]), tuple(e[d:]))] = c
        return PolynomialSymbol(d, acc)

    def evaluate(self, X) -> np.ndarray:
        X = np.asarray(X)
        return np.einsum("...i,ij,...j->...", X, self.Q, X)

    __call__ = evaluate

    def __mul__(self, c):
        return QuadraticSymbol(self.d, complex(c) * self.Q)

    __rmul__ = __mul__

    def __add__(self, other: "QuadraticSymbol"):
        return QuadraticSymbol(self.d, self.Q + other.Q)

    def __eq__(self, other):
        return isinstance(other, QuadraticSymbol) and self.d == other.d and np.array_equal(self.Q, other.Q)

    def __hash__(self):
        return hash((self.d, self.Q.tobytes()))

    def __repr__(self):
        return f"QuadraticSymbol(d={self.d}, Q={self.Q.tolist()})"


def as_quadratic(q) -> QuadraticSymbol:
    if isinstance(q, QuadraticSymbol):
        return q
    if isinstance(q, PolynomialSymbol):
        return QuadraticSymbol.from_polynomial(q)
    raise SymbolError(f"cannot interpret {type(q).__name__} as a quadratic form")


# ----------------------------------------------------------------------------
# Hamilton map


@dataclass(frozen=True, eq=False)
class HamiltonMap:
    F: np.ndarray
    eigen_data: tuple  # ((lambda, r_lambda), ...)
    symbol: Optional[QuadraticSymbol] = None

    @property
    def d(self) -> int:
        return self.F.shape[0] // 2

    @property
    def positive_half(self) -> tuple:
        return tuple((lam, r) for lam, r in self.eigen_data if lam.imag > 0)


def _cluster(values: np.ndarray, tol: float) -> list[list[int]]:
    """Single-linkage clusters of complex values within ``tol``."""
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def hamilton_map(q, cluster_tol: float = 1e-6, rank_tol: float = 1e-8) -> HamiltonMap:
    """Hamilton map F = J^{-1}Q with eigenvalues and generalized-eigenspace dimensions.

    r_lambda is taken as 2d - rank((F - lambda)^{2d}) on the normalised matrix. A
    disagreement between that rank count and the number of clustered eigenvalues
    means the multiplicity is not resolvable at this precision.
    """
    q = as_quadratic(q)
    n = 2 * q.d
    J = symplectic_matrix(q.d)
    F = np.linalg.solve(J, q.Q)
    scale = np.linalg.norm(F, 2)
    if scale == 0:
        return HamiltonMap(_readonly(F), ((0j, n),), q)
    ev = np.linalg.eigvals(F)
    data = []
    for grp in _cluster(ev, cluster_tol * scale):
        lam = complex(np.mean(ev[grp]))
        G = np.linalg.matrix_power((F - lam * np.eye(n)) / scale, n)
        s = np.linalg.svd(G, compute_uv=False)
        r = int(np.sum(s <= rank_tol))
        if r != len(grp):
            raise AmbiguousMultiplicityError(
                f"eigenvalue cluster near {lam:.6g}: {len(grp)} eigenvalues but rank test gives r={r}")
        data.append((lam, r))
    data.sort(key=lambda t: (round(t[0].real, 12), round(t[0].imag, 12)))
    if sum(r for _, r in data) != n:
        raise AmbiguousMultiplicityError("generalized eigenspace dimensions do not add up to 2d")
    return HamiltonMap(_readonly(F), tuple(data), q)


# ----------------------------------------------------------------------------
# ellipticity


@dataclass(frozen=True)
class EllipticityReport:
    elliptic: bool
    min_modulus_on_sphere: float
    halfplane_angle: Optional[float]
    flag: Optional[str] = None


def halfplane_angle(q, n_angles: int = 720):
    """Angle theta maximising the smallest eigenvalue of Re(e^{i theta} Q), with that eigenvalue."""
    q = as_quadratic(q)
    thetas = -np.pi + 2 * np.pi * np.arange(n_angles) / n_angles
    margins = np.array([np.linalg.eigvalsh((np.exp(1j * t) * q.Q).real)[0] for t in thetas])
    k = int(np.argmax(margins))
    return float(thetas[k]), float(margins[k])


def check_elliptic(q, samples: int = 2048, tol: float = 1e-9, seed: int = 0) -> EllipticityReport:
    """Sphere sampling plus local refinement of min|q|, then a half-plane scan."""
    if samples < 1000:
        raise ValueError("at least 1000 sphere samples are required")
    q = as_quadratic(q)
    n = 2 * q.d
    scale = max(np.abs(q.Q).max(), 1e-300)
    Qn = q.Q / scale
    u = qmc.Halton(d=n, scramble=True, seed=seed).random(samples)
    pts = special.ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    vals = np.abs(np.einsum("ki,ij,kj->k", pts, Qn, pts))

    def obj(X):
        r2 = X @ X
        v = X @ Qn @ X
        return (v.real ** 2 + v.imag ** 2) / r2 ** 2

    best = np.inf
    for k in np.argsort(vals)[:10]:
        res = optimize.minimize(obj, pts[k], method="BFGS", options={"gtol": 1e-14})
        best = min(best, res.fun, obj(pts[k]))
    min_mod = float(np.sqrt(max(best, 0.0)) * scale)

    theta, margin = halfplane_angle(q)
    has_halfplane = margin > tol * scale
    if min_mod <= tol:
        return EllipticityReport(False, min_mod, theta if has_halfplane else None, "vanishes_on_sphere")
    if not has_halfplane:
        flag = "range_whole_plane" if q.d == 1 else "no_halfplane"
        return EllipticityReport(False, min_mod, None, flag)
    return EllipticityReport(True, min_mod, theta, None)


def require_elliptic(q) -> EllipticityReport:
    rep = check_elliptic(q)
    if not rep.elliptic:
        raise EllipticityError(f"ellipticity check failed ({rep.flag})")
    return rep


# ----------------------------------------------------------------------------
# spectral lattice


@dataclass(frozen=True, eq=False)
class SpectralLattice:
    h: float
    entries: tuple  # ((value, multiplicity), ...) sorted by modulus then angle
    radius: float
    source: Optional[HamiltonMap] = None

    @property
    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.entries], dtype=complex)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([m for _, m in self.entries], dtype=np.int64)

    def count(self) -> int:
        """Number of eigenvalues in the enumeration disc, multiplicity included."""
        return int(self.multiplicities.sum()) if self.entries else 0

    def expanded(self) -> np.ndarray:
        """Values repeated according to multiplicity."""
        return np.repeat(self.values, self.multiplicities) if self.entries else np.zeros(0, complex)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re", "im", "multiplicity"])
        for v, m in self.entries:
            w.writerow([repr(float(v.real)), repr(float(v.imag)), m])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @staticmethod
    def read_csv(path) -> list:
        with open(path, newline="", encoding="utf-8") as fh:
            return [(complex(float(r["re"]), float(r["im"])), int(r["multiplicity"]))
                    for r in csv.DictReader(fh)]


def merge_close(values: np.ndarray, mults: np.ndarray, tol: float):
    """Merge complex values closer than ``tol`` (chained), summing multiplicities."""
    if len(values) == 0:
        return values, mults
    o1 = np.argsort(values.real, kind="stable")
    v, m = values[o1], mults[o1]
    g1 = np.concatenate([[0], np.cumsum(np.diff(v.real) > tol)])
    o2 = np.lexsort((v.imag, g1))
    v, m, g1 = v[o2], m[o2], g1[o2]
    brk = np.concatenate([[True], (np.diff(g1) != 0) | (np.diff(v.imag) > tol)])
    gid = np.cumsum(brk) - 1
    ng = gid[-1] + 1
    msum = np.bincount(gid, weights=m, minlength=ng)
    # representative: multiplicity-weighted mean of the members
    vre = np.bincount(gid, weights=v.real * m, minlength=ng) / msum
    vim = np.bincount(gid, weights=v.imag * m, minlength=ng) / msum
    return vre + 1j * vim, np.rint(msum).astype(np.int64)


def _arc_bisector(angles: np.ndarray) -> float:
    """Bisector of the shortest arc containing all the given angles."""
    a = np.sort(np.mod(angles, 2 * np.pi))
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))
    k = int(np.argmax(gaps))
    start = a[(k + 1) % len(a)]
    width = 2 * np.pi - gaps[k]
    return float(start + width / 2)


def closed_form_spectrum(F: HamiltonMap, h: float, R: float, merge_tol: float = 1e-10) -> SpectralLattice:
    """All values (h/i) sum_{Im lam>0} (r_lam + 2 k_lam) lam of modulus <= R.

    "Im lam > 0" refers to q rotated so that Re q > 0; for a general elliptic q the
    eigenvalues are selected after the same rotation, which keeps Spec(c q) = c Spec(q).

    A value with index k_lam for an eigenvalue of multiplicity r_lam is counted
    binom(k_lam + r_lam - 1, r_lam - 1) times, the number of ways of splitting k_lam
    among r_lam oscillator directions.
    """
    if h <= 0 or R <= 0:
        raise ValueError("h and R must be positive")
    scale = max(np.linalg.norm(F.F, 2), 1e-300)
    # select eigenvalues after rotating q into Re q > 0, where the rule is Im lam > 0
    rot = 1.0
    if F.symbol is not None:
        angle, margin = halfplane_angle(F.symbol)
        if margin <= 0:
            raise EllipticityError("range of q is not contained in a half-plane; the lattice formula does not apply")
        rot = np.exp(1j * angle)
    if any(abs((rot * lam).imag) <= 1e-10 * scale for lam, _ in F.eigen_data):
        raise EllipticityError("Hamilton map has a real eigenvalue; the lattice formula does not apply")
    pos = tuple((lam, r) for lam, r in F.eigen_data if (rot * lam).imag > 0)
    mu = np.array([h / 1j * lam for lam, _ in pos])
    r = np.array([rr for _, rr in pos])
    # a direction in which every step has positive projection
    theta = -_arc_bisector(np.angle(mu))
    proj = (np.exp(1j * theta) * mu).real
    if np.any(proj <= 0):
        raise EllipticityError("lattice generators do not lie in an open half-plane")
    Rt = R * (1 + 1e-12)
    vals = np.array([np.sum(r * mu)], dtype=complex)
    mult = np.array([1], dtype=np.int64)
    if (np.exp(1j * theta) * vals[0]).real > Rt:
        return SpectralLattice(float(h), (), float(R), F)
    for j in range(len(mu)):
        p = (np.exp(1j * theta) * vals).real
        kmax = np.floor((Rt - p) / (2 * proj[j])).astype(np.int64)
        keep = kmax >= 0
        vals, mult, kmax = vals[keep], mult[keep], kmax[keep]
        cnt = kmax + 1
        base = np.repeat(vals, cnt)
        bm = np.repeat(mult, cnt)
        starts = np.repeat(np.cumsum(cnt) - cnt, cnt)
        k = np.arange(cnt.sum()) - starts
        vals = base + 2 * k * mu[j]
        w = np.rint(special.comb(k + r[j] - 1, r[j] - 1)).astype(np.int64) if r[j] > 1 else 1
        mult = bm * w
        vals, mult = merge_close(vals, mult, merge_tol * h)
    keep = np.abs(vals) <= Rt
    vals, mult = vals[keep], mult[keep]
    order = np.lexsort((np.round(np.angle(vals), 12), np.round(np.abs(vals), 12)))
    entries = tuple((complex(vals[i]), int(mult[i])) for i in order)
    return SpectralLattice(float(h), entries, float(R), F)


# ----------------------------------------------------------------------------
# symbol manipulations


def quadratic_part(p: PolynomialSymbol):
    """Split a doubly characteristic symbol into its quadratic part and the cubic-and-higher rest."""
    for (a, b), c in p.terms.items():
        if sum(a) + sum(b) <= 1:
            raise SymbolError(f"symbol is not doubly characteristic: nonzero coefficient at alpha={a}, beta={b}")
    return QuadraticSymbol.from_polynomial(p.homogeneous_part(2)), p.degree_at_least(3)


def schrodinger_symbol(V: PolynomialSymbol, W: PolynomialSymbol) -> PolynomialSymbol:
    """xi^2 + V(x) + i W(x) for real potentials V, W vanishing to second order at 0."""
    if V.d != W.d:
        raise SymbolError("V and W must have the same dimension")
    d = V.d
    for name, P in (("V", V), ("W", W)):
        for (a, b), c in P.terms.items():
            if any(b):
                raise SymbolError(f"{name} must depend on x only, found xi-exponent {b}")
            if c.imag != 0:
                raise SymbolError(f"{name} must have real coefficients")
            if sum(a) <= 1:
                raise SymbolError(f"{name} must vanish with its gradient at 0, offending multi-index {a}")
    H = np.zeros((d, d))
    for (a, _), c in V.homogeneous_part(2).terms.items():
        idx = [i for i, k in enumerate(a) for _ in range(k)]
        i, j = idx
        if i == j:
            H[i, i] += 2 * c.real
        else:
            H[i, j] += c.real
            H[j, i] += c.real
    if np.linalg.eigvalsh(H)[0] <= 0:
        raise SymbolError("Hessian of V at the origin is not positive definite")
    kinetic = PolynomialSymbol.from_terms(d, [((0,) * d, tuple(int(i == j) * 2 for i in range(d)), 1.0)
                                             for j in range(d)])
    return kinetic + V + 1j * W


@dataclass(frozen=True)
class BracketReport:
    bracket: PolynomialSymbol
    nonnormal: bool


def poisson_bracket_nonnormality(q) -> BracketReport:
    """{Re q, Im q} = sum_j d_xi Re q d_x Im q - d_x Re q d_xi Im q."""
    p = q.to_polynomial() if isinstance(q, QuadraticSymbol) else q
    d = p.d
    re, im = p.real_part, p.imag_part
    br = PolynomialSymbol(d, {})
    for j in range(d):
        br = br + re.derivative(d + j) * im.derivative(j) - re.derivative(j) * im.derivative(d + j)
    return BracketReport(br, not br.is_zero)
