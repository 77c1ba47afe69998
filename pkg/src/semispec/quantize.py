"""Truncated Weyl quantization in the h-adapted Hermite basis.

Basis functions are the eigenfunctions of x^2 + (hD)^2, so
x = sqrt(h/2)(a + a^dagger) and hD = sqrt(h/2)(a - a^dagger)/i. Multi-indices are
ordered lexicographically, first coordinate most significant, which is the order
produced by ``np.kron``.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment

from .symbols import (PolynomialSymbol, QuadraticSymbol, SpectralLattice, as_quadratic, closed_form_spectrum,
                      hamilton_map, quadratic_part)

BASIS = "hermite-h-adapted/lex"


def annihilation(N: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, N, dtype=float)), 1)


def ladder_1d(h: float, N: int):
    """Position and momentum matrices for one degree of freedom."""
    a = annihilation(N)
    s = np.sqrt(h / 2)
    return s * (a + a.T), s * (a - a.T) / 1j


def _kron_all(mats):
    return functools.reduce(np.kron, mats)


def ladder_matrices(h: float, N: int, d: int = 1):
    """Lists (X_1..X_d), (hD_1..hD_d) of N^d x N^d matrices."""
    if N < 2:
        raise ValueError("N must be at least 2")
    X1, D1 = ladder_1d(h, N)
    I = np.eye(N)
    Xs, Ds = [], []
    for j in range(d):
        Xs.append(_kron_all([X1 if k == j else I for k in range(d)]))
        Ds.append(_kron_all([D1 if k == j else I for k in range(d)]))
    return Xs, Ds


def mccoy(X: np.ndarray, P: np.ndarray, m: int, n: int) -> np.ndarray:
    """Weyl ordering of x^m xi^n: 2^{-n} sum_k C(n,k) P^k X^m P^{n-k}."""
    Xm = np.linalg.matrix_power(X, m)
    Pk = [np.eye(len(X), dtype=complex)]
    for _ in range(n):
        Pk.append(Pk[-1] @ P)
    out = np.zeros_like(Pk[0])
    for k in range(n + 1):
        out += comb(n, k) * (Pk[k] @ Xm @ Pk[n - k])
    return out / 2 ** n


def weyl_from_ladders(p: PolynomialSymbol, X: np.ndarray, P: np.ndarray, N: int,
                      scale=None) -> np.ndarray:
    """Assemble p^w from padded one-dimensional ladder matrices, cropped to N per dimension.

    ``scale(k)`` multiplies the degree-k homogeneous part; it carries powers of h so
    that the h-dependence stays an exact scalar factor.
    """
    d = p.d
    if len(X) < N + p.max_degree:
        raise ValueError("ladder matrices are not padded enough for this symbol")
    cache: dict = {}

    def one(m, n):
        if (m, n) not in cache:
            cache[(m, n)] = mccoy(X, P, m, n)[:N, :N]
        return cache[(m, n)]

    by_degree: dict = {}
    for (a, b), c in p.terms.items():
        k = sum(a) + sum(b)
        term = c * _kron_all([one(a[j], b[j]) for j in range(d)])
        by_degree[k] = by_degree.get(k, 0) + term
    out = np.zeros((N ** d, N ** d), dtype=complex)
    for k in sorted(by_degree):
        out = out + (by_degree[k] if scale is None else scale(k) * by_degree[k])
    return out


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    h: float
    d: int
    N: int
    entries: np.ndarray
    symbol: PolynomialSymbol
    symbol_degree: int
    basis: str = BASIS

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @functools.cached_property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))

    def rebuild(self, N: int) -> "OperatorMatrix":
        return weyl_quantize(self.symbol, self.h, N)

    def header(self) -> dict:
        return {"h": self.h, "d": self.d, "N": self.N, "symbol_hash": self.symbol.digest(),
                "symbol_degree": self.symbol_degree, "basis": self.basis}

    def save_npz(self, path) -> None:
        np.savez(path, entries=self.entries, header=json.dumps(self.header(), sort_keys=True),
                 symbol=self.symbol.to_json())

    @classmethod
    def load_npz(cls, path) -> "OperatorMatrix":
        with np.load(path, allow_pickle=False) as z:
            hdr = json.loads(str(z["header"]))
            sym = PolynomialSymbol.from_json(str(z["symbol"]))
            ent = np.array(z["entries"])
        if sym.digest() != hdr["symbol_hash"]:
            raise ValueError("symbol hash in header does not match stored symbol")
        ent.flags.writeable = False
        return cls(float(hdr["h"]), int(hdr["d"]), int(hdr["N"]), ent, sym, int(hdr["symbol_degree"]),
                   hdr["basis"])

    def to_json(self) -> str:
        doc = dict(self.header())
        doc["symbol"] = self.symbol.to_dict()
        doc["re"] = self.entries.real.tolist()
        doc["im"] = self.entries.imag.tolist()
        return json.dumps(doc, sort_keys=True)


def weyl_quantize(p, h: float, N: int) -> OperatorMatrix:
    """Matrix of p^w(x, hD) on the first N h-adapted Hermite modes per dimension."""
    if isinstance(p, QuadraticSymbol):
        p = p.to_polynomial()
    deg = p.max_degree
    if N < max(2, deg):
        raise ValueError(f"truncation N={N} too small for a symbol of degree {deg}")
    if h <= 0:
        raise ValueError("h must be positive")
    X, P = ladder_1d(1.0, N + deg)
    M = weyl_from_ladders(p, X, P, N, scale=lambda k: h ** (k / 2) if k != 2 else h)
    M.flags.writeable = False
    return OperatorMatrix(float(h), p.d, int(N), M, p, deg)


def weyl_quantize_sparse(p, h: float, N: int) -> sp.csr_matrix:
    """Sparse counterpart of :func:`weyl_quantize` for large banded truncations."""
    if isinstance(p, QuadraticSymbol):
        p = p.to_polynomial()
    deg = p.max_degree
    if N < max(2, deg):
        raise ValueError(f"truncation N={N} too small for a symbol of degree {deg}")
    Np = N + deg
    a = sp.diags(np.sqrt(np.arange(1, Np, dtype=float)), 1, format="csr")
    X = ((a + a.T) / np.sqrt(2)).astype(complex).tocsr()
    P = ((a - a.T) / (np.sqrt(2) * 1j)).tocsr()
    I = sp.identity(Np, dtype=complex, format="csr")
    cache: dict = {}

    def one(m, n):
        if (m, n) not in cache:
            Xm = I
            for _ in range(m):
                Xm = Xm @ X
            Pk = [I]
            for _ in range(n):
                Pk.append(Pk[-1] @ P)
            out = sp.csr_matrix((Np, Np), dtype=complex)
            for k in range(n + 1):
                out = out + comb(n, k) * (Pk[k] @ Xm @ Pk[n - k])
            cache[(m, n)] = (out / 2 ** n)[:N, :N]
        return cache[(m, n)]

    total = sp.csr_matrix((N ** p.d, N ** p.d), dtype=complex)
    for (al, be), c in p.terms.items():
        k = sum(al) + sum(be)
        term = functools.reduce(sp.kron, [one(al[j], be[j]) for j in range(p.d)])
        total = total + (c * (h if k == 2 else h ** (k / 2))) * term
    return total.tocsr()


def rescale_check(q, h: float, alpha: float, N: int) -> float:
    """Max entrywise gap between q^w at h and alpha times q^w at h/alpha, both in adapted bases."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    A = weyl_quantize(q, h, N).entries
    B = alpha * weyl_quantize(q, h / alpha, N).entries
    return float(np.max(np.abs(A - B)))


def sorted_by_modulus(ev: np.ndarray) -> np.ndarray:
    return ev[np.lexsort((np.round(np.angle(ev), 12), np.round(np.abs(ev), 12)))]


def numerical_spectrum(M: OperatorMatrix, count: int, rtol: float = 1e-6):
    """Smallest-modulus eigenvalues of the truncation, each flagged by the N -> 2N test."""
    if count > M.dim:
        raise ValueError("count exceeds matrix dimension")
    ev = sorted_by_modulus(np.linalg.eigvals(M.entries))[:count]
    ev2 = np.linalg.eigvals(M.rebuild(2 * M.N).entries)
    out = []
    for lam in ev:
        near = ev2[np.argmin(np.abs(ev2 - lam))]
        scale = abs(lam) if lam != 0 else 1.0
        out.append((complex(lam), bool(abs(near - lam) < rtol * scale)))
    return out


def lattice_prefix(q, h: float, count: int) -> SpectralLattice:
    """Closed-form lattice over a disc just large enough to hold ``count`` eigenvalues."""
    q = as_quadratic(q)
    F = hamilton_map(q)
    R = h * float(np.abs(np.linalg.eigvals(F.F)).max())
    lat = closed_form_spectrum(F, h, R)
    while lat.count() < count:
        R *= 1.5
        lat = closed_form_spectrum(F, h, R)
    return lat


@dataclass
class OracleMatch:
    lattice: np.ndarray  # matched lattice values, multiplicity expanded
    numerical: np.ndarray
    converged: np.ndarray
    rel_errors: np.ndarray

    @property
    def max_rel_error(self) -> float:
        return float(self.rel_errors.max()) if len(self.rel_errors) else 0.0

    def passed(self, rtol: float) -> bool:
        return bool(np.all(self.converged) and self.max_rel_error < rtol)

    def records(self) -> list:
        return [{"k": k, "lattice": [l.real, l.imag], "numerical": [n.real, n.imag],
                 "rel_error": float(e), "converged": bool(c)}
                for k, (l, n, e, c) in enumerate(zip(self.lattice, self.numerical, self.rel_errors, self.converged))]


def oracle_match(p, h: float, N: int, count: int, rtol: float = 1e-6) -> OracleMatch:
    """Pair the ``count`` smallest numerical eigenvalues one-to-one with closed-form lattice values.

    For a symbol with higher-order terms the lattice is that of its quadratic part.
    """
    q = p if isinstance(p, QuadraticSymbol) else quadratic_part(p)[0]
    num = numerical_spectrum(weyl_quantize(p, h, N), count, rtol)
    ev = np.array([e for e, _ in num])
    conv = np.array([c for _, c in num])
    # a few spare lattice values absorb ties in modulus at the cut
    lat = lattice_prefix(q, h, count + 2 * q.d).expanded()
    cost = np.abs(ev[:, None] - lat[None, :])
    rows, cols = linear_sum_assignment(cost)
    matched = lat[cols[np.argsort(rows)]]
    err = np.abs(ev - matched) / np.maximum(np.abs(matched), np.finfo(float).tiny)
    return OracleMatch(matched, ev, conv, err)
