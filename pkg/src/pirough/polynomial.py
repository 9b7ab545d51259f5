"""Matrix-valued polynomials ``f: R^D -> L(R^D, R^W)`` with array kernels.

Symbolic manipulation (composition, integration) goes through sympy; the
numerical side works on an exponent table and a coefficient stack.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy as sp


class Polynomial:
    """``f(z) = sum_m coefs[m] * z^{exps[m]}`` with ``coefs[m]`` of shape ``(W, V)``."""

    def __init__(self, exps, coefs, n_vars: int | None = None):
        coefs = np.asarray(coefs, dtype=float)
        exps = np.asarray(exps, dtype=np.int64)
        if coefs.ndim != 3:
            raise ValueError("coefficients must have shape (monomials, W, V)")
        if exps.ndim != 2 or len(exps) != len(coefs):
            if len(coefs) == 0 and n_vars is not None:
                exps = np.zeros((0, n_vars), dtype=np.int64)
            else:
                raise ValueError("exponent table does not match coefficients")
        if np.any(exps < 0):
            raise ValueError("negative exponents")
        # merge duplicate monomials and drop zeros
        if len(exps):
            uniq, inv = np.unique(exps, axis=0, return_inverse=True)
            merged = np.zeros((len(uniq),) + coefs.shape[1:])
            np.add.at(merged, inv.ravel(), coefs)
            nz = np.any(merged != 0, axis=(1, 2))
            exps, coefs = uniq[nz], merged[nz]
        self.exps = exps
        self.coefs = coefs
        self.n_vars = exps.shape[1] if n_vars is None else n_vars
        self._shape = coefs.shape[1:]
        self._deriv_cache: dict = {}

    @property
    def shape(self) -> tuple:
        return self._shape

    @property
    def degree(self) -> int:
        return int(self.exps.sum(axis=1).max(initial=0))

    @classmethod
    def zero(cls, n_vars, shape):
        return cls(np.zeros((0, n_vars), dtype=np.int64), np.zeros((0,) + tuple(shape)), n_vars)

    def __call__(self, z) -> np.ndarray:
        """Evaluate at one point ``(D,)`` or a batch ``(m, D)``."""
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        Z = np.atleast_2d(z)
        if len(self.exps) == 0:
            out = np.zeros((len(Z),) + self._shape)
        else:
            mono = np.prod(Z[:, None, :] ** self.exps[None, :, :], axis=2)
            out = np.einsum("mk,kwv->mwv", mono, self.coefs)
        return out[0] if single else out

    def derivative(self, a: int) -> "Polynomial":
        """Partial derivative in variable ``a`` (0-based)."""
        if a in self._deriv_cache:
            return self._deriv_cache[a]
        e = self.exps[:, a]
        keep = e > 0
        exps = self.exps[keep].copy()
        exps[:, a] -= 1
        out = Polynomial(exps, self.coefs[keep] * e[keep, None, None], self.n_vars)
        self._deriv_cache[a] = out
        return out

    def partial(self, word) -> "Polynomial":
        out = self
        for a in word:
            out = out.derivative(a)
        return out

    # symbolic bridge -----------------------------------------------------------
    def to_sympy(self, symbols) -> sp.Matrix:
        W, V = self._shape
        M = sp.zeros(W, V)
        for e, c in zip(self.exps, self.coefs):
            mono = sp.Mul(*[s ** int(k) for s, k in zip(symbols, e)])
            M += sp.Matrix(c.tolist()).applyfunc(lambda v: sp.Rational(float(v))) * mono
        return M

    @classmethod
    def from_sympy(cls, matrix, symbols) -> "Polynomial":
        matrix = sp.Matrix(matrix)
        W, V = matrix.shape
        terms: dict = {}
        for a in range(W):
            for b in range(V):
                expr = sp.expand(matrix[a, b])
                if expr == 0:
                    continue
                for mono, coef in sp.Poly(expr, *symbols).terms():
                    slot = terms.setdefault(mono, np.zeros((W, V)))
                    slot[a, b] += float(coef)
        if not terms:
            return cls.zero(len(symbols), (W, V))
        keys = list(terms)
        return cls(np.array(keys, dtype=np.int64), np.stack([terms[k] for k in keys]), len(symbols))

    # serialisation -------------------------------------------------------------
    def to_json(self) -> dict:
        """``{"a,b": [{"monomial": [...], "coef": c}, ...]}`` with 1-based keys."""
        W, V = self._shape
        out: dict = {}
        for a in range(W):
            for b in range(V):
                rows = [
                    {"monomial": [int(x) for x in e], "coef": float(c[a, b])}
                    for e, c in zip(self.exps, self.coefs)
                    if c[a, b] != 0
                ]
                if rows:
                    out[f"{a + 1},{b + 1}"] = rows
        return out

    @classmethod
    def from_json(cls, data: dict, n_vars: int, shape) -> "Polynomial":
        W, V = shape
        exps, coefs = [], []
        for key, rows in data.items():
            a, b = _parse_key(key)
            if not (1 <= a <= W and 1 <= b <= V):
                raise ValueError(f"component {key} outside {W}x{V}")
            for row in rows:
                mono = [int(x) for x in row["monomial"]]
                if len(mono) != n_vars:
                    raise ValueError(f"monomial {mono} needs {n_vars} exponents")
                c = np.zeros((W, V))
                c[a - 1, b - 1] = float(row["coef"])
                exps.append(mono)
                coefs.append(c)
        if not exps:
            return cls.zero(n_vars, (W, V))
        return cls(np.array(exps), np.stack(coefs), n_vars)


def _parse_key(key) -> tuple:
    if isinstance(key, (list, tuple)):
        a, b = key
    else:
        a, b = str(key).strip("()[] ").split(",")
    return int(a), int(b)


@lru_cache(maxsize=None)
def symbols(n: int, prefix: str = "z") -> tuple:
    return tuple(sp.symbols(f"{prefix}0:{n}"))


def from_callable(fn, n_vars: int) -> Polynomial:
    """Build from a Python function of sympy symbols returning a matrix."""
    syms = symbols(n_vars)
    return Polynomial.from_sympy(sp.Matrix(fn(*syms)), syms)
