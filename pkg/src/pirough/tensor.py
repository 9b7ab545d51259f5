"""Truncated tensor algebra over ``V = V^1 ⊕ ... ⊕ V^k``.

Elements store one coefficient per admissible word in a flat array.  Words
are grouped by multi-index (sorted by length then labels) and, inside a
multi-index, enumerated in C order of the coordinates, so each component
``π_R`` is a contiguous dense block.  Letters are global coordinate indices
``0..dim-1``; the public word format is a sequence of 1-based
``(block, coord)`` pairs.

Arrays of shape ``(n,)`` hold one element and ``(m, n)`` a batch.  Float
arrays are the default; ``dtype=object`` arrays of :class:`fractions.Fraction`
give exact arithmetic through the same code paths.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import SpecMismatchError
from .grading import GradingSpec, counts, multiindices, parse_number

_CHUNK = 1 << 22  # max elements in one batched temporary


class Basis:
    """Word enumeration and product tables for one :class:`GradingSpec`."""

    def __init__(self, spec: GradingSpec):
        self.spec = spec
        self.letter_block = tuple(
            b + 1 for b, d in enumerate(spec.dims) for _ in range(d)
        )
        self.letter_coord = tuple(c for d in spec.dims for c in range(d))
        self.multis = [()] + multiindices(spec, spec.q)
        words = []
        slices = {}
        for R in self.multis:
            start = len(words)
            ranges = [
                range(spec.offsets[r - 1], spec.offsets[r - 1] + spec.dims[r - 1])
                for r in R
            ]
            words.extend(itertools.product(*ranges))
            slices[R] = slice(start, len(words))
        self.words = words
        self.slices = slices
        self.index = {w: i for i, w in enumerate(words)}
        self.n = len(words)
        self.length = np.array([len(w) for w in words], dtype=int)
        self.max_length = int(self.length.max())
        word_multi = []
        for R in self.multis:
            word_multi.extend([R] * (slices[R].stop - slices[R].start))
        self.word_multi = word_multi
        self.degree = {R: spec.deg_counts(counts(R, spec.k)) for R in self.multis}

    def __repr__(self):
        return f"Basis(spec={self.spec!r}, n={self.n})"

    def lookup(self, letters: np.ndarray) -> np.ndarray:
        """Indices of the words in the rows of an ``(m, L)`` letter array (-1 if absent)."""
        letters = np.asarray(letters, dtype=np.intp)
        m, L = letters.shape
        D = self.spec.dim
        if L == 0:
            return np.zeros(m, dtype=np.intp)
        if D ** L <= 1 << 24:
            table = self._lookup_table(L)
            return table[np.ravel_multi_index(letters.T, (D,) * L)] if m else np.zeros(0, dtype=np.intp)
        return np.array([self.index.get(tuple(r), -1) for r in letters.tolist()], dtype=np.intp)

    def _lookup_table(self, L: int) -> np.ndarray:
        cache = self.__dict__.setdefault("_tables", {})
        if L not in cache:
            D = self.spec.dim
            table = np.full(D ** L, -1, dtype=np.intp)
            idx = np.flatnonzero(self.length == L)
            if len(idx):
                words = np.array([self.words[i] for i in idx], dtype=np.intp)
                table[np.ravel_multi_index(words.T, (D,) * L)] = idx
            cache[L] = table
        return cache[L]

    # product tables ------------------------------------------------------
    @cached_property
    def mul_table(self):
        us, vs, ws = [], [], []
        for wi, w in enumerate(self.words):
            for j in range(len(w) + 1):
                us.append(self.index[w[:j]])
                vs.append(self.index[w[j:]])
                ws.append(wi)
        return (
            np.array(us, dtype=np.intp),
            np.array(vs, dtype=np.intp),
            np.array(ws, dtype=np.intp),
        )

    @cached_property
    def scatter(self):
        u, _, w = self.mul_table
        data = np.ones(len(u))
        return sp.csr_matrix((data, (np.arange(len(u)), w)), shape=(len(u), self.n))

    @cached_property
    def _scatter_right(self):
        S = self.scatter
        if S.shape[0] * S.shape[1] <= 1 << 22:
            return S.toarray()
        return S.T.tocsr()

    def scatter_apply(self, terms: np.ndarray) -> np.ndarray:
        """Sum product terms into their target words, row by row."""
        S = self._scatter_right
        if isinstance(S, np.ndarray):
            return terms @ S
        return (S @ terms.T).T

    def word_of(self, letters: Sequence[int]) -> tuple:
        """Public ``((block, coord), ...)`` form of an internal word."""
        return tuple((self.letter_block[a], self.letter_coord[a] + 1) for a in letters)

    def letters_of(self, word) -> tuple:
        """Internal letters of a public word; accepts internal form too."""
        out = []
        for a in word:
            if isinstance(a, (tuple, list)):
                b, c = a
                if not (1 <= b <= self.spec.k and 1 <= c <= self.spec.dims[b - 1]):
                    raise KeyError(f"letter {(b, c)} outside spec")
                out.append(self.spec.offsets[b - 1] + c - 1)
            else:
                out.append(int(a))
        return tuple(out)

    def block_counts(self, blocks: Iterable[int]) -> np.ndarray:
        F = set(blocks)
        return np.array(
            [sum(1 for a in w if self.letter_block[a] in F) for w in self.words],
            dtype=int,
        )

    def degree_mask(self, pred) -> np.ndarray:
        """Boolean mask of words whose multi-index degree satisfies ``pred``."""
        return np.array([bool(pred(self.degree[R])) for R in self.word_multi])

    def length_mask(self, l: int) -> np.ndarray:
        return self.length == l


@lru_cache(maxsize=128)
def get_basis(spec: GradingSpec) -> Basis:
    return Basis(spec)


# -- batched kernels -------------------------------------------------------


def mul(basis: Basis, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated product of single elements or of row-aligned batches."""
    u, v, w = basis.mul_table
    if a.ndim == 1 and b.ndim == 1:
        terms = a[u] * b[v]
        if terms.dtype == object:
            out = np.array([Fraction(0)] * basis.n, dtype=object)
            np.add.at(out, w, terms)
            return out
        return np.bincount(w, weights=terms, minlength=basis.n)
    a2 = np.atleast_2d(a)
    b2 = np.atleast_2d(b)
    m = max(len(a2), len(b2))
    if a2.dtype == object or b2.dtype == object:
        return np.stack([mul(basis, a2[i % len(a2)], b2[i % len(b2)]) for i in range(m)])
    out = np.empty((m, basis.n))
    step = max(1, _CHUNK // max(1, len(u)))
    for lo in range(0, m, step):
        hi = min(m, lo + step)
        aa = a2[lo:hi] if len(a2) > 1 else a2
        bb = b2[lo:hi] if len(b2) > 1 else b2
        terms = aa[:, u] * bb[:, v]
        out[lo:hi] = basis.scatter_apply(terms)
    return out


def one_array(basis: Basis, dtype=float) -> np.ndarray:
    if dtype is object:
        out = np.array([Fraction(0)] * basis.n, dtype=object)
        out[0] = Fraction(1)
        return out
    out = np.zeros(basis.n)
    out[0] = 1.0
    return out


def _unit(dtype, value):
    return Fraction(value) if dtype == object else float(value)


def series_powers(basis: Basis, x: np.ndarray) -> list:
    """``[x^0, x^1, ..., x^L]`` for ``x`` with zero scalar part."""
    one = one_array(basis, object if x.dtype == object else float)
    if x.ndim == 2:
        one = np.broadcast_to(one, x.shape).copy()
    powers = [one, x]
    for _ in range(2, basis.max_length + 1):
        powers.append(mul(basis, powers[-1], x))
    return powers


def exp_array(basis: Basis, x: np.ndarray) -> np.ndarray:
    """Truncated exponential of elements whose scalar part is zero."""
    powers = series_powers(basis, x)
    out = powers[0].copy()
    for k in range(1, len(powers)):
        out = out + powers[k] * _unit(x.dtype, Fraction(1, math.factorial(k)))
    return out


def log_array(basis: Basis, g: np.ndarray) -> np.ndarray:
    """Truncated logarithm of elements whose scalar part is one."""
    x = g.copy()
    x[..., 0] = x[..., 0] - _unit(g.dtype, 1)
    powers = series_powers(basis, x)
    out = np.zeros_like(x)
    for k in range(1, len(powers)):
        out = out + powers[k] * _unit(g.dtype, Fraction((-1) ** (k + 1), k))
    return out


def geodesic_array(basis: Basis, log_g: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """``exp(λ log g)`` for a vector of ``λ`` values (batched over ``λ``)."""
    powers = series_powers(basis, log_g)
    lam = np.asarray(lam, dtype=float)
    out = np.zeros((len(lam), basis.n))
    for k, P in enumerate(powers):
        out += np.outer(lam ** k, P / math.factorial(k))
    return out


# -- elements ---------------------------------------------------------------


class TensorElement:
    """An element of the truncated tensor algebra ``T^{(Π,q)}(V)``."""

    __slots__ = ("spec", "coeffs")
    __array_priority__ = 100

    def __init__(self, spec: GradingSpec, coeffs):
        coeffs = np.asarray(coeffs)
        if coeffs.dtype != object:
            coeffs = coeffs.astype(float)
        basis = get_basis(spec)
        if coeffs.shape != (basis.n,):
            raise ValueError(f"expected {basis.n} coefficients, got shape {coeffs.shape}")
        self.spec = spec
        self.coeffs = coeffs

    # construction ---------------------------------------------------------
    @property
    def basis(self) -> Basis:
        return get_basis(self.spec)

    @classmethod
    def zero(cls, spec, exact=False):
        b = get_basis(spec)
        if exact:
            return cls(spec, np.array([Fraction(0)] * b.n, dtype=object))
        return cls(spec, np.zeros(b.n))

    @classmethod
    def one(cls, spec, exact=False):
        return cls(spec, one_array(get_basis(spec), object if exact else float))

    @classmethod
    def from_terms(cls, spec, terms, exact=False):
        """Build from ``{word: value}`` with public 1-based words."""
        out = cls.zero(spec, exact=exact)
        b = out.basis
        for word, value in dict(terms).items():
            idx = b.index.get(b.letters_of(word))
            if idx is None:
                raise KeyError(f"word {word} not admissible for {spec}")
            out.coeffs[idx] = Fraction(value) if exact else float(value)
        return out

    @classmethod
    def from_vector(cls, spec, v, exact=False):
        """Element supported on length-one words with the given coordinates."""
        v = np.asarray(v, dtype=object if exact else float)
        if v.shape != (spec.dim,):
            raise ValueError(f"expected {spec.dim} coordinates, got {v.shape}")
        out = cls.zero(spec, exact=exact)
        b = out.basis
        for a in range(spec.dim):
            idx = b.index.get((a,))
            if idx is not None:
                out.coeffs[idx] = Fraction(v[a]) if exact else v[a]
        return out

    @property
    def exact(self) -> bool:
        return self.coeffs.dtype == object

    def copy(self):
        return TensorElement(self.spec, self.coeffs.copy())

    # algebra -------------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, TensorElement):
            return NotImplemented
        if other.spec != self.spec:
            raise SpecMismatchError(f"{self.spec} vs {other.spec}")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return TensorElement(self.spec, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return TensorElement(self.spec, self.coeffs - other.coeffs)

    def __neg__(self):
        return TensorElement(self.spec, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, TensorElement):
            self._check(other)
            return TensorElement(self.spec, mul(self.basis, self.coeffs, other.coeffs))
        return TensorElement(self.spec, self.coeffs * other)

    def __rmul__(self, other):
        return TensorElement(self.spec, other * self.coeffs)

    def __truediv__(self, other):
        return TensorElement(self.spec, self.coeffs / other)

    def __eq__(self, other):
        if not isinstance(other, TensorElement):
            return NotImplemented
        return self.spec == other.spec and bool(np.all(self.coeffs == other.coeffs))

    __hash__ = None

    def allclose(self, other, atol=1e-12, rtol=0.0) -> bool:
        self._check(other)
        return bool(
            np.allclose(
                self.coeffs.astype(float), other.coeffs.astype(float), atol=atol, rtol=rtol
            )
        )

    # projections ------------------------------------------------------------
    @property
    def scalar(self):
        return self.coeffs[0]

    def component(self, R) -> np.ndarray:
        """Dense coefficient array of ``π_R`` with shape ``(d_{r1}, ..., d_{rl})``."""
        R = tuple(R)
        sl = self.basis.slices.get(R)
        if sl is None:
            raise KeyError(f"multi-index {R} not admissible for {self.spec}")
        shape = tuple(self.spec.dims[r - 1] for r in R)
        return self.coeffs[sl].reshape(shape)

    def project(self, R) -> "TensorElement":
        R = tuple(R)
        out = TensorElement.zero(self.spec, exact=self.exact)
        sl = self.basis.slices[R]
        out.coeffs[sl] = self.coeffs[sl]
        return out

    def level(self, n: int) -> "TensorElement":
        """Projection onto words of length ``n``."""
        out = TensorElement.zero(self.spec, exact=self.exact)
        mask = self.basis.length == n
        out.coeffs[mask] = self.coeffs[mask]
        return out

    def vector(self) -> np.ndarray:
        """``π_V``: coordinates of the length-one part."""
        b = self.basis
        out = np.zeros(self.spec.dim, dtype=self.coeffs.dtype)
        for a in range(self.spec.dim):
            idx = b.index.get((a,))
            out[a] = self.coeffs[idx] if idx is not None else 0
        return out

    def coefficient(self, word):
        b = self.basis
        return self.coeffs[b.index[b.letters_of(word)]]

    def norm(self, R) -> float:
        """Euclidean norm of the component ``π_R``."""
        return float(np.linalg.norm(self.component(R).astype(float).ravel()))

    def max_norm(self) -> float:
        """Largest component norm over non-empty multi-indices."""
        return component_norms(self.basis, self.coeffs[None, :]).max(initial=0.0)

    # maps -------------------------------------------------------------------
    def dilate(self, blocks, eps) -> "TensorElement":
        """Multiply each word by ``eps`` to the number of its letters in ``blocks``."""
        cnt = self.basis.block_counts(blocks)
        if self.exact:
            eps = Fraction(eps)
            factors = np.array([eps ** int(c) for c in cnt], dtype=object)
        else:
            factors = float(eps) ** cnt.astype(float)
        return TensorElement(self.spec, self.coeffs * factors)

    def exp(self) -> "TensorElement":
        b = self.basis
        if np.any(self.coeffs[b.length != 1] != 0):
            raise ValueError("tensor_exp expects an element supported on length-one words")
        return TensorElement(self.spec, exp_array(b, self.coeffs))

    def log(self) -> "TensorElement":
        if self.coeffs[0] != 1:
            raise ValueError("log needs scalar part one")
        return TensorElement(self.spec, log_array(self.basis, self.coeffs))

    def with_degree(self, q) -> "TensorElement":
        """Re-truncate at degree ``q``; words not present before become zero."""
        return TensorElement(self.spec.with_degree(q), change_degree(self.spec, q, self.coeffs))

    def __repr__(self):
        terms = [
            f"{self.basis.word_of(w)}: {float(c):.6g}"
            for w, c in zip(self.basis.words, self.coeffs)
            if c != 0
        ]
        return f"TensorElement({self.spec.p}, q={self.spec.q}, {{{', '.join(terms[:8])}{', ...' if len(terms) > 8 else ''}}})"

    # serialisation -----------------------------------------------------------
    def to_json(self) -> dict:
        b = self.basis
        terms = []
        for w, c in zip(b.words, self.coeffs):
            if c != 0:
                terms.append((b.word_of(w), float(c)))
        terms.sort(key=lambda t: t[0])
        return {
            **self.spec.to_json(),
            "terms": [{"word": [list(x) for x in w], "value": v} for w, v in terms],
        }

    @classmethod
    def from_json(cls, data: dict) -> "TensorElement":
        spec = GradingSpec.from_json(data)
        terms = {tuple(tuple(x) for x in t["word"]): t["value"] for t in data["terms"]}
        return cls.from_terms(spec, terms)


# -- helpers over arrays -------------------------------------------------------


def component_norms(basis: Basis, arr: np.ndarray, multis=None) -> np.ndarray:
    """Euclidean norms per multi-index, shape ``(m, n_multis)``.

    ``multis`` defaults to every non-empty admissible multi-index.
    """
    arr = np.atleast_2d(arr).astype(float)
    multis = basis.multis[1:] if multis is None else multis
    out = np.empty((len(arr), len(multis)))
    for j, R in enumerate(multis):
        out[:, j] = np.linalg.norm(arr[:, basis.slices[R]], axis=1)
    return out


def change_degree(spec: GradingSpec, q, arr: np.ndarray) -> np.ndarray:
    """Map coefficient arrays from ``spec`` to ``spec.with_degree(q)``."""
    src = get_basis(spec)
    dst = get_basis(spec.with_degree(q))
    src_idx, dst_idx = _degree_maps(src, dst)
    shape = arr.shape[:-1] + (dst.n,)
    if arr.dtype == object:
        out = np.empty(shape, dtype=object)
        out[...] = Fraction(0)
    else:
        out = np.zeros(shape)
    out[..., dst_idx] = arr[..., src_idx]
    return out


def _degree_maps(src: Basis, dst: Basis):
    pairs = [(i, dst.index[w]) for i, w in enumerate(src.words) if w in dst.index]
    src_idx = np.array([a for a, _ in pairs], dtype=np.intp)
    dst_idx = np.array([b for _, b in pairs], dtype=np.intp)
    return src_idx, dst_idx


def segment_array(basis: Basis, v: np.ndarray) -> np.ndarray:
    """Signature of the straight segment with increment ``v``: ``prod(v_w)/|w|!``.

    ``v`` may be ``(dim,)`` or a batch ``(m, dim)``; object arrays stay exact.
    """
    v = np.asarray(v)
    single = v.ndim == 1
    v2 = np.atleast_2d(v)
    exact = v2.dtype == object
    out = np.empty((len(v2), basis.n), dtype=object if exact else float)
    for i, w in enumerate(basis.words):
        if not w:
            out[:, i] = Fraction(1) if exact else 1.0
            continue
        prod = v2[:, w[0]]
        for a in w[1:]:
            prod = prod * v2[:, a]
        fact = math.factorial(len(w))
        out[:, i] = prod * Fraction(1, fact) if exact else prod / fact
    return out[0] if single else out


def shuffle_product(u: Sequence, v: Sequence) -> list:
    """All interleavings of ``u`` and ``v`` (with multiplicity)."""
    u, v = tuple(u), tuple(v)
    out = []
    n = len(u) + len(v)
    for pos in itertools.combinations(range(n), len(u)):
        word = [None] * n
        ui = iter(u)
        vi = iter(v)
        posset = set(pos)
        for i in range(n):
            word[i] = next(ui) if i in posset else next(vi)
        out.append(tuple(word))
    return out


def shuffle_defect(x: TensorElement, u, v) -> float:
    """``<x,u><x,v> - sum_{w in u ш v} <x,w>`` for public or internal words."""
    b = x.basis
    lu, lv = b.letters_of(u), b.letters_of(v)
    lhs = x.coeffs[b.index[lu]] * x.coeffs[b.index[lv]]
    rhs = sum(x.coeffs[b.index[w]] for w in shuffle_product(lu, lv))
    return float(lhs - rhs)


def linear_image_array(
    src_spec: GradingSpec, dst_spec: GradingSpec, matrix, arr: np.ndarray
) -> np.ndarray:
    """Coefficients of the image of rough-path increments under a linear map.

    ``matrix`` has shape ``(dst.dim, src.dim)``.  A destination word of length
    ``l`` receives ``sum_w arr[w] prod_i matrix[u_i, w_i]`` over source words of
    the same length.  Raises if a needed source word is truncated away.
    """
    M = np.asarray(matrix, dtype=float)
    src = get_basis(src_spec)
    dst = get_basis(dst_spec)
    if M.shape != (dst_spec.dim, src_spec.dim):
        raise ValueError(f"matrix shape {M.shape} != {(dst_spec.dim, src_spec.dim)}")
    arr2 = np.atleast_2d(arr).astype(float)
    out = np.zeros((len(arr2), dst.n))
    out[:, 0] = arr2[:, 0]
    nz = (M != 0).astype(float)
    Ds, Dd = src_spec.dim, dst_spec.dim
    for l in range(1, dst.max_length + 1):
        dst_mask = dst.length == l
        if not dst_mask.any():
            continue
        dst_words = [dst.words[i] for i in np.flatnonzero(dst_mask)]
        dst_flat = np.array([np.ravel_multi_index(w, (Dd,) * l) for w in dst_words])
        # which source words feed an admissible destination word
        ind = np.zeros(Dd ** l)
        ind[dst_flat] = 1.0
        need = ind.reshape((Dd,) * l)
        for _ in range(l):
            need = np.tensordot(need, nz, axes=([0], [0]))
        need = need.reshape(-1) > 0
        src_mask = src.length == l
        src_words = [src.words[i] for i in np.flatnonzero(src_mask)]
        src_flat = np.array(
            [np.ravel_multi_index(w, (Ds,) * l) for w in src_words], dtype=np.intp
        )
        have = np.zeros(Ds ** l, dtype=bool)
        have[src_flat] = True
        if np.any(need & ~have):
            raise ValueError(f"source truncation too low for level {l} of the image")
        dense = np.zeros((len(arr2), Ds ** l))
        if len(src_flat):
            dense[:, src_flat] = arr2[:, src_mask]
        dense = dense.reshape((len(arr2),) + (Ds,) * l)
        for axis in range(l):
            # contract source axis ``1 + axis`` with M and put the new axis back in place
            dense = np.moveaxis(np.tensordot(dense, M, axes=([1 + axis], [1])), -1, 1 + axis)
        out[:, dst_mask] = dense.reshape(len(arr2), -1)[:, dst_flat]
    return out if np.ndim(arr) == 2 else out[0]


def tensor_exp(v: TensorElement) -> TensorElement:
    return v.exp()


def tensor_mul(a: TensorElement, b: TensorElement) -> TensorElement:
    if a.spec != b.spec:
        raise SpecMismatchError(f"{a.spec} vs {b.spec}")
    return a * b


def project(a: TensorElement, R) -> TensorElement:
    return a.project(R)


def dilate(a: TensorElement, blocks, eps) -> TensorElement:
    return a.dilate(blocks, eps)


def pi_norm(a: TensorElement, R) -> float:
    return a.norm(R)


def parse_word(text: str) -> tuple:
    """Parse ``"1.1,2.1"`` into ``((1, 1), (2, 1))``."""
    if not text.strip():
        return ()
    return tuple(tuple(int(x) for x in part.split(".")) for part in text.split(","))


__all__ = [
    "Basis",
    "TensorElement",
    "get_basis",
    "mul",
    "exp_array",
    "log_array",
    "geodesic_array",
    "segment_array",
    "component_norms",
    "change_degree",
    "linear_image_array",
    "shuffle_product",
    "shuffle_defect",
    "tensor_exp",
    "tensor_mul",
    "project",
    "dilate",
    "pi_norm",
    "parse_number",
]
