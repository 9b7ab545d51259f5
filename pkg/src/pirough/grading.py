"""Multi-index combinatorics for inhomogeneous gradings.

A multi-index is a tuple of block labels in ``1..k``.  A :class:`GradingSpec`
fixes the roughness tuple ``p``, the block dimensions and a truncation degree
``q``.  Degrees are exact :class:`fractions.Fraction` values whenever every
``p_i`` is rational; otherwise floats compared with a ``1e-12`` tolerance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Rational, Real
from typing import Iterable, Sequence

from .errors import InvalidMultiIndexError

FLOAT_TOL = 1e-12


def parse_number(value) -> Fraction | float:
    """Turn ``value`` into a Fraction when it is (or names) a rational number.

    Strings like ``"3/2"`` or ``"2"`` are parsed exactly.  Floats are snapped
    to a rational with denominator at most 1000 when that rational matches to
    ``1e-15``; anything else stays a float.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, str):
        text = value.strip()
        try:
            return Fraction(text)
        except ValueError:
            return parse_number(float(text))
    if isinstance(value, Real):
        x = float(value)
        if not math.isfinite(x):
            raise ValueError(f"non-finite number {value!r}")
        snapped = Fraction(x).limit_denominator(1000)
        if abs(float(snapped) - x) <= 1e-15 * max(1.0, abs(x)):
            return snapped
        return x
    raise TypeError(f"cannot interpret {value!r} as a number")


@dataclass(frozen=True)
class GradingSpec:
    """Roughness tuple, block dimensions and truncation degree."""

    p: tuple
    dims: tuple
    q: Fraction | float = Fraction(1)
    exact: bool = field(init=False, compare=False)

    def __post_init__(self):
        p = tuple(parse_number(v) for v in self.p)
        dims = tuple(int(d) for d in self.dims)
        if not p:
            raise ValueError("need at least one block")
        if len(p) != len(dims):
            raise ValueError(f"p has {len(p)} entries but dims has {len(dims)}")
        if any(pi < 1 for pi in p):
            raise ValueError(f"every p_i must be >= 1, got {p}")
        if any(d < 1 for d in dims):
            raise ValueError(f"block dimensions must be positive, got {dims}")
        exact = all(isinstance(pi, Fraction) for pi in p)
        q = parse_number(self.q)
        if exact and not isinstance(q, Fraction):
            q = Fraction(repr(q))
        if not exact:
            p = tuple(float(pi) for pi in p)
            q = float(q)
        if q <= 0:
            raise ValueError(f"truncation degree must be positive, got {q}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "exact", exact)

    @property
    def k(self) -> int:
        return len(self.p)

    @property
    def p_max(self):
        return max(self.p)

    @property
    def dim(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> tuple:
        return tuple(itertools.accumulate((0,) + self.dims[:-1]))

    def with_degree(self, q) -> "GradingSpec":
        return GradingSpec(self.p, self.dims, q)

    # degree arithmetic -------------------------------------------------
    def inv_p(self, i: int):
        """``1/p_i`` for the 1-based block label ``i``."""
        pi = self.p[i - 1]
        return 1 / pi if self.exact else 1.0 / pi

    def deg_counts(self, counts: Sequence[int]):
        if self.exact:
            return sum((Fraction(n) / pi for n, pi in zip(counts, self.p)), Fraction(0))
        return math.fsum(n / pi for n, pi in zip(counts, self.p))

    def le(self, a, b) -> bool:
        """``a <= b`` in the degree arithmetic of this spec."""
        if self.exact and isinstance(a, Fraction) and isinstance(b, Fraction):
            return a <= b
        return float(a) <= float(b) + FLOAT_TOL

    def lt(self, a, b) -> bool:
        if self.exact and isinstance(a, Fraction) and isinstance(b, Fraction):
            return a < b
        return float(a) < float(b) - FLOAT_TOL

    def eq(self, a, b) -> bool:
        if self.exact and isinstance(a, Fraction) and isinstance(b, Fraction):
            return a == b
        return abs(float(a) - float(b)) <= FLOAT_TOL

    def to_json(self) -> dict:
        return {
            "pi": [_num_to_json(v) for v in self.p],
            "dims": list(self.dims),
            "q": _num_to_json(self.q),
        }

    @classmethod
    def from_json(cls, data: dict) -> "GradingSpec":
        return cls(tuple(data["pi"]), tuple(data["dims"]), data.get("q", 1))


def _num_to_json(v):
    if isinstance(v, Fraction):
        return str(v)
    return float(v)


def validate(R: Sequence[int], spec: GradingSpec) -> tuple:
    R = tuple(int(r) for r in R)
    for r in R:
        if not 1 <= r <= spec.k:
            raise InvalidMultiIndexError(f"label {r} outside 1..{spec.k} in {R}")
    return R


def counts(R: Sequence[int], k: int) -> tuple:
    """``(n_1(R), ..., n_k(R))``."""
    out = [0] * k
    for r in R:
        out[r - 1] += 1
    return tuple(out)


def deg_pi(R: Sequence[int], spec: GradingSpec):
    """Π-degree ``sum_j n_j(R)/p_j``; exact for an exact grading."""
    R = validate(R, spec)
    return spec.deg_counts(counts(R, spec.k))


def gamma_pi(R: Sequence[int], spec: GradingSpec) -> float:
    """``prod_j (n_j(R)/p_j)!`` with the factorial taken as ``Γ(x + 1)``."""
    R = validate(R, spec)
    out = 1.0
    for n, p in zip(counts(R, spec.k), spec.p):
        out *= math.gamma(float(Fraction(n) / p if spec.exact else n / p) + 1.0)
    return out


def count_in(R: Sequence[int], blocks: Iterable[int]) -> int:
    """``|R|_F``: how many labels of ``R`` lie in ``blocks``."""
    F = set(blocks)
    return sum(1 for r in R if r in F)


def degree_set(spec: GradingSpec, upto, *, include_zero: bool = False) -> list:
    """Ascending, deduplicated elements of ``S^Π`` in ``(0, upto]``."""
    upto = parse_number(upto)
    if spec.exact and not isinstance(upto, Fraction):
        upto = Fraction(repr(upto))
    return list(_degree_set(spec.p, spec.exact, upto, include_zero))


@lru_cache(maxsize=256)
def _degree_set(p, exact, upto, include_zero):
    spec = GradingSpec(p, (1,) * len(p), upto if upto > 0 else 1)
    values = []

    def rec(j, acc):
        if j == len(p):
            values.append(acc)
            return
        step = spec.inv_p(j + 1)
        cur = acc
        while spec.le(cur, upto):
            rec(j + 1, cur)
            cur = cur + step

    rec(0, Fraction(0) if exact else 0.0)
    values.sort()
    out = []
    for v in values:
        if not include_zero and not spec.lt(0, v):
            continue
        if out and spec.eq(out[-1], v):
            continue
        out.append(v)
    return tuple(out)


def multiindices(spec: GradingSpec, s) -> list:
    """All non-empty multi-indices with ``deg_pi(R) <= s``.

    Enumerated breadth first, extending words one label at a time and pruning
    once the degree exceeds ``s``.  Sorted by length, then lexicographically.
    """
    s = parse_number(s)
    return list(_multiindices(spec.p, spec.exact, s))


@lru_cache(maxsize=256)
def _multiindices(p, exact, s):
    spec = GradingSpec(p, (1,) * len(p), s if s > 0 else 1)
    k = len(p)
    zero = Fraction(0) if exact else 0.0
    frontier = [((), zero)]
    out = []
    while frontier:
        nxt = []
        for word, d in frontier:
            for r in range(1, k + 1):
                d2 = d + spec.inv_p(r)
                if spec.le(d2, s):
                    w2 = word + (r,)
                    out.append(w2)
                    nxt.append((w2, d2))
        frontier = nxt
    out.sort(key=lambda R: (len(R), R))
    return tuple(out)


def degree_split(spec: GradingSpec) -> tuple:
    """``(s_{m*}, s_{m*+1})``: the adjacent elements of ``S^Π`` around 1."""
    levels = degree_set(spec, 2)  # every p_i >= 1 so 1/p_i <= 1 and S^Π meets (1, 2]
    below = [s for s in levels if spec.le(s, 1)]
    above = [s for s in levels if spec.lt(1, s)]
    return below[-1], above[0]


# -- ordered shuffles ------------------------------------------------------


def ordered_shuffles(*sizes: int) -> list:
    """Permutations in ``OS(k_1, ..., k_n)`` as 0-based image tuples.

    ``sigma[j]`` is the position that the ``j``-th letter of the concatenated
    word is sent to.  Letters keep their order inside each block and the last
    letters of the blocks land in increasing positions.
    """
    if not sizes:
        raise ValueError("need at least one block size")
    if any(int(k) < 1 for k in sizes):
        raise ValueError(f"block sizes must be positive, got {sizes}")
    return list(_ordered_shuffles(tuple(int(k) for k in sizes)))


@lru_cache(maxsize=1024)
def _ordered_shuffles(sizes):
    n = len(sizes)
    starts = list(itertools.accumulate((0,) + sizes[:-1]))
    K = sum(sizes)
    results = []
    remaining = list(sizes)
    sequence = []

    def rec():
        if len(sequence) == K:
            sigma = [0] * K
            used = [0] * n
            for pos, b in enumerate(sequence):
                sigma[starts[b] + used[b]] = pos
                used[b] += 1
            results.append(tuple(sigma))
            return
        for b in range(n):
            if remaining[b] == 0:
                continue
            if remaining[b] == 1 and any(remaining[i] > 0 for i in range(b)):
                continue  # block b would close before an earlier block
            remaining[b] -= 1
            sequence.append(b)
            rec()
            sequence.pop()
            remaining[b] += 1

    rec()
    return tuple(results)


def is_ordered_shuffle(sigma: Sequence[int], sizes: Sequence[int]) -> bool:
    """Check the defining conditions directly (0-based images)."""
    ends = list(itertools.accumulate(sizes))
    starts = [e - k for e, k in zip(ends, sizes)]
    for a, b in zip(starts, ends):
        if any(sigma[j] >= sigma[j + 1] for j in range(a, b - 1)):
            return False
    return all(sigma[ends[i] - 1] < sigma[ends[i + 1] - 1] for i in range(len(sizes) - 1))


def shuffle_word(sigma: Sequence[int], letters: Sequence) -> tuple:
    """Place ``letters[j]`` at position ``sigma[j]``."""
    out = [None] * len(letters)
    for j, pos in enumerate(sigma):
        out[pos] = letters[j]
    return tuple(out)


# -- beta bound -------------------------------------------------------------

_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66)


def zeta_series(s: float, tol: float = 1e-10, head: int = 64) -> tuple:
    """``sum_{j>=1} j^-s`` for ``s > 1`` with a certified error below ``tol``.

    Direct partial sums over ``head`` terms, then an Euler-Maclaurin tail.
    Returns ``(value, error_bound)``.
    """
    if s <= 1:
        raise ArithmeticError(f"series diverges for exponent {s}")
    while True:
        J = head
        partial = math.fsum(j ** -s for j in range(1, J))
        tail = J ** (1 - s) / (s - 1) + 0.5 * J ** -s
        # f^(2m-1)(J) for f(x) = x^-s is -(s)_(2m-1) J^(-s-2m+1)
        rising = s
        bound = math.inf
        for m, b2m in enumerate(_BERNOULLI, start=1):
            deriv = -rising * J ** (-s - 2 * m + 1)
            term = -b2m / math.factorial(2 * m) * deriv
            tail += term
            rising *= (s + 2 * m - 1) * (s + 2 * m)
            nxt = abs(_BERNOULLI[m] if m < len(_BERNOULLI) else 1.0) / math.factorial(2 * m + 2)
            bound = nxt * rising * J ** (-s - 2 * m - 1)
        if bound < tol:
            return partial + tail, bound
        head *= 4


def beta_lower_bound(spec: GradingSpec, tol: float = 1e-10) -> float:
    """Lower bound on the extension constant β.

    ``(p_1^2 ... p_k^2 (1 + sum_{r>=3} (2/(r-2))^{s_{m*+1}}))^{1/k}``.
    """
    _, s_next = degree_split(spec)
    s = float(s_next)
    if s <= 1:
        raise ArithmeticError("degree above 1 must exceed 1")
    zeta, _ = zeta_series(s, tol=tol / 2 ** s)
    series = 2.0 ** s * zeta
    prod = math.prod(float(p) ** 2 for p in spec.p)
    return (prod * (1.0 + series)) ** (1.0 / spec.k)
