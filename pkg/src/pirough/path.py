"""Piecewise-linear paths, grid rough paths, controls and Π-variation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import OffGridError, SpecMismatchError
from .grading import GradingSpec, gamma_pi, multiindices
from .tensor import (
    TensorElement,
    change_degree,
    component_norms,
    exp_array,
    geodesic_array,
    get_basis,
    linear_image_array,
    log_array,
    mul,
    one_array,
    segment_array,
)


@dataclass(frozen=True)
class SampledPath:
    """Samples ``Z_{t_0}, ..., Z_{t_N}`` of a path in ``R^D``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values)
        if values.dtype != object:
            values = values.astype(float)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or len(times) < 2:
            raise ValueError("need at least two sample times")
        if len(values) != len(times):
            raise ValueError("times and values have different lengths")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation of the sampled values."""
        return np.array(
            [np.interp(t, self.times, self.values[:, j].astype(float)) for j in range(self.dim)]
        )


class GridRoughPath:
    """A time grid with one group-like increment per grid interval.

    Increments between grid points are ordered products of interval
    increments, computed left to right.  Values strictly inside an interval
    exist only through :meth:`between` and :func:`refine`, which follow the
    geodesic ``exp(λ log X_i)`` of that interval.
    """

    def __init__(self, spec: GradingSpec, times, increments, basepoint=None):
        times = np.asarray(times, dtype=float)
        inc = np.asarray(increments)
        if inc.dtype != object:
            inc = inc.astype(float)
        basis = get_basis(spec)
        if times.ndim != 1 or len(times) < 2:
            raise ValueError("grid needs at least two points")
        if np.any(np.diff(times) <= 0):
            raise ValueError("grid times must be strictly increasing")
        if inc.shape != (len(times) - 1, basis.n):
            raise ValueError(f"increments shape {inc.shape} != {(len(times) - 1, basis.n)}")
        if np.any(inc[:, 0] != 1):
            raise ValueError("every increment needs scalar part 1")
        self.spec = spec
        self.times = times
        self.increments = inc
        self.basepoint = (
            np.zeros(spec.dim) if basepoint is None else np.asarray(basepoint, dtype=float)
        )
        self.report = None

    # basic accessors -------------------------------------------------------
    @property
    def basis(self):
        return get_basis(self.spec)

    @property
    def N(self) -> int:
        return len(self.times) - 1

    @property
    def exact(self) -> bool:
        return self.increments.dtype == object

    def increment(self, i: int) -> TensorElement:
        return TensorElement(self.spec, self.increments[i])

    def index_of(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t))
        for j in (i - 1, i):
            if 0 <= j <= self.N and abs(self.times[j] - t) <= 1e-12 * max(1.0, abs(t)):
                return j
        raise OffGridError(f"time {t} is not a grid point")

    def chen_eval(self, s: float, t: float) -> TensorElement:
        """Ordered product of the interval increments between grid times."""
        i, j = self.index_of(s), self.index_of(t)
        if j < i:
            raise ValueError(f"need s <= t, got {s} > {t}")
        return TensorElement(self.spec, self._product(i, j))

    def _product(self, i: int, j: int) -> np.ndarray:
        b = self.basis
        out = one_array(b, object if self.exact else float)
        for m in range(i, j):
            out = mul(b, out, self.increments[m])
        return out

    @cached_property
    def level_one(self) -> np.ndarray:
        """Level-one parts of the interval increments, shape ``(N, dim)``."""
        b = self.basis
        idx = [b.index.get((a,)) for a in range(self.spec.dim)]
        out = np.zeros((self.N, self.spec.dim))
        for a, k in enumerate(idx):
            if k is not None:
                out[:, a] = self.increments[:, k].astype(float)
        return out

    def values(self) -> np.ndarray:
        """Positions ``π_V(Z_{0,t_i})`` plus basepoint at every grid point."""
        return self._values.copy()

    @cached_property
    def _values(self) -> np.ndarray:
        return self.basepoint + np.vstack([np.zeros(self.spec.dim), np.cumsum(self.level_one, axis=0)])

    @cached_property
    def logs(self) -> np.ndarray:
        return log_array(self.basis, self.increments.astype(float))

    @cached_property
    def pair_array(self) -> np.ndarray:
        """``P[i, j] = X_{t_i, t_j}`` for ``i <= j`` (float), built by offset."""
        b = self.basis
        N = self.N
        inc = self.increments.astype(float)
        P = np.zeros((N + 1, N + 1, b.n))
        P[np.arange(N + 1), np.arange(N + 1), 0] = 1.0
        cur = inc.copy()
        for k in range(1, N + 1):
            if k > 1:
                cur = mul(b, cur[:-1], inc[k - 1 :])
            P[np.arange(N + 1 - k), np.arange(k, N + 1)] = cur
        return P

    def products(self, i, j) -> np.ndarray:
        """Rows ``X_{t_i, t_j}`` for index arrays with ``i <= j`` (float)."""
        i = np.asarray(i, dtype=int)
        j = np.asarray(j, dtype=int)
        if self.N <= 256:
            return self.pair_array[i, j]
        b = self.basis
        inc = self.increments.astype(float)
        k = j - i
        if len(i) == self.N + 1 - k[0] and np.all(k == k[0]) and k[0] > 0 and np.array_equal(
            i, np.arange(len(i))
        ):
            # whole offset diagonals arrive in order when callers sweep offsets
            prev = getattr(self, "_diag", None)
            if prev is not None and prev[0] == k[0]:
                return prev[1].copy()
            if k[0] == 1:
                rows = inc.copy()
            elif prev is not None and prev[0] == k[0] - 1:
                rows = mul(b, prev[1][:-1], inc[k[0] - 1 :])
            else:
                rows = None
            if rows is not None:
                self._diag = (int(k[0]), rows)
                return rows.copy()
        out = np.zeros((len(i), b.n))
        out[:, 0] = 1.0
        pos = i.copy()
        active = np.flatnonzero(pos < j)
        while len(active):
            out[active] = mul(b, out[active], inc[pos[active]])
            pos[active] += 1
            active = active[pos[active] < j[active]]
        return out

    # geodesic interpolation --------------------------------------------------
    def geodesic(self, i: int, lam, q=None) -> np.ndarray:
        """``exp(λ log X_i)`` for an array of ``λ``, optionally at a higher degree."""
        log_i = self.logs[i]
        spec = self.spec
        if q is not None and q != spec.q:
            log_i = change_degree(spec, q, log_i)
            spec = spec.with_degree(q)
        return geodesic_array(get_basis(spec), log_i, np.atleast_1d(lam))

    def locate(self, t: float) -> tuple:
        """``(interval index, fraction)`` of a time inside the grid."""
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise ValueError(f"time {t} outside [{self.times[0]}, {self.times[-1]}]")
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.N - 1))
        h = self.times[i + 1] - self.times[i]
        return i, float(np.clip((t - self.times[i]) / h, 0.0, 1.0))

    def between(self, s: float, t: float, q=None) -> TensorElement:
        """``X_{s,t}`` for arbitrary times, geodesic inside grid intervals."""
        spec = self.spec if q is None else self.spec.with_degree(q)
        b = get_basis(spec)
        i, a = self.locate(s)
        j, c = self.locate(t)
        if (j, c) < (i, a):
            raise ValueError("need s <= t")
        if i == j:
            return TensorElement(spec, self.geodesic(i, [c - a], q)[0])
        out = self.geodesic(i, [1.0 - a], q)[0]
        for m in range(i + 1, j):
            full = self.increments[m].astype(float)
            if q is not None and q != self.spec.q:
                full = self.geodesic(m, [1.0], q)[0]
            out = mul(b, out, full)
        return TensorElement(spec, mul(b, out, self.geodesic(j, [c], q)[0]))

    def position(self, t: float) -> np.ndarray:
        i, a = self.locate(t)
        return self.values()[i] + a * self.level_one[i]

    def positions(self, ts) -> np.ndarray:
        """Level-one positions at many times, linear inside intervals."""
        ts = np.asarray(ts, dtype=float)
        i = np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, self.N - 1)
        a = np.clip((ts - self.times[i]) / (self.times[i + 1] - self.times[i]), 0.0, 1.0)
        return self._values[i] + a[:, None] * self.level_one[i]

    # restructuring ---------------------------------------------------------------
    def restrict(self, i0: int, i1: int) -> "GridRoughPath":
        """Sub-path on grid indices ``i0..i1``."""
        return GridRoughPath(
            self.spec, self.times[i0 : i1 + 1], self.increments[i0:i1], self.values()[i0]
        )

    def with_degree(self, q) -> "GridRoughPath":
        """Truncate to a lower degree (raising needs :func:`extend_signature`)."""
        if self.spec.lt(self.spec.q, q):
            raise ValueError("raising the degree needs extend_signature")
        return GridRoughPath(
            self.spec.with_degree(q),
            self.times,
            change_degree(self.spec, q, self.increments),
            self.basepoint,
        )

    def linear_image(self, matrix, spec: GradingSpec, shift=None) -> "GridRoughPath":
        """Image under ``z -> matrix @ z + shift``."""
        M = np.asarray(matrix, dtype=float)
        inc = linear_image_array(self.spec, spec, M, self.increments.astype(float))
        base = M @ self.basepoint + (0 if shift is None else np.asarray(shift, dtype=float))
        return GridRoughPath(spec, self.times, inc, base)

    def dilate(self, blocks, eps) -> "GridRoughPath":
        cnt = self.basis.block_counts(blocks).astype(float)
        F = set(blocks)
        base = self.basepoint.copy()
        for a, blk in enumerate(self.basis.letter_block):
            if blk in F:
                base[a] *= eps
        return GridRoughPath(self.spec, self.times, self.increments * float(eps) ** cnt, base)

    def to_json(self) -> dict:
        return {
            "spec": self.spec.to_json(),
            "times": [float(t) for t in self.times],
            "basepoint": [float(x) for x in self.basepoint],
            "increments": [self.increment(i).to_json()["terms"] for i in range(self.N)],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GridRoughPath":
        spec = GradingSpec.from_json(data["spec"])
        rows = []
        for terms in data["increments"]:
            el = TensorElement.from_json({**spec.to_json(), "terms": terms})
            rows.append(el.coeffs)
        return cls(spec, data["times"], np.array(rows), data.get("basepoint"))

    def __repr__(self):
        return f"GridRoughPath(p={self.spec.p}, dims={self.spec.dims}, q={self.spec.q}, N={self.N})"


# -- construction ---------------------------------------------------------------


def segment_signature(x_from, x_to, spec: GradingSpec, exact=False) -> TensorElement:
    """Signature of the straight line from ``x_from`` to ``x_to``."""
    dt = object if exact else float
    a = np.asarray(x_from, dtype=dt)
    b = np.asarray(x_to, dtype=dt)
    if a.shape != (spec.dim,) or b.shape != (spec.dim,):
        raise ValueError(f"coordinates must have length {spec.dim}")
    if exact:
        a = np.array([Fraction(x) for x in a], dtype=object)
        b = np.array([Fraction(x) for x in b], dtype=object)
    return TensorElement(spec, segment_array(get_basis(spec), b - a))


def lift_path(path: SampledPath, spec: GradingSpec, exact=False) -> GridRoughPath:
    """Canonical lift of the piecewise-linear interpolation of ``path``."""
    if path.dim != spec.dim:
        raise ValueError(f"path has {path.dim} coordinates, spec expects {spec.dim}")
    vals = path.values
    if exact:
        vals = np.array([[Fraction(x) for x in row] for row in vals], dtype=object)
    else:
        vals = vals.astype(float)
    inc = segment_array(get_basis(spec), np.diff(vals, axis=0))
    base = path.values[0].astype(float)
    return GridRoughPath(spec, path.times, inc, base)


def chen_eval(X: GridRoughPath, s: float, t: float) -> TensorElement:
    return X.chen_eval(s, t)


def refine(X: GridRoughPath, new_times) -> GridRoughPath:
    """Insert grid points, splitting intervals along their geodesics."""
    new_times = np.asarray(new_times, dtype=float)
    if np.any(new_times < X.times[0]) or np.any(new_times > X.times[-1]):
        raise ValueError("refinement points must lie inside the grid")
    times = np.union1d(X.times, new_times)
    rows = []
    for i in range(X.N):
        a, b = X.times[i], X.times[i + 1]
        pts = times[(times >= a) & (times <= b)]
        if len(pts) == 2:
            rows.append(X.increments[i])
            continue
        lam = np.diff(pts) / (b - a)
        rows.extend(geodesic_array(X.basis, X.logs[i], lam))
    inc = np.array(rows, dtype=float) if not X.exact else np.array(rows, dtype=object)
    return GridRoughPath(X.spec, times, inc, X.basepoint)


def refine_uniform(X: GridRoughPath, factor: int) -> GridRoughPath:
    """Split every interval into ``factor`` equal pieces."""
    if factor <= 1:
        return X
    pts = [
        X.times[i] + (X.times[i + 1] - X.times[i]) * np.arange(1, factor) / factor
        for i in range(X.N)
    ]
    return refine(X, np.concatenate(pts))


def concatenate(paths: Sequence[GridRoughPath]) -> GridRoughPath:
    """Paste grid paths whose grids meet end to start."""
    first = paths[0]
    times = [first.times]
    incs = [first.increments]
    for prev, nxt in zip(paths, paths[1:]):
        if nxt.spec != first.spec:
            raise SpecMismatchError("cannot paste paths with different specs")
        if abs(nxt.times[0] - prev.times[-1]) > 1e-12:
            raise ValueError("grids do not meet")
        times.append(nxt.times[1:])
        incs.append(nxt.increments)
    return GridRoughPath(first.spec, np.concatenate(times), np.concatenate(incs), first.basepoint)


# -- controls -------------------------------------------------------------------


class ControlFunction:
    """Super-additive ``ω(s, t)`` with ``ω(t, t) = 0``."""

    def __call__(self, s: float, t: float) -> float:
        raise NotImplementedError

    def grid_matrix(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        n = len(times)
        W = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                W[i, j] = self(times[i], times[j])
        return W

    def scaled(self, c: float) -> "ControlFunction":
        return ScaledControl(self, c)


@dataclass(frozen=True)
class LinearControl(ControlFunction):
    """``ω(s, t) = c (t - s)``."""

    c: float = 1.0

    def __call__(self, s, t):
        return self.c * max(0.0, t - s)

    def grid_matrix(self, times):
        times = np.asarray(times, dtype=float)
        return self.c * np.clip(times[None, :] - times[:, None], 0.0, None)


@dataclass(frozen=True)
class ScaledControl(ControlFunction):
    base: ControlFunction
    c: float

    def __call__(self, s, t):
        return self.c * self.base(s, t)

    def grid_matrix(self, times):
        return self.c * self.base.grid_matrix(times)


class GridControl(ControlFunction):
    """Control tabulated on grid pairs, linear inside grid intervals."""

    def __init__(self, times, matrix):
        self.times = np.asarray(times, dtype=float)
        self.matrix = np.asarray(matrix, dtype=float)

    def _locate(self, t):
        n = len(self.times) - 1
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, n - 1))
        lam = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return i, float(np.clip(lam, 0.0, 1.0))

    def __call__(self, s, t):
        if t <= s:
            return 0.0
        i, a = self._locate(s)
        j, c = self._locate(t)
        if a == 1.0:
            i, a = i + 1, 0.0
        if i == j or (j == i + 1 and c == 0.0):
            if j == i + 1 and c == 0.0:
                c = 1.0
            return self.matrix[i, i + 1] * (c - a)
        left = self.matrix[i, i + 1] * (1.0 - a)
        right = self.matrix[j, j + 1] * c if j < len(self.times) - 1 else 0.0
        return left + self.matrix[i + 1, j] + right

    def grid_matrix(self, times):
        times = np.asarray(times, dtype=float)
        if len(times) == len(self.times) and np.array_equal(times, self.times):
            return self.matrix
        return super().grid_matrix(times)


def _pvar_table(D: np.ndarray, exponent: float) -> np.ndarray:
    """``V[s, t] = max over grid partitions of [s, t] of sum D[u, v]^exponent``."""
    n = D.shape[0]
    E = np.where(np.triu(np.ones((n, n), dtype=bool), 1), D, 0.0) ** exponent
    V = np.zeros((n, n))
    upper = np.triu(np.ones((n, n), dtype=bool))
    for t in range(1, n):
        cand = V[:t, :t] + E[None, :t, t]
        cand = np.where(upper[:t, :t], cand, -np.inf)
        V[:t, t] = cand.max(axis=1)
    return V


def _pvar_from_start(D: np.ndarray, exponent: float, start: int = 0) -> np.ndarray:
    n = D.shape[0]
    v = np.zeros(n)
    E = D ** exponent
    for t in range(start + 1, n):
        v[t] = np.max(v[start:t] + E[start:t, t])
    return v


def degree_one_multis(spec: GradingSpec) -> list:
    """Multi-indices of ``A^k_{Π,1}`` that survive truncation at ``q``."""
    return multiindices(spec, min(1, spec.q) if spec.exact else min(1.0, float(spec.q)))


def superadditive_closure(W: np.ndarray) -> np.ndarray:
    """Raise entries so ``W[i,j] + W[j,k] <= W[i,k]`` holds in floating point.

    A sum of super-additive tables is super-additive in exact arithmetic, but
    rounding can break the inequality by an ulp; this pass repairs that.
    """
    W = W.copy()
    n = W.shape[0]
    for k in range(2, n):
        i = np.arange(n - k)
        mids = i[:, None] + np.arange(1, k)[None, :]
        best = (W[i[:, None], mids] + W[mids, (i + k)[:, None]]).max(axis=1)
        W[i, i + k] = np.maximum(W[i, i + k], best)
    return W


def pair_stream(X: GridRoughPath, Y: GridRoughPath | None = None):
    """Yield ``(k, X_{t_i, t_{i+k}} - Y_{t_i, t_{i+k}})`` for ``k = 1..N``.

    Rows run over ``i = 0..N-k``; products are left to right, so memory stays
    linear in ``N``.
    """
    b = X.basis
    incX = X.increments.astype(float)
    curX = incX.copy()
    if Y is not None:
        incY = Y.increments.astype(float)
        curY = incY.copy()
    for k in range(1, X.N + 1):
        if k > 1:
            curX = mul(b, curX[:-1], incX[k - 1 :])
            if Y is not None:
                curY = mul(b, curY[:-1], incY[k - 1 :])
        yield k, (curX if Y is None else curX - curY)


def pair_norm_tables(X: GridRoughPath, multis, Y: GridRoughPath | None = None) -> np.ndarray:
    """``T[r, i, j] = ||π_{R_r}(X_{t_i,t_j} - Y_{t_i,t_j})||`` for ``i < j``."""
    n = X.N + 1
    b = X.basis
    out = np.zeros((len(multis), n, n))
    for k, rows in pair_stream(X, Y):
        i = np.arange(n - k)
        norms = component_norms(b, rows, multis)
        out[:, i, i + k] = norms.T
    return out


def pi_variation_distance(X: GridRoughPath, Y: GridRoughPath) -> float:
    """Π-variation distance over partitions drawn from the common grid."""
    if X.spec != Y.spec:
        raise SpecMismatchError("paths have different gradings")
    if X.N != Y.N or not np.allclose(X.times, Y.times, rtol=0, atol=1e-12):
        raise ValueError("paths live on different grids; refine first")
    multis = degree_one_multis(X.spec)
    tables = pair_norm_tables(X, multis, Y)
    best = 0.0
    for D, R in zip(tables, multis):
        d = float(X.basis.degree[R])
        v = _pvar_from_start(D, 1.0 / d)[-1]
        best = max(best, v ** d)
    return float(best)


def control_from_path(X: GridRoughPath) -> GridControl:
    """Sum over ``R`` in ``A^k_{Π,1}`` of the grid variation functionals.

    Each functional ``sup_D sum ||π_R X_{t_l-1, t_l}||^{1/deg R}`` is
    super-additive, so their sum is as well.
    """
    b = X.basis
    multis = [R for R in degree_one_multis(X.spec) if R in b.slices]
    W = np.zeros((X.N + 1, X.N + 1))
    for D, R in zip(pair_norm_tables(X, multis), multis):
        W += _pvar_table(D, 1.0 / float(b.degree[R]))
    return GridControl(X.times, superadditive_closure(W))


@dataclass
class VariationReport:
    """Ratios ``||π_R X_{s,t}|| β^k Γ_Π(R) / ω(s,t)^deg`` over grid pairs."""

    max_ratio: float
    worst: tuple  # (R, s, t)
    passed: bool
    per_multi: dict = field(default_factory=dict)


def _ratio_summary(X: GridRoughPath, omega: ControlFunction, beta: float, degree=None):
    """Per multi-index: largest ratio and the grid pair attaining it."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    q = X.spec.q if degree is None else degree
    b = X.basis
    multis = [R for R in multiindices(X.spec, q) if R in b.slices]
    W = omega.grid_matrix(X.times)
    n = X.N + 1
    degs = np.array([float(b.degree[R]) for R in multis])
    scale = np.array([beta ** X.spec.k * gamma_pi(R, X.spec) for R in multis])
    best = np.zeros(len(multis))
    where = np.zeros((len(multis), 2), dtype=int)
    for k, rows in pair_stream(X):
        i = np.arange(n - k)
        num = component_norms(b, rows, multis) * scale[None, :]
        den = W[i, i + k][:, None] ** degs[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
        arg = np.argmax(r, axis=0)
        top = r[arg, np.arange(len(multis))]
        upd = top > best
        best[upd] = top[upd]
        where[upd, 0] = i[arg[upd]]
        where[upd, 1] = i[arg[upd]] + k
    return multis, best, where


def check_finite_pi_variation(
    X: GridRoughPath, omega: ControlFunction, beta: float, degree=None, rtol: float = 1e-12
) -> VariationReport:
    """Certificate for the finite Π-variation bound on every grid pair.

    Zero control with a non-zero increment counts as an infinite ratio.
    """
    multis, best, where = _ratio_summary(X, omega, beta, degree)
    if not multis:
        return VariationReport(0.0, ((), X.times[0], X.times[0]), True, {})
    m = int(np.argmax(best))
    worst = float(best[m])
    i, j = where[m]
    per = {R: float(v) for R, v in zip(multis, best)}
    return VariationReport(
        worst, (multis[m], float(X.times[i]), float(X.times[j])), worst <= 1.0 + rtol, per
    )


def min_control_scale(X: GridRoughPath, omega: ControlFunction, beta: float, degree=None) -> float:
    """Smallest ``c`` such that the bound holds with ``c ω``."""
    multis, best, _ = _ratio_summary(X, omega, beta, degree)
    c = 0.0
    for R, r in zip(multis, best):
        if r > 0:
            c = max(c, r ** (1.0 / float(X.basis.degree[R])))
    return c


def max_feasible_beta(X: GridRoughPath, omega: ControlFunction, degree=None) -> float:
    """Largest ``β`` for which the factorial bound holds with ``ω``."""
    _, best, _ = _ratio_summary(X, omega, 1.0, degree)
    worst = best.max(initial=0.0)
    if worst == 0:
        return math.inf
    return (1.0 / worst) ** (1.0 / X.spec.k)


def shuffle_check(X: TensorElement, max_pairs: int | None = None, rng=None, relative: bool = False) -> float:
    """Largest shuffle-identity defect over admissible word pairs.

    With ``relative`` each defect is divided by ``max(1, |X^u X^v|, sum |X^w|)``,
    the magnitude at which float rounding enters.
    """
    from .tensor import shuffle_product

    b = X.basis
    spec = X.spec
    words = [w for w in b.words if w]
    pairs = []
    for u in words:
        for v in words:
            cnt = [0] * spec.k
            for a in u + v:
                cnt[b.letter_block[a] - 1] += 1
            if spec.le(spec.deg_counts(cnt), spec.q):
                pairs.append((u, v))
    if max_pairs is not None and len(pairs) > max_pairs:
        rng = np.random.default_rng(rng)
        pairs = [pairs[i] for i in rng.choice(len(pairs), max_pairs, replace=False)]
    worst = 0.0
    c = X.coeffs
    for u, v in pairs:
        lhs = c[b.index[u]] * c[b.index[v]]
        terms = [c[b.index[w]] for w in shuffle_product(u, v)]
        err = abs(float(lhs - sum(terms)))
        if relative:
            err /= max(1.0, abs(float(lhs)), float(sum(abs(x) for x in terms)))
        worst = max(worst, err)
    return worst


def warn_coarse(msg: str):
    warnings.warn(msg, RuntimeWarning, stacklevel=3)


__all__ = [
    "SampledPath",
    "GridRoughPath",
    "segment_signature",
    "lift_path",
    "chen_eval",
    "refine",
    "refine_uniform",
    "concatenate",
    "ControlFunction",
    "LinearControl",
    "GridControl",
    "ScaledControl",
    "pi_variation_distance",
    "pair_stream",
    "pair_norm_tables",
    "control_from_path",
    "check_finite_pi_variation",
    "min_control_scale",
    "max_feasible_beta",
    "VariationReport",
    "shuffle_check",
    "exp_array",
]
