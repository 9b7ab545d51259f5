"""Sewing of almost multiplicative functionals and signature extension."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceError
from .grading import GradingSpec, beta_lower_bound, degree_set
from .path import (
    ControlFunction,
    GridRoughPath,
    LinearControl,
    control_from_path,
    max_feasible_beta,
    min_control_scale,
    pair_stream,
)
from .tensor import change_degree, component_norms, exp_array, get_basis, mul

log = logging.getLogger(__name__)

_CHUNK = 1 << 22
_GRID_TOL = 1e-12

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class AlmostFunctional:
    """A two-parameter functional ``Y_{s,t}`` that is multiplicative up to ``ω^θ``.

    ``evaluator(s, t)`` takes equal-length time arrays and returns coefficient
    rows ``(m, n)``.  It must accept pairs strictly inside grid intervals,
    because sewing refines below the grid.
    """

    spec: GradingSpec
    times: np.ndarray
    evaluator: Evaluator
    theta: float
    omega: ControlFunction

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if not self.theta > 1:
            raise ValueError(f"theta must exceed 1, got {self.theta}")

    @property
    def basis(self):
        return get_basis(self.spec)

    @property
    def N(self) -> int:
        return len(self.times) - 1

    def __call__(self, s, t) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.evaluator(s, t)

    def grid_values(self) -> np.ndarray:
        """``V[i, j] = Y_{t_i, t_j}`` for ``i < j``; the diagonal holds the unit."""
        n = self.N + 1
        i, j = np.triu_indices(n, 1)
        vals = self(self.times[i], self.times[j])
        V = np.zeros((n, n, self.basis.n), dtype=vals.dtype)
        V[i, j] = vals
        V[np.arange(n), np.arange(n), 0] = 1
        return V

    def perturbed(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "AlmostFunctional":
        """Same functional plus ``fn(s, t)`` (rows of coefficients)."""
        base = self.evaluator
        return AlmostFunctional(
            self.spec, self.times, lambda s, t: base(s, t) + fn(s, t), self.theta, self.omega
        )

    @classmethod
    def from_path(
        cls,
        X: GridRoughPath,
        theta: float,
        omega: ControlFunction | None = None,
        q=None,
    ) -> "AlmostFunctional":
        """Wrap a grid path; inside intervals values follow ``exp(λ log X_i)``.

        With ``q`` above the path's degree the evaluator embeds into the larger
        algebra and leaves the new components at zero.
        """
        spec = X.spec if q is None else X.spec.with_degree(q)
        omega = omega if omega is not None else control_from_path(X)
        return cls(spec, X.times, path_evaluator(X, q), theta, omega)


def path_evaluator(X: GridRoughPath, q=None) -> Evaluator:
    """Batched ``(s, t) -> X_{s,t}`` accepting off-grid times.

    Grid pairs use the stored ordered products; pairs inside one interval use
    the geodesic.  With ``q`` above the path's degree, components the path
    does not carry are returned as zero.
    """
    spec = X.spec if q is None else X.spec.with_degree(q)
    dst = get_basis(spec)
    keep = np.array([w in X.basis.index for w in dst.words])
    times = X.times
    N = X.N
    logs = change_degree(X.spec, spec.q, X.logs) if spec != X.spec else X.logs

    def on_grid(t):
        k = np.clip(np.searchsorted(times, t), 0, N)
        km = np.clip(k - 1, 0, N)
        near_k = np.abs(times[k] - t) <= _GRID_TOL * np.maximum(1.0, np.abs(t))
        near_km = np.abs(times[km] - t) <= _GRID_TOL * np.maximum(1.0, np.abs(t))
        idx = np.where(near_k, k, km)
        return idx, near_k | near_km

    def evaluator(s, t):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((len(s), dst.n), dtype=object if X.exact else float)
        i_s, g_s = on_grid(s)
        i_t, g_t = on_grid(t)
        grid = g_s & g_t
        if grid.any():
            src = (
                X.products(i_s[grid], i_t[grid])
                if not X.exact
                else np.array([X._product(a, b) for a, b in zip(i_s[grid], i_t[grid])])
            )
            out[grid] = change_degree(X.spec, spec.q, src) if spec != X.spec else src
        rest = ~grid
        if rest.any():
            ss, tt = s[rest], t[rest]
            mid = 0.5 * (ss + tt)
            idx = np.clip(np.searchsorted(times, mid, side="right") - 1, 0, N - 1)
            h = times[idx + 1] - times[idx]
            inside = (ss >= times[idx] - _GRID_TOL * h) & (tt <= times[idx + 1] + _GRID_TOL * h)
            vals = np.zeros((len(ss), dst.n))
            if inside.any():
                lam = (tt[inside] - ss[inside]) / h[inside]
                vals[inside] = exp_array(dst, logs[idx[inside]] * lam[:, None])
            for r in np.flatnonzero(~inside):
                vals[r] = X.between(ss[r], tt[r], q=spec.q).coeffs
            vals[:, ~keep] = 0.0
            out[rest] = vals
        return out

    return evaluator


# -- defect ----------------------------------------------------------------------


@dataclass
class DefectReport:
    """Worst ratio ``||π_R(Y_su Y_ut - Y_st)|| / ω(s,t)^θ`` over grid triples."""

    ratio: float
    worst: tuple  # (R, s, u, t)
    max_defect: float


def multiplicativity_defect(Y: AlmostFunctional) -> DefectReport:
    if Y.N < 2:
        raise ValueError("need at least three grid points")
    b = Y.basis
    V = Y.grid_values()
    W = Y.omega.grid_matrix(Y.times)
    multis = b.multis[1:]
    n = Y.N + 1
    best = (0.0, ((), Y.times[0], Y.times[0], Y.times[0]), 0.0)
    for i in range(n - 2):
        for k in range(i + 2, n):
            js = np.arange(i + 1, k)
            prod = mul(b, V[i, js], V[js, k])
            diff = prod - V[i, k][None, :]
            norms = component_norms(b, diff, multis)
            raw = float(norms.max(initial=0.0))
            den = W[i, k] ** Y.theta
            if raw == 0:
                continue
            ratio = raw / den if den > 0 else math.inf
            if ratio > best[0] or (best[0] == 0 and ratio > 0):
                jj, rr = np.unravel_index(np.argmax(norms), norms.shape)
                best = (
                    ratio,
                    (multis[rr], float(Y.times[i]), float(Y.times[js[jj]]), float(Y.times[k])),
                    max(best[2], raw),
                )
            else:
                best = (best[0], best[1], max(best[2], raw))
    return DefectReport(*best)


# -- sewing ----------------------------------------------------------------------


def exponent_ladder(theta: float, count: int) -> list:
    """The first ``count`` values of ``{a(θ-1) + b : a, b >= 0}`` above zero."""
    g = float(theta) - 1.0
    vals = set()
    top = count + 1
    for a in range(int(top / g) + 2 if g > 0 else 1):
        for b in range(top + 1):
            v = a * g + b
            if v > 1e-12:
                vals.add(round(v, 12))
    return sorted(vals)[:count]


@dataclass
class SewReport:
    """Diagnostics of a sewing run."""

    depth: np.ndarray  # returned refinement level per interval
    raw_distances: list  # max over intervals of ||D_d - D_{d-1}||
    distances: list  # same for the extrapolated estimates
    branching: int
    exponents: list
    K: float | None = None
    theta: float = 0.0

    def decay_ratios(self, floor: float = 0.0) -> list:
        """Ratios of successive extrapolated distances above ``floor``."""
        d = [x for x in self.distances if x > floor]
        return [b / a for a, b in zip(d, d[1:]) if a > 0]


def _reduce(basis, pieces: np.ndarray, r: int) -> np.ndarray:
    """Ordered product along axis 1 of ``pieces`` (shape ``(m, r^d, n)``)."""
    while pieces.shape[1] > 1:
        m, L, n = pieces.shape
        groups = pieces.reshape(m, L // r, r, n)
        acc = groups[:, :, 0].reshape(-1, n)
        for c in range(1, r):
            acc = mul(basis, acc, groups[:, :, c].reshape(-1, n))
        pieces = acc.reshape(m, L // r, n)
    return pieces[:, 0]


def sew(
    Y: AlmostFunctional,
    tol: float = 1e-10,
    max_depth: int = 20,
    *,
    branching: int = 2,
    extrapolate: bool = True,
    max_exponents: int = 8,
    certify: bool = True,
) -> GridRoughPath:
    """Limit of ordered products of ``Y`` over refinements of each grid interval.

    Successive refinement levels are combined by Richardson extrapolation
    with the exponent ladder of :func:`exponent_ladder`; a level is accepted
    once it differs from the next one by less than ``tol``.  The returned path
    carries a :class:`SewReport` in ``.report``.
    """
    if branching not in (2, 3):
        raise ValueError("branching must be 2 or 3")
    b = Y.basis
    r = branching
    N = Y.N
    exps = exponent_ladder(Y.theta, max_exponents) if extrapolate else []
    factors = [r ** e - 1.0 for e in exps]
    result = np.zeros((N, b.n))
    depth = np.full(N, -1)
    raw_log: list = []
    ext_log: list = []

    a_all, b_all = Y.times[:-1], Y.times[1:]
    active = np.arange(N)
    prev_row: np.ndarray | None = None  # Richardson row for active intervals
    prev_raw: np.ndarray | None = None
    for d in range(max_depth + 1):
        L = r ** d
        D = np.empty((len(active), b.n))
        step = max(1, _CHUNK // (L * b.n))
        frac = np.arange(L + 1) / L
        for lo in range(0, len(active), step):
            idx = active[lo : lo + step]
            pts = a_all[idx, None] + (b_all - a_all)[idx, None] * frac[None, :]
            pts[:, -1] = b_all[idx]
            vals = Y(pts[:, :-1].ravel(), pts[:, 1:].ravel()).astype(float)
            D[lo : lo + step] = _reduce(b, vals.reshape(len(idx), L, b.n), r)
        row = [D]
        if prev_row is not None:
            for k in range(min(d, len(exps))):
                row.append(row[k] + (row[k] - prev_row[k]) / factors[k])
        est = row[-1]
        if prev_row is None:
            raw_log.append(0.0)
            ext_log.append(0.0)
            prev_row, prev_raw = row, D
            continue
        prev_est = prev_row[-1]
        dist = component_norms(b, est - prev_est).max(axis=1, initial=0.0)
        rawd = component_norms(b, D - prev_raw).max(axis=1, initial=0.0)
        raw_log.append(float(rawd.max(initial=0.0)))
        ext_log.append(float(dist.max(initial=0.0)))
        done = dist < tol
        result[active[done]] = prev_est[done]
        depth[active[done]] = d - 1
        keep = ~done
        active = active[keep]
        log.debug("sew level %d: raw %.3e extrapolated %.3e active %d", d, raw_log[-1], ext_log[-1], len(active))
        if len(active) == 0:
            break
        prev_row = [x[keep] for x in row]
        prev_raw = D[keep]
    if len(active):
        raise ConvergenceError(
            f"sewing did not reach tol={tol} within depth {max_depth} on {len(active)} intervals",
            ext_log[-2:],
        )
    X = GridRoughPath(Y.spec, Y.times, result, None)
    report = SewReport(depth, raw_log[1:], ext_log[1:], r, exps, theta=float(Y.theta))
    if certify:
        report.K = sewing_constant(X, Y)
    X.report = report
    return X


def sewing_constant(X: GridRoughPath, Y: AlmostFunctional) -> float:
    """``max ||π_R(X_st - Y_st)|| / ω(s,t)^θ`` over grid pairs and components."""
    b = X.basis
    n = X.N + 1
    W = Y.omega.grid_matrix(Y.times)
    K = 0.0
    for k, rows in pair_stream(X):
        i = np.arange(n - k)
        diff = rows - Y(Y.times[i], Y.times[i + k]).astype(float)
        norms = component_norms(b, diff).max(axis=1, initial=0.0)
        den = W[i, i + k] ** Y.theta
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den > 0, norms / np.where(den > 0, den, 1.0), np.where(norms > 0, np.inf, 0.0))
        K = max(K, float(r.max(initial=0.0)))
    return K


# -- extension ---------------------------------------------------------------------


@dataclass
class ExtensionReport:
    levels: list = field(default_factory=list)  # (degree, SewReport)
    beta: float = math.nan  # largest β with the factorial bound under ω
    beta_lower: float = math.nan
    omega_scale: float = math.nan  # factor c so that c·ω works with beta_lower
    passed: bool = False  # a finite control scale certifies the bound at beta_lower


def extend_signature(
    X: GridRoughPath,
    q,
    tol: float = 1e-10,
    max_depth: int = 20,
    *,
    branching: int = 2,
    omega: ControlFunction | None = None,
    certify: bool = True,
) -> GridRoughPath:
    """Extend a multiplicative functional degree by degree up to ``q``.

    At each new degree the almost functional keeps the components already
    built, sets the new ones to zero, and is sewn with ``θ`` equal to the new
    degree.  The result carries an :class:`ExtensionReport` in ``.report``.
    """
    spec = X.spec
    target = spec.with_degree(q)
    if target.le(q, spec.q):
        if target.lt(q, spec.q):
            warnings.warn(
                f"degree {q} is below the current degree {spec.q}; nothing to extend",
                RuntimeWarning,
                stacklevel=2,
            )
        return X
    if X.exact:
        X = GridRoughPath(spec, X.times, X.increments.astype(float), X.basepoint)
    report = ExtensionReport()
    cur = X
    # controls are built from the degree-1 part of the input
    omega = omega if omega is not None else control_from_path(X)
    for s in degree_set(spec, q):
        if spec.le(s, cur.spec.q):
            continue
        Y = AlmostFunctional.from_path(cur, float(s), omega, q=s)
        sewn = sew(Y, tol, max_depth, branching=branching, certify=certify)
        report.levels.append((s, sewn.report))
        inc = sewn.increments.copy()
        # components already built are kept verbatim; sewing only adds the new ones
        old = cur.basis
        cols = [sewn.basis.index[w] for w in old.words]
        inc[:, cols] = cur.increments
        cur = GridRoughPath(sewn.spec, sewn.times, inc, X.basepoint)
    if cur.spec.q != target.q:
        cur = GridRoughPath(target, cur.times, change_degree(cur.spec, target.q, cur.increments), X.basepoint)
    if certify:
        report.beta = max_feasible_beta(cur, omega)
        try:
            report.beta_lower = beta_lower_bound(spec)
            report.omega_scale = min_control_scale(cur, omega, report.beta_lower)
        except ArithmeticError:
            pass
        report.passed = bool(report.beta > 0 and not math.isnan(report.omega_scale) and math.isfinite(report.omega_scale))
    cur.report = report
    return cur


__all__ = [
    "AlmostFunctional",
    "DefectReport",
    "ExtensionReport",
    "LinearControl",
    "SewReport",
    "exponent_ladder",
    "extend_signature",
    "multiplicativity_defect",
    "path_evaluator",
    "sew",
    "sewing_constant",
]
