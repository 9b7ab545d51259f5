"""Differential equations ``dY = f(X, Y) dX`` driven by geometric Π-rough paths.

The solution is the fixed point ``Z = ∫ h0(Z) dZ`` on ``V ⊕ W`` with grading
``Π* = (p_1, ..., p_k, p_max)`` at degree 1.  Picard iterates are computed on
local windows whose driver control stays below ``ε^{p_max}`` and pasted
forward.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .errors import ConvergenceError, PreconditionError
from .grading import GradingSpec, degree_split, parse_number
from .integrate import integrate_oneform
from .oneform import LipForm, poly_oneform
from .path import (
    GridRoughPath,
    LinearControl,
    SampledPath,
    check_finite_pi_variation,
    concatenate,
    control_from_path,
    max_feasible_beta,
    min_control_scale,
    pair_stream,
    pi_variation_distance,
    refine_uniform,
)
from .polynomial import Polynomial, symbols
from .tensor import component_norms, get_basis, linear_image_array

log = logging.getLogger(__name__)

VARIANTS = ("h0", "h1", "h2", "h3")
SEEDS = ("zero", "euler")


# -- problem data -----------------------------------------------------------------


def difference_quotient(f: Polynomial, dim_x: int) -> list:
    """``G0`` with ``f(x, u1) - f(x, u2) = G0(x, u1, u2)(u1 - u2)``.

    ``G0(x, u1, u2) = ∫_0^1 ∂_y f(x, u2 + τ(u1 - u2)) dτ``, returned as one
    polynomial per direction ``j`` of ``W`` on variables ``(x, u1, u2)``.
    """
    e = f.shape[0]
    x = symbols(dim_x, "x")
    u1 = symbols(e, "u")
    u2 = symbols(e, "w")
    tau = sp.Symbol("tau")
    F = f.to_sympy(x + u1)
    out = []
    allv = x + u1 + u2
    for j in range(e):
        dF = F.diff(u1[j])
        path = {u1[i]: u2[i] + tau * (u1[i] - u2[i]) for i in range(e)}
        G = dF.xreplace(path).applyfunc(lambda c: sp.integrate(sp.expand(c), (tau, 0, 1)))
        out.append(Polynomial.from_sympy(G, allv))
    return out


@dataclass
class RdeProblem:
    """``dY = f(X_t, Y_t) dX_t`` with ``Y_0 = ξ``.

    ``f`` is a polynomial on ``(x, y)`` with values of shape ``(e, dim V)``.
    ``g`` optionally supplies the difference quotient (see
    :func:`difference_quotient`); it is derived symbolically when absent.
    ``gamma`` lists ``γ_1..γ_{k+3}``; shorter lists repeat their last entry.
    ``refine`` splits every driver interval before solving, which trades
    time for accuracy; solutions are reported on the refined grid.
    """

    f: Polynomial
    xi: np.ndarray
    driver: GridRoughPath
    rho: float = 2.0
    gamma: tuple | None = None
    g: list | None = None
    tol: float = 1e-10
    max_iter: int = 50
    refine: int = 1
    seed: str = "zero"
    sew_tol: float | None = None
    degree: object = 1

    def __post_init__(self):
        self.xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if self.f.shape != (len(self.xi), self.driver.spec.dim):
            raise ValueError(
                f"f has shape {self.f.shape}, expected {(len(self.xi), self.driver.spec.dim)}"
            )
        if self.f.n_vars != self.driver.spec.dim + len(self.xi):
            raise ValueError("f must be a polynomial in (x, y)")
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")
        if self.seed not in SEEDS:
            raise ValueError(f"seed must be one of {SEEDS}")
        self.degree = parse_number(self.degree)
        if self.degree < 1:
            raise ValueError("degree must be at least 1")
        if self.driver.spec.q != self.degree:
            self.driver = _with_degree(self.driver, self.degree)
        k = self.driver.spec.k
        gam = (2,) if self.gamma is None else tuple(self.gamma)
        gam = tuple(parse_number(v) for v in gam)
        if len(gam) < k + 3:
            gam = gam + (gam[-1],) * (k + 3 - len(gam))
        self.gamma = gam[: k + 3]

    @property
    def dim_x(self) -> int:
        return self.driver.spec.dim

    @property
    def dim_y(self) -> int:
        return len(self.xi)

    def spec_for(self, copies: int) -> GradingSpec:
        """Grading of ``V ⊕ W^copies``: ``(p_1..p_k, p_max, ..., p_max)``."""
        s = self.driver.spec
        return GradingSpec(
            tuple(s.p) + (s.p_max,) * copies, tuple(s.dims) + (self.dim_y,) * copies, self.degree
        )

    @property
    def pi_star(self) -> GradingSpec:
        return self.spec_for(1)

    def quotient(self) -> list:
        if self.g is None:
            self.g = difference_quotient(self.f, self.dim_x)
        return self.g


def _with_degree(X: GridRoughPath, q) -> GridRoughPath:
    if X.spec.lt(q, X.spec.q):
        return X.with_degree(q)
    from .extension import extend_signature

    return extend_signature(X, q, certify=False)


# -- system one-forms ----------------------------------------------------------------


def _shifted(poly: Polynomial, syms, shift) -> sp.Matrix:
    """Sympy matrix of ``poly`` with ``shift`` added to the matching variables."""
    sub = {s: s + sp.Rational(float(c)) for s, c in zip(syms, shift) if c != 0}
    M = poly.to_sympy(syms)
    return M.xreplace(sub) if sub else M


def system_matrix(problem: RdeProblem, variant: str):
    """Symbolic block matrix of ``h0..h3`` and its variables."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    dx, e = problem.dim_x, problem.dim_y
    copies = {"h0": 1, "h1": 2, "h2": 3, "h3": 3}[variant]
    x = symbols(dx, "x")
    ys = [symbols(e, f"y{c}_") for c in range(copies)]
    allv = x + sum(ys, ())
    D = dx + copies * e
    H = sp.zeros(D, D)
    H[:dx, :dx] = sp.eye(dx)

    def f_at(y):
        return _shifted(problem.f, x + y, (0,) * dx + tuple(problem.xi))

    def g_row(y1, y2, d):
        G = problem.quotient()
        shift = (0,) * dx + tuple(problem.xi) * 2
        out = sp.zeros(e, dx)
        for j, Gj in enumerate(G):
            out += _shifted(Gj, x + y1 + y2, shift) * d[j]
        return out * sp.Rational(float(problem.rho))

    r0 = dx
    if variant == "h0":
        H[r0:, :dx] = f_at(ys[0])
    elif variant == "h1":
        H[r0 : r0 + e, r0 + e :] = sp.eye(e)
        H[r0 + e :, :dx] = f_at(ys[1])
    elif variant == "h2":
        H[r0 : r0 + e, r0 + e : r0 + 2 * e] = sp.eye(e)
        H[r0 + e : r0 + 2 * e, :dx] = f_at(ys[1])
        H[r0 + 2 * e :, :dx] = g_row(ys[0], ys[1], ys[2])
    else:
        H[r0 : r0 + e, :dx] = f_at(ys[0])
        H[r0 + e : r0 + 2 * e, r0 + e : r0 + 2 * e] = sp.eye(e)
        H[r0 + 2 * e :, :dx] = g_row(ys[0], ys[1], ys[2])
    return H, allv


def build_system_oneform(problem: RdeProblem, variant: str = "h0", *, box=None) -> LipForm:
    """``h0..h3`` as polynomial one-forms on ``V ⊕ W^c``.

    ``h3`` evaluates ``f`` at ``(x, y + ξ)`` like the other variants.
    """
    if variant in ("h2", "h3") and problem.g is None:
        problem.quotient()
    H, allv = system_matrix(problem, variant)
    copies = {"h0": 1, "h1": 2, "h2": 3, "h3": 3}[variant]
    spec = problem.spec_for(copies)
    poly = Polynomial.from_sympy(H, allv)
    gamma = problem.gamma[: spec.k]
    return poly_oneform(poly, gamma, spec, box=box)


# -- Picard iteration --------------------------------------------------------------------


def _x_words(spec: GradingSpec, dim_x: int) -> tuple:
    b = get_basis(spec)
    return np.array([i for i, w in enumerate(b.words) if w and max(w) < dim_x], dtype=int)


def embed_driver(X: GridRoughPath, spec: GradingSpec, slopes=None) -> GridRoughPath:
    """``(X, Y)`` with ``dY = A_i dX`` on interval ``i`` (``Y ≡ 0`` without slopes)."""
    dx = X.spec.dim
    D = spec.dim
    inc = X.increments.astype(float)
    if slopes is None:
        M = np.zeros((D, dx))
        M[:dx] = np.eye(dx)
        rows = linear_image_array(X.spec, spec, M, inc)
    else:
        rows = np.empty((X.N, get_basis(spec).n))
        for i in range(X.N):
            M = np.zeros((D, dx))
            M[:dx] = np.eye(dx)
            M[dx:] = slopes[i]
            rows[i] = linear_image_array(X.spec, spec, M, inc[i])
    base = np.concatenate([X.basepoint, np.zeros(D - dx)])
    return GridRoughPath(spec, X.times, rows, base)


def euler_seed(problem: RdeProblem, X: GridRoughPath, xi) -> GridRoughPath:
    """Seed path from the explicit Euler scheme on the grid."""
    spec = problem.pi_star
    lvl = X.level_one
    xs = X.values()
    y = np.zeros(problem.dim_y)
    slopes = np.empty((X.N, problem.dim_y, problem.dim_x))
    for i in range(X.N):
        A = problem.f(np.concatenate([xs[i], y + xi]))
        slopes[i] = A
        y = y + A @ lvl[i]
    return embed_driver(X, spec, slopes)


def picard_step(
    Z: GridRoughPath,
    h: LipForm,
    X: GridRoughPath | None = None,
    *,
    tol: float = 1e-12,
    max_depth: int = 20,
) -> GridRoughPath:
    """One step ``Z -> ∫ h(Z) dZ`` re-read on ``Z``'s grading.

    The integral lives on the homogeneous grading over the same space; its
    words are copied into ``Z``'s basis.  With a driver ``X`` the pure driver
    words are overwritten by ``X`` itself.
    """
    omega = LinearControl(1.0)
    res = integrate_oneform(h, Z, tol, q_out=Z.spec.q, max_depth=max_depth, omega=omega, certify=False)
    I = res.result
    src = I.basis
    dst = Z.basis
    cols = np.array([src.index[w] for w in dst.words])
    inc = I.increments[:, cols]
    if X is not None:
        xw = _x_words(Z.spec, X.spec.dim)
        xb = X.basis
        inc[:, xw] = X.increments[:, [xb.index[dst.words[i]] for i in xw]]
    return GridRoughPath(Z.spec, Z.times, inc, Z.basepoint)


# -- solve ------------------------------------------------------------------------------


@dataclass
class WindowLog:
    start: float
    end: float
    distances: list
    slope: float
    residual: float
    iterations: int


@dataclass
class RdeSolution:
    """Fixed point ``Z = (X, Y - ξ)`` on ``Π*`` with window logs."""

    Z: GridRoughPath
    xi: np.ndarray
    windows: list
    M: float
    eps: float
    s_star: float
    iterates: list = field(default_factory=list)
    lip_norm: float | None = None
    K: float | None = None

    @property
    def dim_x(self) -> int:
        return self.Z.spec.dim - len(self.xi)

    @property
    def times(self) -> np.ndarray:
        return self.Z.times

    def Y(self) -> np.ndarray:
        """Solution values ``Y_t`` on the grid, shape ``(N+1, e)``."""
        return self.xi[None, :] + self.Z.values()[:, self.dim_x :]

    @property
    def distances(self) -> list:
        return [w.distances for w in self.windows]

    @property
    def slopes(self) -> list:
        return [w.slope for w in self.windows]

    @property
    def residual(self) -> float:
        return max((w.residual for w in self.windows), default=0.0)

    def to_json(self) -> dict:
        return {
            "Z": self.Z.to_json(),
            "xi": [float(v) for v in self.xi],
            "Y": self.Y().tolist(),
            "M": float(self.M),
            "eps": float(self.eps),
            "s_star": float(self.s_star),
            "K": None if self.K is None else float(self.K),
            "lip_norm": None if self.lip_norm is None else float(self.lip_norm),
            "windows": [
                {
                    "start": float(w.start),
                    "end": float(w.end),
                    "distances": [float(d) for d in w.distances],
                    "slope": float(w.slope),
                    "residual": float(w.residual),
                    "iterations": int(w.iterations),
                }
                for w in self.windows
            ],
        }


def s_star(spec: GradingSpec) -> float:
    """Largest element of ``S^Π`` not exceeding 1."""
    return float(degree_split(spec)[0])


def contraction_slope(distances, start: int = 2, floor: float = 1e-13) -> float:
    """Least-squares slope of ``log d_n`` against ``n`` for ``n >= start``.

    Distances below ``floor`` are rounding noise and are skipped; fewer than
    two usable points give ``-inf`` (convergence faster than any rate).
    """
    d = np.asarray(distances, dtype=float)
    n = np.arange(len(d))
    use = (n >= start) & (d > floor)
    if use.sum() < 2:
        return -math.inf
    return float(np.polyfit(n[use], np.log(d[use]), 1)[0])


def _box_for(problem: RdeProblem, Z: GridRoughPath, copies: int = 1):
    pos = Z.values()
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    pad = 0.1 * (hi - lo) + 0.1
    return lo - pad, hi + pad


def estimate_M(problem: RdeProblem, X: GridRoughPath):
    """``M = max(1, K^{p_max/n} ||h0||^{p_max})`` over levels ``n`` of the bound.

    ``K`` and ``||h0||`` come from integrating ``h0`` once along the Euler
    seed on the whole horizon.
    """
    Z = euler_seed(problem, X, problem.xi)
    box = _box_for(problem, Z)
    h0 = build_system_oneform(problem, "h0", box=box)
    omega = control_from_path(Z)
    res = integrate_oneform(h0, Z, _sew_tol(problem), q_out=1, omega=omega, certify=True, box=box)
    p = float(Z.spec.p_max)
    nmax = max(1, int(math.floor(p + 1e-9)))
    K = res.K_report
    cand = [K ** (p / n) for n in range(1, nmax + 1)] if K > 0 else [0.0]
    M = max(1.0, max(cand) * res.alpha_norm ** p)
    return M, K, res.alpha_norm


def _sew_tol(problem: RdeProblem) -> float:
    return problem.sew_tol if problem.sew_tol is not None else min(1e-12, problem.tol * 1e-2)


def select_windows(omega0, times, target: float) -> list:
    """Greedy windows ``[t_a, t_b]`` with ``ω0(t_a, t_b) <= target``.

    A window never has fewer than one grid interval; if a single interval
    already exceeds the target it is used anyway with a warning.
    """
    W = omega0.grid_matrix(times)
    N = len(times) - 1
    out = []
    a = 0
    while a < N:
        row = W[a, a + 1 :]
        ok = np.flatnonzero(row <= target * (1 + 1e-12))
        b = a + 1 + int(ok.max()) if len(ok) else a + 1
        if not len(ok):
            warnings.warn(
                f"grid interval [{times[a]}, {times[a + 1]}] exceeds the local horizon target",
                RuntimeWarning,
                stacklevel=2,
            )
        out.append((a, b))
        a = b
    return out


def _solve_window(problem, X, xi, *, keep, seed):
    spec = problem.pi_star
    local = RdeProblem(
        problem.f,
        xi,
        X,
        problem.rho,
        problem.gamma,
        problem.g,
        problem.tol,
        problem.max_iter,
        1,
        problem.seed,
        problem.sew_tol,
        problem.degree,
    )
    Z = euler_seed(local, X, xi) if seed == "euler" else embed_driver(X, spec)
    box = _box_for(local, Z)
    h0 = build_system_oneform(local, "h0", box=box)
    dists = []
    iterates = [Z] if keep else []
    stol = _sew_tol(problem)
    for n in range(problem.max_iter):
        Zn = picard_step(Z, h0, X, tol=stol)
        d = pi_variation_distance(Z, Zn)
        dists.append(d)
        if keep:
            iterates.append(Zn)
        log.debug("picard window [%g, %g] step %d: distance %.3e", X.times[0], X.times[-1], n, d)
        Z = Zn
        if not math.isfinite(d) or d > 1e100:
            break
        if d < problem.tol:
            resid = pi_variation_distance(Z, picard_step(Z, h0, X, tol=stol))
            return Z, dists, resid, iterates
    raise ConvergenceError(
        f"Picard iteration on [{X.times[0]}, {X.times[-1]}] did not reach tol={problem.tol}", dists
    )


def solve_rde(problem: RdeProblem, *, keep_iterates: bool = False, seed: str | None = None) -> RdeSolution:
    """Local Picard solves pasted forward into a solution on the whole grid."""
    seed = problem.seed if seed is None else seed
    if seed not in SEEDS:
        raise ValueError(f"seed must be one of {SEEDS}")
    X = refine_uniform(problem.driver, problem.refine) if problem.refine > 1 else problem.driver
    spec = problem.pi_star
    # certify the Lipschitz preconditions of h0, h1, h2 up front
    for v in ("h0", "h1", "h2"):
        build_system_oneform(problem, v)
    M, K, lip = estimate_M(problem, X)
    s_m = s_star(spec)
    eps = M ** (-s_m)
    omega0 = control_from_path(X)
    windows = select_windows(omega0, X.times, eps ** float(spec.p_max))
    xi = problem.xi.copy()
    pieces, logs, iterates = [], [], []
    for a, b in windows:
        Xw = X.restrict(a, b)
        Zw, dists, resid, its = _solve_window(problem, Xw, xi, keep=keep_iterates, seed=seed)
        logs.append(
            WindowLog(float(X.times[a]), float(X.times[b]), dists, contraction_slope(dists), resid, len(dists))
        )
        pieces.append(Zw)
        iterates.extend(its)
        xi = xi + Zw.values()[-1, problem.dim_x :]
    Z = concatenate(pieces)
    Z = GridRoughPath(Z.spec, Z.times, Z.increments, np.concatenate([X.basepoint, np.zeros(problem.dim_y)]))
    return RdeSolution(Z, problem.xi.copy(), logs, M, eps, s_m, iterates, lip, K)


# -- diagnostics -------------------------------------------------------------------------


@dataclass
class UniquenessReport:
    max_ratio: float
    ratios: dict
    eps: float
    h3_distances: list = field(default_factory=list)


def uniqueness_probe(
    problem: RdeProblem,
    candidate: RdeSolution,
    reference: RdeSolution,
    *,
    h3_steps: int = 0,
) -> UniquenessReport:
    """Comparison ratios ``||π_R((X,Y) - (X,Ŷ))|| / ((ε + ε^{|R|}) ω^{|R|/p_max})``.

    ``ω = ε^{-p_max} ω0`` with ``ω0`` the driver's control.  With
    ``h3_steps > 0`` the joint iteration ``(X, Y(n), Ŷ, ρ^n(Ŷ - Y(n)))`` is
    run from ``(X, 0, Ŷ, Ŷ)`` and the Π-variation sizes of its last block are
    logged.
    """
    Z, R = candidate.Z, reference.Z
    if Z.N != R.N or not np.allclose(Z.times, R.times, atol=1e-12):
        raise ValueError("solutions live on different grids")
    eps = candidate.eps
    p = float(Z.spec.p_max)
    dx = candidate.dim_x
    Xonly = GridRoughPath(
        problem.driver.spec, Z.times, Z.increments[:, _x_driver_cols(Z.spec, problem.driver.spec, dx)], None
    )
    omega = control_from_path(Xonly).scaled(eps ** (-p))
    W = omega.grid_matrix(Z.times)
    b = Z.basis
    from .path import degree_one_multis

    multis = [m for m in degree_one_multis(Z.spec) if m in b.slices]
    lens = np.array([len(m) for m in multis], dtype=float)
    scale = eps + eps ** lens
    best = np.zeros(len(multis))
    n = Z.N + 1
    for k, rows in pair_stream(Z, R):
        i = np.arange(n - k)
        num = component_norms(b, rows, multis)
        den = scale[None, :] * W[i, i + k][:, None] ** (lens[None, :] / p)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
        best = np.maximum(best, r.max(axis=0))
    ratios = {m: float(v) for m, v in zip(multis, best)}
    rep = UniquenessReport(float(best.max(initial=0.0)), ratios, eps)
    if h3_steps:
        rep.h3_distances = _h3_iteration(problem, candidate, reference, h3_steps)
    return rep


def _x_driver_cols(spec: GradingSpec, xspec: GradingSpec, dx: int) -> np.ndarray:
    b = get_basis(spec)
    xb = get_basis(xspec)
    return np.array([b.index[w] for w in xb.words])


def _h3_iteration(problem, candidate, reference, steps) -> list:
    """Sizes of the ``ρ^n(Ŷ - Y(n))`` block along the ``h3`` iteration.

    Runs on a single window (the first one of ``candidate``) from
    ``(X, 0, Ŷ, Ŷ)``.
    """
    w = candidate.windows[0]
    Z = reference.Z
    a, b = Z.index_of(w.start), Z.index_of(w.end)
    Zr = Z.restrict(a, b)
    dx, e = problem.dim_x, problem.dim_y
    spec3 = problem.spec_for(3)
    D3 = dx + 3 * e
    M = np.zeros((D3, dx + e))
    M[:dx, :dx] = np.eye(dx)
    M[dx + e : dx + 2 * e, dx:] = np.eye(e)
    M[dx + 2 * e :, dx:] = np.eye(e)
    inc = linear_image_array(Zr.spec, spec3, M, Zr.increments)
    Z3 = GridRoughPath(spec3, Zr.times, inc, None)
    Xw = GridRoughPath(
        problem.driver.spec, Zr.times, Zr.increments[:, _x_driver_cols(Zr.spec, problem.driver.spec, dx)], None
    )
    h3 = build_system_oneform(problem, "h3", box=_box_for(problem, Z3))
    out = []
    d_block = np.zeros(D3, dtype=bool)
    d_block[dx + 2 * e :] = True
    for _ in range(steps):
        Z3 = picard_step(Z3, h3, Xw, tol=_sew_tol(problem))
        vals = Z3.values()[:, d_block]
        out.append(float(np.abs(vals).max(initial=0.0)))
    return out


@dataclass
class ScalingCertificate:
    M: float
    eps: float
    beta: float
    max_ratio: float
    passed: bool


def scaling_certificate(Z: GridRoughPath, dim_x: int, eps: float | None = None) -> ScalingCertificate:
    """Check that ``(X, εY)`` is controlled by the driver's control.

    ``ω`` is the driver's control, ``β`` the largest value for which it
    controls ``X``, and ``M >= 1`` the smallest factor with ``Z`` controlled
    by ``M ω``.  ``ε`` defaults to ``M^{-s*}``.
    """
    spec = Z.spec
    k = spec.k
    xcols = [i for i, w in enumerate(Z.basis.words) if all(a < dim_x for a in w)]
    xspec = GradingSpec(spec.p[:-1], spec.dims[:-1], spec.q)
    X = GridRoughPath(xspec, Z.times, Z.increments[:, xcols], None)
    omega = control_from_path(X)
    beta = max_feasible_beta(X, omega)
    if not math.isfinite(beta):
        beta = 1.0
    M = max(1.0, min_control_scale(Z, omega, beta))
    eps = M ** (-s_star(spec)) if eps is None else eps
    D = Z.dilate([k], eps)
    rep = check_finite_pi_variation(D, omega, beta)
    return ScalingCertificate(M, eps, beta, rep.max_ratio, rep.passed)


def ode_oracle(
    f: Polynomial, xi, driver: SampledPath, steps: int = 10_000, *, min_step: float = 1e-14
) -> SampledPath:
    """Classical RK4 for ``dY = f(X_t, Y) Ẋ dt`` along a piecewise-linear driver.

    Every driver segment gets ``ceil(steps / N)`` substeps.  Values are
    returned at the driver's sample times.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    t = driver.times.astype(float)
    x = driver.values.astype(float)
    N = len(t) - 1
    sub = max(1, math.ceil(steps / N))
    y = xi.copy()
    out = [y.copy()]
    for i in range(N):
        dt = (t[i + 1] - t[i]) / sub
        if dt < min_step:
            raise ValueError("step size underflow")
        vel = (x[i + 1] - x[i]) / (t[i + 1] - t[i])

        def rhs(tau, y):
            xt = x[i] + (tau - t[i]) * vel
            return f(np.concatenate([xt, y])) @ vel

        tau = t[i]
        for _ in range(sub):
            k1 = rhs(tau, y)
            k2 = rhs(tau + dt / 2, y + dt / 2 * k1)
            k3 = rhs(tau + dt / 2, y + dt / 2 * k2)
            k4 = rhs(tau + dt, y + dt * k3)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            tau += dt
        out.append(y.copy())
    return SampledPath(t, np.array(out))


# -- serialisation ------------------------------------------------------------------------


def problem_from_json(data: dict, driver: GridRoughPath) -> RdeProblem:
    """Read ``{"f_poly", "xi", "rho", "gamma", "tol", "max_iter"}``.

    Optional keys: ``refine``, ``seed`` (``zero`` or ``euler``) and
    ``degree`` (truncation degree carried by the iterates).
    """
    xi = np.atleast_1d(np.asarray(data["xi"], dtype=float))
    e, dx = len(xi), driver.spec.dim
    f = Polynomial.from_json(data["f_poly"], dx + e, (e, dx))
    return RdeProblem(
        f,
        xi,
        driver,
        rho=float(data.get("rho", 2.0)),
        gamma=data.get("gamma"),
        tol=float(data.get("tol", 1e-10)),
        max_iter=int(data.get("max_iter", 50)),
        refine=int(data.get("refine", 1)),
        seed=data.get("seed", "zero"),
        degree=data.get("degree", 1),
    )


__all__ = [
    "RdeProblem",
    "RdeSolution",
    "UniquenessReport",
    "ScalingCertificate",
    "build_system_oneform",
    "system_matrix",
    "difference_quotient",
    "picard_step",
    "solve_rde",
    "uniqueness_probe",
    "scaling_certificate",
    "ode_oracle",
    "contraction_slope",
    "select_windows",
    "estimate_M",
    "euler_seed",
    "embed_driver",
    "s_star",
    "problem_from_json",
]
