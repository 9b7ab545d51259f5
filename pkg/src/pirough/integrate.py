"""Integration of Lip(Γ,Π) one-forms along geometric Π-rough paths."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import PreconditionError
from .extension import AlmostFunctional, SewReport, extend_signature, path_evaluator, sew
from .grading import GradingSpec, ordered_shuffles
from .oneform import LipForm
from .path import ControlFunction, GridRoughPath, control_from_path, pair_stream
from .tensor import TensorElement, component_norms, get_basis, mul

_CHUNK = 1 << 22
RULES = ("per-term", "sum")


@dataclass(frozen=True)
class _Word:
    prefix: tuple  # derivative word, 0-based letters
    last: int  # letter paired with the L(V, W) argument
    level: object  # Π-degree of the prefix
    degree: object  # Π-degree of prefix + last


class Integrator:
    """Precomputed assembly of the almost-integral for one form and grading.

    Level ``n`` of ``Y_{s,t}`` is

        sum over admitted word tuples (w_1..w_n) of
        c_{w_1}(z_s) ⊗ ... ⊗ c_{w_n}(z_s) · sum_{σ ordered shuffle} Z^{σ(w_1...w_n)}_{s,t}

    with ``c_w(y) = ∂_{w-} α(y)[:, last(w)]`` restricted by the block rule.
    """

    def __init__(self, alpha: LipForm, spec: GradingSpec, q_out=1, rule: str = "per-term"):
        if rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")
        if alpha.spec.p != spec.p or alpha.spec.dims != spec.dims:
            raise ValueError("one-form and path use different gradings")
        self.alpha = alpha
        self.rule = rule
        p_max = spec.p_max
        self.out_spec = GradingSpec((p_max,), (alpha.dim_out,), q_out)
        self.n_max = int(math.floor(float(q_out) * float(p_max) + 1e-9))
        self.words = self._admitted_words(spec)
        self.in_spec = spec.with_degree(self._degree_needed(spec))

    # planning -------------------------------------------------------------------
    def _admitted_words(self, spec) -> list:
        a = self.alpha
        blocks = a.level_basis.letter_block
        out = []
        for s in a.levels:
            mask = a.block_mask(s)
            for u in a.level_words(s):
                for last in np.flatnonzero(mask):
                    deg = s + spec.inv_p(blocks[last])
                    out.append(_Word(tuple(u), int(last), s, deg))
        return out

    def _tuples(self, n: int):
        gmax = self.alpha.gamma_max
        spec = self.alpha.spec
        for tup in itertools.product(range(len(self.words)), repeat=n):
            if self.rule == "sum" and not spec.lt(sum(self.words[k].level for k in tup), gmax):
                continue
            yield tup

    def _degree_needed(self, spec):
        best = 0
        for n in range(1, self.n_max + 1):
            top = max(w.degree for w in self.words) * n
            if self.rule == "sum":
                top = max((sum(self.words[k].degree for k in t) for t in self._tuples(n)), default=0)
            best = max(best, top)
        return best

    @cached_property
    def in_basis(self):
        return get_basis(self.in_spec)

    @cached_property
    def out_basis(self):
        return get_basis(self.out_spec)

    def shuffle_matrix(self, n: int) -> sparse.csr_matrix:
        """``(n_tuples, n_Z)``: row ``tuple`` sums the shuffled Z coefficients."""
        return self._shuffle_matrices[n - 1]

    @cached_property
    def _shuffle_matrices(self) -> list:
        b = self.in_basis
        nw = len(self.words)
        sizes_of = np.array([len(w.prefix) + 1 for w in self.words])
        out = []
        for n in range(1, self.n_max + 1):
            tuples = np.array(list(self._tuples(n)), dtype=np.intp).reshape(-1, n)
            flat = np.ravel_multi_index(tuples.T, (nw,) * n) if len(tuples) else np.zeros(0, np.intp)
            patterns = sizes_of[tuples] if len(tuples) else np.zeros((0, n), np.intp)
            rows, cols = [], []
            for pat in np.unique(patterns, axis=0):
                sel = np.all(patterns == pat, axis=1)
                # letters of each tuple, concatenated block by block
                letters = np.hstack(
                    [self._letters[tuples[sel, j], : pat[j]] for j in range(n)]
                )
                for sigma in ordered_shuffles(*pat.tolist()):
                    # letter j goes to position sigma[j]
                    idx = b.lookup(letters[:, np.argsort(sigma)])
                    rows.append(flat[sel])
                    cols.append(idx)
            rows = np.concatenate(rows) if rows else np.zeros(0, np.intp)
            cols = np.concatenate(cols) if cols else np.zeros(0, np.intp)
            if np.any(cols < 0):
                raise ValueError("signature degree too low for the shuffled words")
            data = np.ones(len(rows))
            out.append(sparse.coo_matrix((data, (rows, cols)), shape=(nw ** n, b.n)).tocsr())
        return out

    @cached_property
    def _letters(self) -> np.ndarray:
        """``(n_words, max_len)`` letter table: prefix letters, then the last letter."""
        L = max(len(w.prefix) + 1 for w in self.words)
        out = np.zeros((len(self.words), L), dtype=np.intp)
        for k, w in enumerate(self.words):
            seq = w.prefix + (w.last,)
            out[k, : len(seq)] = seq
        return out

    # evaluation -----------------------------------------------------------------
    def coefficients(self, points: np.ndarray) -> np.ndarray:
        """``c_w(y)`` for every admitted word: shape ``(m, n_words, W)``."""
        a = self.alpha
        m = len(points)
        C = np.empty((m, len(self.words), a.dim_out))
        cache: dict = {}
        for k, w in enumerate(self.words):
            if w.prefix not in cache:
                cache[w.prefix] = a.derivative(w.prefix, points)
            C[:, k] = cache[w.prefix][:, :, w.last]
        return C

    def assemble(self, points: np.ndarray, Zvals: np.ndarray) -> np.ndarray:
        """Almost-integral rows from base points ``(m, D)`` and ``Z_{s,t}`` rows."""
        b = self.out_basis
        m = len(points)
        nw = len(self.words)
        out = np.zeros((m, b.n))
        out[:, 0] = 1.0
        step = max(1, _CHUNK // max(1, nw ** self.n_max + Zvals.shape[1]))
        for lo in range(0, m, step):
            hi = min(m, lo + step)
            C = self.coefficients(points[lo:hi])
            for n in range(1, self.n_max + 1):
                S = (self.shuffle_matrix(n) @ Zvals[lo:hi].T).T
                T = S.reshape((hi - lo,) + (nw,) * n)
                for _ in range(n):
                    T = np.einsum("mk...,mkw->m...w", T, C)
                out[lo:hi, b.slices[(1,) * n]] = T.reshape(hi - lo, -1)
        return out


def _prepare(alpha: LipForm, Z: GridRoughPath, q_out, rule, tol, max_depth, omega=None):
    if alpha.spec.p != Z.spec.p or alpha.spec.dims != Z.spec.dims:
        raise ValueError("one-form and path use different gradings")
    if not alpha.precondition_ok:
        raise PreconditionError("gamma_i > 1 - 1/p_i fails for this one-form")
    if not alpha.theta > 1:
        raise PreconditionError(f"theta = min(gamma_i + 1/p_i) = {alpha.theta} must exceed 1")
    integ = Integrator(alpha, Z.spec, q_out, rule)
    need = integ.in_spec.q
    Zx = Z
    if Z.spec.lt(Z.spec.q, need):
        Zx = extend_signature(Z, need, tol=tol, max_depth=max_depth, omega=omega, certify=False)
    return integ, Zx


def integral_evaluator(integ: Integrator, Z: GridRoughPath):
    zev = path_evaluator(Z, integ.in_spec.q)

    def evaluator(s, t):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return integ.assemble(Z.positions(s), zev(s, t).astype(float))

    return evaluator


def almost_integral(
    alpha: LipForm, Z: GridRoughPath, s: float, t: float, *, q_out=1, rule="per-term", tol=1e-10
) -> TensorElement:
    """``Y_{s,t}``: the local approximant of ``∫ α(Z) dZ`` at base point ``π_V(Z_{0,s})``."""
    integ, Zx = _prepare(alpha, Z, q_out, rule, tol, 20)
    return TensorElement(integ.out_spec, integral_evaluator(integ, Zx)([s], [t])[0])


@dataclass
class IntegralResult:
    result: GridRoughPath
    theta: float
    sewing: SewReport
    K_report: float | None = None  # bound constant over grid pairs
    alpha_norm: float | None = None
    omega: ControlFunction | None = None


def integrate_oneform(
    alpha: LipForm,
    Z: GridRoughPath,
    tol: float = 1e-10,
    *,
    q_out=1,
    rule: str = "per-term",
    max_depth: int = 20,
    omega: ControlFunction | None = None,
    certify: bool = True,
    box=None,
    seed=0,
) -> IntegralResult:
    """Sew the almost-integral into the rough path ``∫ α(Z) dZ`` over ``W``.

    The output grading is homogeneous ``(p_max)`` over ``W`` truncated at
    ``q_out``.  With ``certify`` the bound constant ``K`` of
    ``||π_n ∫α(Z)dZ_{s,t}|| <= K ||α||^n ω(s,t)^{n/p_max}`` is reported.
    """
    integ, Zx = _prepare(alpha, Z, q_out, rule, tol, max_depth, omega)
    omega = omega if omega is not None else control_from_path(Z)
    Y = AlmostFunctional(integ.out_spec, Z.times, integral_evaluator(integ, Zx), alpha.theta, omega)
    X = sew(Y, tol, max_depth, certify=certify)
    res = IntegralResult(X, alpha.theta, X.report, omega=omega)
    if certify:
        if box is None:
            pos = Z.values()
            pad = 1e-9 + 0.05 * (pos.max(axis=0) - pos.min(axis=0))
            box = (pos.min(axis=0) - pad, pos.max(axis=0) + pad)
        res.alpha_norm = alpha.lip_norm(box, seed=seed)
        res.K_report = bound_constant(X, omega, res.alpha_norm, Z.spec.p_max)
    return res


def bound_constant(X: GridRoughPath, omega: ControlFunction, alpha_norm: float, p_max) -> float:
    """``max ||π_n X_{s,t}|| / (||α||^n ω(s,t)^{n/p_max})`` over grid pairs and levels."""
    W = omega.grid_matrix(X.times)
    n = X.N + 1
    b = X.basis
    multis = b.multis[1:]
    lvl = np.array([len(R) for R in multis], dtype=float)
    K = 0.0
    for k, rows in pair_stream(X):
        i = np.arange(n - k)
        norms = component_norms(b, rows, multis)
        den = alpha_norm ** lvl[None, :] * W[i, i + k][:, None] ** (lvl[None, :] / float(p_max))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den > 0, norms / np.where(den > 0, den, 1.0), np.where(norms > 1e-300, np.inf, 0.0))
        K = max(K, float(r.max(initial=0.0)))
    return K


@dataclass
class DefectCertificate:
    sizes: np.ndarray
    defects: np.ndarray
    slope: float
    theta: float
    passed: bool


def defect_certificate(
    alpha: LipForm,
    Z: GridRoughPath,
    *,
    levels: int = 6,
    coarsest: int = 3,
    q_out=1,
    rule: str = "per-term",
    starts: int = 8,
    floor: float = 1e-13,
    slack: float = 0.1,
) -> DefectCertificate:
    """Log-log slope of the almost-integral's multiplicativity defect.

    For interval sizes ``T/2^k`` (``coarsest <= k < coarsest + levels``) the defect is the largest
    ``||Y_su ⊗ Y_ut - Y_st||`` over midpoint splits of up to ``starts``
    intervals of that size.  Defects below ``floor`` count as exact.
    """
    integ, Zx = _prepare(alpha, Z, q_out, rule, 1e-10, 20)
    ev = integral_evaluator(integ, Zx)
    b = integ.out_basis
    T0, T1 = Z.times[0], Z.times[-1]
    sizes, defects = [], []
    for k in range(coarsest, coarsest + levels):
        h = (T1 - T0) / 2 ** k
        count = 2 ** k
        js = np.unique(np.linspace(0, count - 1, min(starts, count)).round().astype(int))
        s = T0 + js * h
        u, t = s + h / 2, s + h
        lhs = mul(b, ev(s, u), ev(u, t))
        d = component_norms(b, lhs - ev(s, t)).max(initial=0.0)
        sizes.append(h)
        defects.append(d)
    sizes = np.array(sizes)
    defects = np.array(defects)
    use = defects > floor
    theta = alpha.theta
    if use.sum() < 2:
        return DefectCertificate(sizes, defects, math.inf, theta, True)
    slope = float(np.polyfit(np.log(sizes[use]), np.log(defects[use]), 1)[0])
    return DefectCertificate(sizes, defects, slope, theta, slope >= theta - slack)


__all__ = [
    "Integrator",
    "IntegralResult",
    "DefectCertificate",
    "almost_integral",
    "integrate_oneform",
    "defect_certificate",
    "bound_constant",
]
