"""Lip(Γ,Π) one-forms: derivative stacks, Taylor remainders and norms."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import MissingLevelError, PreconditionError
from .grading import GradingSpec, degree_set, parse_number
from .polynomial import Polynomial
from .tensor import TensorElement, get_basis

DerivFn = Callable[[tuple, np.ndarray], np.ndarray]


def _box(box, dim: int) -> tuple:
    if box is None:
        box = 1.0
    if np.isscalar(box):
        r = float(box)
        return -r * np.ones(dim), r * np.ones(dim)
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    if lo.shape != (dim,) or hi.shape != (dim,) or np.any(hi < lo):
        raise ValueError("box must be a pair of bounds of matching dimension")
    return lo, hi


def _box_points(lo, hi, n: int, seed) -> np.ndarray:
    """Latin-hypercube samples plus all box corners (corners capped at 2^12)."""
    dim = len(lo)
    pts = qmc.scale(qmc.LatinHypercube(d=dim, seed=seed).random(n), lo, hi) if n else np.empty((0, dim))
    if dim <= 12:
        grid = np.array(np.meshgrid(*[[a, b] for a, b in zip(lo, hi)], indexing="ij"))
        corners = grid.reshape(dim, -1).T
        pts = np.vstack([pts, corners])
    return pts


class LipForm:
    """A one-form ``α: V -> L(V, W)`` with Lip(Γ,Π) derivative data.

    ``deriv(word, points)`` returns ``∂_word α`` at a batch of points as an
    array ``(m, W, V)``; words are tuples of 0-based coordinates.  Level
    ``s_m`` acts on a degree-``s_m`` tensor ``v`` by
    ``α^{s_m}(y)(v) = sum_w v_w ∂_w α(y)``, keeping only the columns of
    blocks ``i`` with ``s_m < γ_i``.
    """

    def __init__(
        self,
        spec: GradingSpec,
        dim_out: int,
        gamma: Sequence,
        deriv: DerivFn,
        *,
        M: float | None = None,
        box=None,
        force: bool = False,
        poly: Polynomial | None = None,
    ):
        gamma = tuple(parse_number(g) for g in gamma)
        if len(gamma) != spec.k:
            raise ValueError(f"need {spec.k} entries in gamma, got {len(gamma)}")
        if any(g <= 0 for g in gamma):
            raise ValueError("gamma entries must be positive")
        self.spec = spec
        self.dim_out = int(dim_out)
        self.gamma = gamma
        self._deriv = deriv
        self.poly = poly
        self.box = _box(box, spec.dim)
        bad = [i + 1 for i, (g, p) in enumerate(zip(gamma, spec.p)) if not g > 1 - 1 / p]
        self.precondition_ok = not bad
        if bad and not force:
            raise PreconditionError(f"gamma_i <= 1 - 1/p_i for blocks {bad}")
        if bad:
            warnings.warn(f"integrability precondition fails for blocks {bad}", RuntimeWarning, stacklevel=2)
        self._M = M

    # structure -----------------------------------------------------------------
    @property
    def dim_in(self) -> int:
        return self.spec.dim

    @property
    def gamma_max(self):
        return max(self.gamma)

    @property
    def theta(self) -> float:
        """``min_i γ_i + 1/p_i``."""
        return min(float(g) + 1.0 / float(p) for g, p in zip(self.gamma, self.spec.p))

    @cached_property
    def levels(self) -> list:
        """Degrees ``s_m < γ_max``, starting with 0."""
        gmax = self.gamma_max
        out = [s for s in degree_set(self.spec, gmax, include_zero=True) if self.spec.lt(s, gmax)]
        return out

    @cached_property
    def level_spec(self) -> GradingSpec:
        return self.spec.with_degree(self.levels[-1])

    @cached_property
    def level_basis(self):
        return get_basis(self.level_spec)

    def _level_key(self, s):
        for lv in self.levels:
            if self.spec.eq(lv, s):
                return lv
        raise MissingLevelError(f"{s} is not a level below gamma_max={self.gamma_max}")

    def level_words(self, s) -> list:
        """Words (0-based letters) of Π-degree ``s``."""
        s = self._level_key(s)
        b = self.level_basis
        return [w for w in b.words if self.spec.eq(b.degree[b.word_multi[b.index[w]]], s)]

    def block_mask(self, s) -> np.ndarray:
        """Columns of ``L(V, W)`` kept at level ``s``: blocks ``i`` with ``s < γ_i``."""
        blocks = np.array(self.level_basis.letter_block)
        keep = [self.spec.lt(s, g) for g in self.gamma]
        return np.array([keep[b - 1] for b in blocks])

    # evaluation ------------------------------------------------------------------
    def derivative(self, word, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self._deriv(tuple(word), pts)

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = self.derivative((), y)
        return out[0] if y.ndim == 1 else out

    def level_tensor(self, s, points) -> np.ndarray:
        """Masked stack ``(m, n_words, W, V)`` of ``α^{s}(y)(e_w)``."""
        words = self.level_words(s)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mask = self.block_mask(s)
        out = np.stack([self.derivative(w, pts) for w in words], axis=1)
        out[..., ~mask] = 0.0
        return out

    def level_apply(self, s, y, v) -> np.ndarray:
        """``α^{s}(y)(v)`` as a ``(W, V)`` matrix.

        ``v`` is a :class:`TensorElement` or a coefficient vector over the
        words of degree ``s``; other components are ignored.
        """
        words = self.level_words(s)
        if isinstance(v, TensorElement):
            b = v.basis
            coeff = np.array([float(v.coeffs[b.index[w]]) if w in b.index else 0.0 for w in words])
        else:
            coeff = np.asarray(v, dtype=float).reshape(len(words))
        stack = self.level_tensor(s, np.asarray(y, dtype=float)[None, :])[0]
        return np.einsum("n,nwv->wv", coeff, stack)

    def remainder(self, s, x, y) -> np.ndarray:
        """``R^{s}(x, y)`` on the words of degree ``s``: shape ``(n_words, W, V)``.

        ``α^s(y)(e_u)`` minus its block-truncated Taylor expansion at ``x``:
        for columns of block ``i`` the sum runs over words ``R`` with
        ``s + deg R < γ_i`` of ``∂_{uR} α(x) (y - x)_R / |R|!``.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.remainder_batch(s, x[None], y[None])[0]

    def remainder_batch(self, s, xs, ys) -> np.ndarray:
        """:meth:`remainder` over point pairs, shape ``(m, n_words, W, V)``."""
        words = self.level_words(s)
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        d = ys - xs
        mask = self.block_mask(s)
        col_block = np.array(self.level_basis.letter_block)
        out = np.stack([self.derivative(u, ys) for u in words], axis=1)
        for R, deg in self._taylor_words:
            cols = np.array([self.spec.lt(s + deg, g) for g in self.gamma])
            cmask = cols[col_block - 1] & mask
            if not cmask.any():
                continue
            w = np.prod(d[:, list(R)], axis=1) / math.factorial(len(R))
            for n, u in enumerate(words):
                D = self.derivative(u + R, xs)
                out[:, n][:, :, cmask] -= w[:, None, None] * D[:, :, cmask]
        out[..., ~mask] = 0.0
        return out

    @cached_property
    def _taylor_basis(self):
        return get_basis(self.spec.with_degree(self.gamma_max))

    @cached_property
    def _taylor_words(self) -> list:
        b = self._taylor_basis
        out = []
        for w in b.words:
            deg = b.degree[b.word_multi[b.index[w]]]
            if self.spec.lt(deg, self.gamma_max):
                out.append((w, deg))
        return out

    def remainder_scale(self, s, xs, ys) -> np.ndarray:
        """``sum_j ||π_{V^j}(x - y)||^{(γ_i - s) p_j}`` per pair and block ``i``."""
        d = np.atleast_2d(np.asarray(xs, dtype=float) - np.asarray(ys, dtype=float))
        offs = self.spec.offsets
        norms = [np.linalg.norm(d[:, o : o + n], axis=1) for o, n in zip(offs, self.spec.dims)]
        out = np.zeros((len(d), self.spec.k))
        for i, g in enumerate(self.gamma):
            e = float(g) - float(s)
            out[:, i] = sum(n ** (e * float(p)) for n, p in zip(norms, self.spec.p))
        return out

    def remainder_ratios(self, xs, ys) -> np.ndarray:
        """Largest ``||R_i^{s}(x,y)|| / scale_i`` over levels and blocks, per pair."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        worst = np.zeros(len(xs))
        blocks = np.array(self.level_basis.letter_block)
        for s in self.levels:
            R = self.remainder_batch(s, xs, ys)
            scale = self.remainder_scale(s, xs, ys)
            for i in range(self.spec.k):
                if not self.spec.lt(s, self.gamma[i]):
                    continue
                nrm = np.sqrt((R[..., blocks == i + 1] ** 2).sum(axis=(1, 2, 3)))
                with np.errstate(divide="ignore", invalid="ignore"):
                    r = np.where(scale[:, i] > 0, nrm / np.where(scale[:, i] > 0, scale[:, i], 1.0),
                                 np.where(nrm > 0, np.inf, 0.0))
                worst = np.maximum(worst, r)
        return worst

    def remainder_ratio(self, x, y) -> float:
        return float(self.remainder_ratios(x, y)[0])

    # constants -------------------------------------------------------------------
    def estimate_M(self, box=None, n_pairs: int = 10_000, seed=0) -> float:
        """Largest sampled remainder ratio over Latin-hypercube pairs in the box."""
        lo, hi = self.box if box is None else _box(box, self.spec.dim)
        dim = self.spec.dim
        u = qmc.LatinHypercube(d=2 * dim, seed=seed).random(n_pairs)
        xs = lo + (hi - lo) * u[:, :dim]
        ys = lo + (hi - lo) * u[:, dim:]
        return float(self.remainder_ratios(xs, ys).max(initial=0.0))

    @property
    def M(self) -> float:
        if self._M is None:
            self._M = self.estimate_M()
        return self._M

    def sup_levels(self, box=None, n: int = 2000, seed=0) -> float:
        """Largest Frobenius norm of any level map on the box (samples and corners)."""
        lo, hi = self.box if box is None else _box(box, self.spec.dim)
        pts = _box_points(lo, hi, n, seed)
        worst = 0.0
        for s in self.levels:
            T = self.level_tensor(s, pts)
            worst = max(worst, float(np.sqrt((T ** 2).sum(axis=(1, 2, 3))).max(initial=0.0)))
        return worst

    def lip_norm(self, box=None, n: int = 2000, n_pairs: int = 10_000, seed=0) -> float:
        """``max(level sup-norms, M)`` on the box."""
        M = self.M if box is None else self.estimate_M(box, n_pairs, seed)
        return max(self.sup_levels(box, n, seed), M)

    def check_precondition(self):
        if not self.precondition_ok:
            raise PreconditionError("gamma_i > 1 - 1/p_i fails for this one-form")

    # serialisation -----------------------------------------------------------------
    def to_json(self) -> dict:
        if self.poly is None:
            raise TypeError("only polynomial one-forms serialise")
        return {
            "pi": [str(p) if not isinstance(p, float) else p for p in self.spec.p],
            "dims_in": list(self.spec.dims),
            "dim_out": self.dim_out,
            "gamma": [str(g) if not isinstance(g, float) else g for g in self.gamma],
            "poly": self.poly.to_json(),
        }


def poly_oneform(
    poly: Polynomial, gamma, spec: GradingSpec, *, box=None, M=None, force=False
) -> LipForm:
    """One-form whose derivative data are the exact partials of a polynomial."""
    W, V = poly.shape
    if V != spec.dim or poly.n_vars != spec.dim:
        raise ValueError(f"polynomial acts on {poly.n_vars} variables, spec has {spec.dim}")

    def deriv(word, pts):
        return poly.partial(word)(pts)

    return LipForm(spec, W, gamma, deriv, M=M, box=box, force=force, poly=poly)


def constant_oneform(matrix, gamma, spec: GradingSpec, **kw) -> LipForm:
    A = np.asarray(matrix, dtype=float)
    poly = Polynomial(np.zeros((1, spec.dim), dtype=np.int64), A[None], spec.dim)
    return poly_oneform(poly, gamma, spec, **kw)


def oneform_from_json(data: dict, spec: GradingSpec | None = None, **kw) -> LipForm:
    """Read ``{"dims_in", "dim_out", "gamma", "poly", ["pi"]}``."""
    dims = tuple(int(d) for d in data["dims_in"])
    if spec is None:
        if "pi" not in data:
            raise ValueError("one-form JSON needs 'pi' unless a grading is given")
        spec = GradingSpec(data["pi"], dims)
    elif tuple(spec.dims) != dims:
        raise ValueError(f"one-form dims {dims} do not match grading dims {spec.dims}")
    W = int(data["dim_out"])
    poly = Polynomial.from_json(data["poly"], spec.dim, (W, spec.dim))
    return poly_oneform(poly, data["gamma"], spec, **kw)


@dataclass
class LipCertificate:
    lip_norm: float
    M: float
    theta: float
    precondition_ok: bool


def certify(alpha: LipForm, box=None, seed=0) -> LipCertificate:
    return LipCertificate(alpha.lip_norm(box, seed=seed), alpha.M, alpha.theta, alpha.precondition_ok)
