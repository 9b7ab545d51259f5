import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pirough.errors import OffGridError
from pirough.grading import GradingSpec, multiindices
from pirough.path import (
    GridRoughPath,
    LinearControl,
    SampledPath,
    chen_eval,
    check_finite_pi_variation,
    concatenate,
    control_from_path,
    lift_path,
    max_feasible_beta,
    min_control_scale,
    pi_variation_distance,
    refine,
    refine_uniform,
    segment_signature,
    shuffle_check,
)
from pirough.tensor import TensorElement

F = Fraction


def random_path(rng, spec, N, T=1.0):
    times = np.sort(rng.uniform(0, T, N - 1))
    times = np.concatenate([[0.0], times, [T]])
    vals = np.cumsum(rng.normal(size=(N + 1, spec.dim)) * 0.5, axis=0)
    return SampledPath(times, vals)


def iterated_oracle(sp, word, sub=400):
    """Nested trapezoid quadrature of the iterated integral along ``word`` (0-based letters)."""
    ts = np.concatenate(
        [np.linspace(a, b, sub, endpoint=False) for a, b in zip(sp.times[:-1], sp.times[1:])]
        + [[sp.times[-1]]]
    )
    x = np.array([sp.at(t) for t in ts])
    inner = np.ones(len(ts))
    for a in word:
        dx = np.diff(x[:, a])
        inner = np.concatenate([[0.0], np.cumsum(0.5 * (inner[1:] + inner[:-1]) * dx)])
    return inner[-1]


class TestSegment:
    def test_zero(self):
        spec = GradingSpec((2,), (2,), 1)
        assert segment_signature([1, 2], [1, 2], spec) == TensorElement.one(spec)

    def test_closed_form(self):
        spec = GradingSpec((2,), (2,), 1)
        s = segment_signature([0, 0], [1, 2], spec)
        np.testing.assert_array_equal(s.vector(), [1, 2])
        np.testing.assert_allclose(s.component((1, 1)), np.outer([1, 2], [1, 2]) / 2)

    def test_equals_exp(self, rng):
        spec = GradingSpec((1, 3), (1, 2), 1)
        v = rng.normal(size=3)
        assert segment_signature(np.zeros(3), v, spec).allclose(TensorElement.from_vector(spec, v).exp(), atol=1e-14)

    def test_quadrature(self, rng):
        spec = GradingSpec((3,), (2,), 1)
        sp = SampledPath([0.0, 1.0], [[0.0, 0.0], rng.normal(size=2)])
        s = segment_signature(sp.values[0], sp.values[1], spec)
        b = s.basis
        for w in b.words:
            if 0 < len(w) <= 2:
                assert s.coeffs[b.index[w]] == pytest.approx(iterated_oracle(sp, w, 4), abs=1e-12)

    def test_inverse(self, rng):
        spec = GradingSpec((2, 3), (1, 2), 2)
        x, y = rng.normal(size=3), rng.normal(size=3)
        prod = segment_signature(x, y, spec) * segment_signature(y, x, spec)
        assert prod.allclose(TensorElement.one(spec), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            segment_signature([0], [1, 2], GradingSpec((2,), (2,), 1))


class TestLift:
    def test_l_shape(self):
        spec = GradingSpec((2,), (2,), 1)
        X = lift_path(SampledPath([0, 1, 2], [[0, 0], [1, 0], [1, 1]]), spec)
        S = chen_eval(X, 0, 2)
        assert S.coefficient(((1, 1), (1, 2))) == 1
        assert S.coefficient(((1, 2), (1, 1))) == 0
        area = 0.5 * (S.coefficient(((1, 1), (1, 2))) - S.coefficient(((1, 2), (1, 1))))
        assert area == 0.5

    def test_single_segment(self, rng):
        spec = GradingSpec((2,), (3,), 1)
        v = rng.normal(size=(2, 3))
        X = lift_path(SampledPath([0, 1], v), spec)
        assert X.increment(0).allclose(segment_signature(v[0], v[1], spec), atol=0)

    def test_multi_segment_quadrature(self, rng):
        spec = GradingSpec((3,), (2,), 1)
        sp = random_path(rng, spec, 5)
        S = lift_path(sp, spec).chen_eval(0.0, 1.0)
        b = S.basis
        for w in b.words:
            if 0 < len(w) <= 2:
                assert S.coeffs[b.index[w]] == pytest.approx(iterated_oracle(sp, w), abs=1e-10)
        w = (0, 1, 0)
        assert S.coeffs[b.index[w]] == pytest.approx(iterated_oracle(sp, w, 2000), abs=1e-5)

    def test_collinear_midpoints(self, rng):
        spec = GradingSpec((1, 2), (1, 1), 2)
        sp = random_path(rng, spec, 4)
        mids_t = 0.5 * (sp.times[1:] + sp.times[:-1])
        mids_v = 0.5 * (sp.values[1:] + sp.values[:-1])
        t2 = np.empty(2 * len(sp.times) - 1)
        v2 = np.empty((len(t2), 2))
        t2[0::2], t2[1::2] = sp.times, mids_t
        v2[0::2], v2[1::2] = sp.values, mids_v
        X, Y = lift_path(sp, spec), lift_path(SampledPath(t2, v2), spec)
        for s, t in itertools.combinations(sp.times, 2):
            assert X.chen_eval(s, t).allclose(Y.chen_eval(s, t), atol=1e-12)

    def test_exact_mode(self):
        spec = GradingSpec((2,), (2,), 1)
        sp = SampledPath([0, 1, 2, 3], np.array([[0, 0], [F(1, 3), 1], [1, F(-1, 2)], [2, 2]], dtype=object))
        X = lift_path(sp, spec, exact=True)
        assert X.exact
        S = X.chen_eval(0, 3)
        assert S.scalar == 1 and isinstance(S.coeffs[1], Fraction)
        assert shuffle_check(S) == 0.0

    def test_bad_times(self):
        with pytest.raises(ValueError):
            SampledPath([0, 1, 1], [[0], [1], [2]])


PI_CHOICES = [(1,), (2,), (3,), (1, 2), (2, 3)]


class TestChen:
    @pytest.mark.parametrize("p", PI_CHOICES)
    def test_exact_on_grid(self, p, rng):
        spec = GradingSpec(p, (1,) * len(p), 2 if len(p) == 1 else 1)
        X = lift_path(random_path(rng, spec, 8), spec, exact=False)
        t = X.times
        for i, j, k in [(0, 3, 8), (1, 1, 5), (2, 6, 7)]:
            assert X.chen_eval(t[i], t[j]) * X.chen_eval(t[j], t[k]) == X.chen_eval(t[i], t[k]) or (
                (X.chen_eval(t[i], t[j]) * X.chen_eval(t[j], t[k])).allclose(X.chen_eval(t[i], t[k]), atol=1e-13)
            )
        assert chen_eval(X, t[3], t[3]) == TensorElement.one(spec)
        assert shuffle_check(X.chen_eval(t[0], t[-1])) < 1e-10

    def test_exact_fraction_chen(self, rng):
        spec = GradingSpec((2, 3), (1, 1), 1)
        vals = np.array([[F(int(a), 7), F(int(b), 5)] for a, b in rng.integers(-9, 9, size=(6, 2))], dtype=object)
        X = lift_path(SampledPath(np.arange(6.0), vals), spec, exact=True)
        for i, j, k in itertools.combinations(range(6), 3):
            assert X.chen_eval(i, j) * X.chen_eval(j, k) == X.chen_eval(i, k)

    def test_off_grid(self, rng):
        spec = GradingSpec((2,), (1,), 1)
        X = lift_path(random_path(rng, spec, 3), spec)
        with pytest.raises(OffGridError):
            X.chen_eval(0.0, 0.123456789)

    def test_refine_between(self, rng):
        spec = GradingSpec((1, 2), (1, 1), 1)
        X = lift_path(random_path(rng, spec, 4), spec)
        Y = refine_uniform(X, 3)
        assert Y.N == 12
        for s, t in itertools.combinations(X.times, 2):
            assert Y.chen_eval(s, t).allclose(X.chen_eval(s, t), atol=1e-12)
        s, t = 0.2 * X.times[1], 0.5 * (X.times[2] + X.times[3])
        Z = refine(X, [s, t])
        assert Z.chen_eval(s, t).allclose(X.between(s, t), atol=1e-12)

    def test_concatenate_restrict(self, rng):
        spec = GradingSpec((2,), (2,), 1)
        X = lift_path(random_path(rng, spec, 6), spec)
        Y = concatenate([X.restrict(0, 2), X.restrict(2, 6)])
        np.testing.assert_allclose(Y.increments, X.increments)
        np.testing.assert_allclose(Y.values(), X.values())

    def test_json(self, rng):
        spec = GradingSpec((1, 2), (1, 2), 1)
        X = lift_path(random_path(rng, spec, 3), spec)
        Y = GridRoughPath.from_json(X.to_json())
        np.testing.assert_allclose(Y.increments, X.increments, atol=0)
        np.testing.assert_allclose(Y.basepoint, X.basepoint)


def brute_variation(incr_norm, exponent, N):
    """sup over every partition of {0..N} of sum norm(a, b)**exponent."""
    best = 0.0
    for r in range(N):
        for cuts in itertools.combinations(range(1, N), r):
            pts = (0,) + cuts + (N,)
            best = max(best, sum(incr_norm(a, b) ** exponent for a, b in zip(pts, pts[1:])))
    return best


class TestVariation:
    def test_zero_distance(self, rng):
        spec = GradingSpec((2,), (2,), 1)
        X = lift_path(random_path(rng, spec, 5), spec)
        assert pi_variation_distance(X, X) == 0

    def test_example_half(self):
        spec = GradingSpec((2,), (1,), 1)
        X = lift_path(SampledPath([0, 1, 2], [[0], [1], [0.5]]), spec)
        Y = lift_path(SampledPath([0, 1, 2], [[0], [0], [0]]), spec)
        # the level-two word also contributes; the level-one sup is 1.25
        d = pi_variation_distance(X, Y)
        assert d >= 1.25 ** 0.5 - 1e-15
        spec1 = GradingSpec((2,), (1,), F(1, 2))
        X1 = lift_path(SampledPath([0, 1, 2], [[0], [1], [0.5]]), spec1)
        Y1 = lift_path(SampledPath([0, 1, 2], [[0], [0], [0]]), spec1)
        assert pi_variation_distance(X1, Y1) == pytest.approx(1.25 ** 0.5, abs=1e-15)

    def test_total_variation(self, rng):
        spec = GradingSpec((1,), (1,), 1)
        sp = random_path(rng, spec, 7)
        X = lift_path(sp, spec)
        Y = lift_path(SampledPath(sp.times, np.zeros_like(sp.values)), spec)
        assert pi_variation_distance(X, Y) == pytest.approx(np.abs(np.diff(sp.values[:, 0])).sum(), rel=1e-14)

    @pytest.mark.parametrize("p", [(2,), (1, 2), (3,)])
    def test_dp_vs_brute_force(self, p, rng):
        spec = GradingSpec(p, (1,) * len(p), 1)
        N = 6
        X = lift_path(random_path(rng, spec, N), spec)
        Y = lift_path(random_path(rng, spec, N), spec)
        Y = GridRoughPath(spec, X.times, Y.increments)
        want = 0.0
        b = X.basis
        for R in multiindices(spec, 1):
            d = float(b.degree[R])

            def nrm(a, c, R=R):
                return (X.chen_eval(X.times[a], X.times[c]) - Y.chen_eval(Y.times[a], Y.times[c])).norm(R)

            want = max(want, brute_variation(nrm, 1 / d, N) ** d)
        assert pi_variation_distance(X, Y) == pytest.approx(want, rel=1e-12)

    def test_pseudometric(self, rng):
        spec = GradingSpec((1, 2), (1, 1), 1)
        paths = [lift_path(random_path(np.random.default_rng(s), spec, 5), spec) for s in range(3)]
        X, Y, Z = (GridRoughPath(spec, paths[0].times, P.increments) for P in paths)
        assert pi_variation_distance(X, Y) == pi_variation_distance(Y, X)
        assert pi_variation_distance(X, Z) <= pi_variation_distance(X, Y) + pi_variation_distance(Y, Z) + 1e-12

    def test_control(self, rng):
        spec = GradingSpec((1, 2), (1, 2), 1)
        X = lift_path(random_path(rng, spec, 7), spec)
        W = control_from_path(X).matrix
        n = X.N + 1
        assert np.all(np.diag(W) == 0) and np.all(W >= 0)
        for i, j, k in itertools.combinations(range(n), 3):
            assert W[i, j] + W[j, k] <= W[i, k]
        const = lift_path(SampledPath([0, 1, 2], np.ones((3, 3))), spec)
        assert np.all(control_from_path(const).matrix == 0)

    def test_control_linear_path(self):
        spec = GradingSpec((1,), (1,), 1)
        t = np.linspace(0, 1, 6)
        W = control_from_path(lift_path(SampledPath(t, 3 * t), spec)).matrix
        for i, j in itertools.combinations(range(6), 2):
            assert W[i, j] == pytest.approx(3 * (t[j] - t[i]), rel=1e-12)

    def test_certificate(self, rng):
        spec = GradingSpec((1, 2), (1, 1), 2)
        X = lift_path(random_path(rng, spec, 6), spec)
        omega = control_from_path(X)
        zero = lift_path(SampledPath(X.times, np.zeros((7, 2))), spec)
        rep0 = check_finite_pi_variation(zero, omega, 2.0)
        assert rep0.passed and rep0.max_ratio == 0
        c = min_control_scale(X, omega, 2.0)
        assert check_finite_pi_variation(X, omega.scaled(c), 2.0).passed
        assert not check_finite_pi_variation(X, omega.scaled(0.5 * c), 2.0).passed
        beta = max_feasible_beta(X, omega.scaled(c))
        assert beta >= 2.0 * (1 - 1e-12)

    def test_zero_control_violation(self, rng):
        spec = GradingSpec((2,), (1,), 1)
        X = lift_path(random_path(rng, spec, 3), spec)
        rep = check_finite_pi_variation(X, LinearControl(0.0), 1.0)
        assert not rep.passed and rep.max_ratio == np.inf

    @given(st.integers(0, 10_000))
    def test_group_like(self, seed):
        rng = np.random.default_rng(seed)
        spec = GradingSpec((2, 3), (1, 1), 1)
        X = lift_path(random_path(rng, spec, 4), spec)
        assert shuffle_check(X.chen_eval(0.0, 1.0)) < 1e-10
