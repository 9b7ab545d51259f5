import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from pirough.errors import MissingLevelError, PreconditionError
from pirough.grading import GradingSpec
from pirough.oneform import certify, constant_oneform, oneform_from_json, poly_oneform
from pirough.polynomial import Polynomial, from_callable, symbols

S1 = GradingSpec((1,), (1,))
S12 = GradingSpec((1, 2), (1, 1))


def fd_partial(f, word, y, h=1e-3):
    """Central differences of ``f`` along the letters of ``word``."""
    if not word:
        return f(y)
    a, rest = word[0], word[1:]
    e = np.zeros_like(y)
    e[a] = h
    return (fd_partial(f, rest, y + e, h) - fd_partial(f, rest, y - e, h)) / (2 * h)


class TestConstruction:
    def test_constant(self):
        A = [[2.0, -1.0]]
        a = constant_oneform(A, [3, 3], S12)
        np.testing.assert_array_equal(a([0.3, 0.7]), A)
        for s in a.levels[1:]:
            assert np.all(a.level_tensor(s, np.zeros((1, 2))) == 0)

    def test_linear(self):
        a = poly_oneform(from_callable(lambda z: [[z]], 1), [2], S1)
        assert a.levels == [0, 1]
        assert a.level_apply(0, [0.7], [1.0])[0, 0] == 0.7
        assert a.level_apply(1, [0.7], [1.0])[0, 0] == 1.0
        assert np.all(a.level_apply(1, [0.7], [0.0]) == 0)

    def test_mixed_product_matches_finite_differences(self, rng):
        f = lambda z: np.array([[z[0] * z[1], z[1] ** 2]])  # noqa: E731
        a = poly_oneform(from_callable(lambda x, y: [[x * y, y ** 2]], 2), [2, 2], S12)
        y = rng.uniform(-1, 1, 2)
        for s in a.levels:
            words = a.level_words(s)
            T = a.level_tensor(s, y[None])[0]
            mask = a.block_mask(s)
            for n, w in enumerate(words):
                want = fd_partial(f, w, y)
                np.testing.assert_allclose(T[n][:, mask], want[:, mask], atol=1e-6)

    def test_symmetry(self, rng):
        spec = GradingSpec((2,), (2,))
        a = poly_oneform(from_callable(lambda x, y: [[x ** 2 * y, x - y ** 3]], 2), [2.5], spec)
        y = rng.normal(size=2)
        words = a.level_words(1)
        v = rng.normal(size=len(words))
        idx = {w: i for i, w in enumerate(words)}
        vs = np.array([0.5 * (v[idx[w]] + v[idx[w[::-1]]]) for w in words])
        np.testing.assert_allclose(a.level_apply(1, y, v), a.level_apply(1, y, vs), atol=1e-12)

    def test_missing_level(self):
        a = poly_oneform(from_callable(lambda z: [[z]], 1), [2], S1)
        with pytest.raises(MissingLevelError):
            a.level_apply(2, [0.0], [1.0])

    def test_precondition(self):
        spec = GradingSpec((2,), (1,))
        with pytest.raises(PreconditionError):
            constant_oneform([[1.0]], [0.5], spec)
        with pytest.warns(RuntimeWarning):
            a = constant_oneform([[1.0]], [0.5], spec, force=True)
        assert not a.precondition_ok
        with pytest.raises(PreconditionError):
            a.check_precondition()

    def test_block_mask(self):
        # block 1 has γ=1.2, so its columns leave the stack from degree 1.5 on
        a = poly_oneform(from_callable(lambda x, y: [[x * y ** 3, x ** 2 + y]], 2), [1.2, 2], S12)
        assert a.levels == [0, 0.5, 1, 1.5]
        assert a.block_mask(1).tolist() == [True, True]
        assert a.block_mask(1.5).tolist() == [False, True]
        T = a.level_tensor(1.5, np.array([[0.3, 0.4]]))
        assert np.all(T[..., 0] == 0)


class TestRemainder:
    def test_polynomial_below_threshold_is_exact(self, rng):
        a = poly_oneform(from_callable(lambda x, y: [[x * y, y ** 2]], 2), [3, 3], S12)
        for _ in range(5):
            x, y = rng.normal(size=2), rng.normal(size=2)
            for s in a.levels:
                assert np.abs(a.remainder(s, x, y)).max() < 1e-12 * (1 + np.abs(x).max() + np.abs(y).max()) ** 4

    def test_linear_zero(self):
        a = poly_oneform(from_callable(lambda z: [[3 * z + 1]], 1), [2], S1)
        assert np.all(a.remainder(0, [0.1], [0.9]) == 0)

    def test_cubic_bounded_by_M(self, rng):
        a = poly_oneform(from_callable(lambda z: [[z ** 3]], 1), [2.5], S1, box=1.0)
        M = a.M
        assert np.isfinite(M) and M > 0
        xs = rng.uniform(-1, 1, (500, 1))
        ys = rng.uniform(-1, 1, (500, 1))
        assert a.remainder_ratios(xs, ys).max() <= M * 1.05

    def test_closed_form(self):
        # z^3, γ=2.5: at level 0 the Taylor terms of degree < 2.5 are kept
        a = poly_oneform(from_callable(lambda z: [[z ** 3]], 1), [2.5], S1)
        x, y = 0.3, -0.4
        d = y - x
        want = y ** 3 - (x ** 3 + 3 * x ** 2 * d + 3 * x * d ** 2)
        assert a.remainder(0, [x], [y])[0, 0, 0] == pytest.approx(want, abs=1e-15)

    @pytest.mark.parametrize("gamma", [1.5, 2.5])
    def test_scaling_exponent(self, gamma):
        spec = GradingSpec((2,), (1,))
        a = poly_oneform(from_callable(lambda z: [[z ** 7 + z ** 3]], 1), [gamma], spec)
        x = np.array([0.2])
        hs = 0.1 * 2.0 ** -np.arange(6)
        for s in a.levels:
            R = [np.abs(a.remainder(s, x, x + h)).max() for h in hs]
            slope = np.polyfit(np.log(hs), np.log(R), 1)[0]
            assert slope >= (gamma - float(s)) * 2 - 0.1


class TestNorms:
    def test_zero(self):
        a = poly_oneform(Polynomial.zero(1, (1, 1)), [2], S1)
        assert a.lip_norm() == 0

    def test_constant(self):
        assert constant_oneform([[-2.5]], [2], S1).lip_norm() == pytest.approx(2.5)

    def test_identity(self):
        a = poly_oneform(from_callable(lambda z: [[z]], 1), [2], S1)
        assert a.lip_norm(box=1.0) == pytest.approx(1.0)
        cert = certify(a, box=1.0)
        assert cert.theta == 3 and cert.M == 0 and cert.precondition_ok

    def test_monotone_in_box(self):
        a = poly_oneform(from_callable(lambda z: [[z ** 3 - z]], 1), [2.5], S1)
        assert a.lip_norm(box=0.5) <= a.lip_norm(box=1.0) * (1 + 1e-9) <= a.lip_norm(box=2.0) * (1 + 1e-9)


class TestPolynomial:
    @given(st.lists(st.floats(-2, 2), min_size=2, max_size=2))
    def test_evaluation_and_partials(self, z):
        x, y = symbols(2)
        expr = sp.Matrix([[x ** 2 * y - 3, y ** 3], [x, 2 * x * y]])
        P = Polynomial.from_sympy(expr, (x, y))
        sub = {x: z[0], y: z[1]}
        np.testing.assert_allclose(P(z), np.array(expr.subs(sub), dtype=float), atol=1e-12)
        dP = P.partial((0, 1))
        np.testing.assert_allclose(dP(z), np.array(sp.diff(expr, x, y).subs(sub), dtype=float), atol=1e-12)

    def test_sympy_round_trip(self):
        x, y = symbols(2)
        P = from_callable(lambda a, b: [[a * b / 3, b - 1]], 2)
        Q = Polynomial.from_sympy(P.to_sympy((x, y)), (x, y))
        np.testing.assert_allclose(Q([0.4, -0.7]), P([0.4, -0.7]), atol=1e-15)

    def test_json(self):
        a = poly_oneform(from_callable(lambda x, y: [[x * y, y ** 2]], 2), [2, 2], S12)
        b = oneform_from_json(a.to_json())
        np.testing.assert_allclose(b([0.3, 0.2]), a([0.3, 0.2]))
        assert b.gamma == a.gamma
        with pytest.raises(ValueError):
            oneform_from_json({**a.to_json(), "dims_in": [2]}, S12)
