import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import gamma as gamma_fn
from scipy.special import zeta

from pirough.errors import InvalidMultiIndexError
from pirough.grading import (
    GradingSpec,
    beta_lower_bound,
    deg_pi,
    degree_set,
    degree_split,
    gamma_pi,
    is_ordered_shuffle,
    multiindices,
    ordered_shuffles,
    parse_number,
    shuffle_word,
    zeta_series,
)

F = Fraction


def spec(p, q=1):
    return GradingSpec(p, (1,) * len(p), q)


class TestDegree:
    def test_examples(self):
        assert deg_pi((1, 2), spec((1, 2))) == F(3, 2)
        assert deg_pi((), spec((3,))) == 0
        assert deg_pi((2, 2, 2), spec((1, 3))) == 1

    def test_bad_label(self):
        with pytest.raises(InvalidMultiIndexError):
            deg_pi((3,), spec((1, 2)))
        with pytest.raises(InvalidMultiIndexError):
            deg_pi((0,), spec((1,)))

    @given(
        st.lists(st.integers(1, 3), max_size=6),
        st.lists(st.integers(1, 3), max_size=6),
    )
    def test_concatenation_additive(self, R, Q):
        s = spec((1, F(3, 2), 3))
        assert deg_pi(tuple(R) + tuple(Q), s) == deg_pi(R, s) + deg_pi(Q, s)

    def test_float_spec_uses_tolerance(self):
        s = GradingSpec((math.pi, math.e), (1, 1))
        assert not s.exact
        assert math.isclose(deg_pi((1, 2), s), 1 / math.pi + 1 / math.e)
        assert GradingSpec((1.3,), (1,)).exact


class TestGamma:
    def test_examples(self):
        assert gamma_pi((1, 1), spec((2, 5))) == pytest.approx(1.0)
        assert gamma_pi((), spec((2,))) == 1.0
        assert gamma_pi((1,), spec((2,))) == pytest.approx(gamma_fn(1.5), rel=1e-14)
        assert gamma_pi((1,), spec((2,))) == pytest.approx(0.8862269, abs=1e-7)

    def test_product_over_blocks(self):
        s = spec((2, 3))
        want = gamma_fn(2 / 2 + 1) * gamma_fn(1 / 3 + 1)
        assert gamma_pi((1, 2, 1), s) == pytest.approx(want, rel=1e-14)


def _brute_degrees(p, upto):
    vals = set()
    top = [int(upto * pi) + 1 for pi in p]
    for ns in itertools.product(*[range(t + 1) for t in top]):
        d = sum(F(n) / F(pi) for n, pi in zip(ns, p))
        if 0 < d <= upto:
            vals.add(d)
    return sorted(vals)


class TestDegreeSet:
    def test_examples(self):
        assert degree_set(spec((1, 2)), 2) == [F(1, 2), 1, F(3, 2), 2]
        assert degree_set(spec((3,)), 1) == [F(1, 3), F(2, 3), 1]
        assert degree_set(spec((2, 3)), 1) == [F(1, 3), F(1, 2), F(2, 3), F(5, 6), 1]

    @given(
        st.lists(st.sampled_from([1, 2, 3, F(3, 2), F(5, 2)]), min_size=1, max_size=3),
        st.sampled_from([F(1, 2), 1, F(3, 2), 2]),
    )
    def test_brute_force(self, p, upto):
        got = degree_set(spec(tuple(p)), upto)
        assert got == _brute_degrees(p, upto)
        assert all(a < b for a, b in zip(got, got[1:]))

    def test_include_zero(self):
        assert degree_set(spec((2,)), 1, include_zero=True)[0] == 0

    def test_split(self):
        assert degree_split(spec((2,))) == (1, F(3, 2))
        assert degree_split(spec((1,))) == (1, 2)
        assert degree_split(spec((1, 2))) == (1, F(3, 2))
        assert degree_split(spec((3,))) == (1, F(4, 3))


class TestMultiindices:
    def test_examples(self):
        assert set(multiindices(spec((1, 2)), 1)) == {(1,), (2,), (2, 2)}
        assert multiindices(spec((1,)), 1) == [(1,)]
        assert set(multiindices(spec((2, 2)), 1)) == {(1,), (2,), (1, 1), (1, 2), (2, 1), (2, 2)}

    @given(
        st.lists(st.sampled_from([1, 2, 3, F(3, 2)]), min_size=1, max_size=3),
        st.sampled_from([F(1, 2), 1, F(3, 2), 2]),
    )
    def test_brute_force_and_monotone(self, p, s):
        sp = spec(tuple(p))
        k = len(p)
        maxlen = int(s * max(p)) + 1
        brute = {
            R
            for L in range(1, maxlen + 1)
            for R in itertools.product(range(1, k + 1), repeat=L)
            if deg_pi(R, sp) <= s
        }
        got = multiindices(sp, s)
        assert set(got) == brute
        assert len(got) == len(brute)
        assert set(multiindices(sp, s / 2)) <= set(got)


def _brute_os(sizes):
    """Filter S_K with the defining conditions, 0-based images."""
    K = sum(sizes)
    ends = list(itertools.accumulate(sizes))
    starts = [e - k for e, k in zip(ends, sizes)]
    out = set()
    for sigma in itertools.permutations(range(K)):
        inc = all(sigma[j] < sigma[j + 1] for a, b in zip(starts, ends) for j in range(a, b - 1))
        last = all(sigma[ends[i] - 1] < sigma[ends[i + 1] - 1] for i in range(len(sizes) - 1))
        if inc and last:
            out.add(sigma)
    return out


def _compositions(K):
    for n in range(1, K + 1):
        for cuts in itertools.combinations(range(1, K), n - 1):
            pts = (0,) + cuts + (K,)
            yield tuple(b - a for a, b in zip(pts, pts[1:]))


class TestOrderedShuffles:
    def test_examples(self):
        assert len(ordered_shuffles(1, 1)) == 1
        assert len(ordered_shuffles(1, 2)) == 2
        assert ordered_shuffles(2) == [(0, 1)]

    @pytest.mark.parametrize("K", range(1, 7))
    def test_all_compositions(self, K):
        for sizes in _compositions(K):
            got = ordered_shuffles(*sizes)
            assert len(got) == len(set(got))
            assert set(got) == _brute_os(sizes)
            assert all(is_ordered_shuffle(s, sizes) for s in got)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ordered_shuffles(0, 1)
        with pytest.raises(ValueError):
            ordered_shuffles()

    def test_count_recursion(self):
        # the last block closes the word; the rest is an ordered shuffle of the
        # earlier blocks interleaved with the first k_n - 1 letters of the last
        for sizes in [(2, 3), (1, 2, 2), (3, 1, 2)]:
            *head, last = sizes
            n_head = len(ordered_shuffles(*head)) if head else 1
            K0 = sum(head)
            assert len(ordered_shuffles(*sizes)) == n_head * math.comb(K0 + last - 1, last - 1)

    def test_shuffle_word(self):
        assert shuffle_word((1, 0, 2), "abc") == ("b", "a", "c")
        sigma = ordered_shuffles(1, 2)
        words = {shuffle_word(s, "xab") for s in sigma}
        assert words == {("x", "a", "b"), ("a", "x", "b")}


class TestBeta:
    def test_pi_one(self):
        assert beta_lower_bound(spec((1,))) == pytest.approx(1 + 2 * math.pi ** 2 / 3, abs=1e-6)

    def test_pi_two(self):
        want = 4 * (1 + 2 ** 1.5 * zeta(1.5))
        assert beta_lower_bound(spec((2,))) == pytest.approx(want, rel=1e-10)
        assert want == pytest.approx(33.556, abs=1e-3)

    def test_mixed(self):
        want = (1 * 4 * (1 + 2 ** 1.5 * zeta(1.5))) ** 0.5
        assert beta_lower_bound(spec((1, 2))) == pytest.approx(want, rel=1e-10)

    @given(st.floats(1.05, 6.0))
    def test_zeta_series(self, s):
        val, err = zeta_series(s, tol=1e-12)
        assert err < 1e-12
        assert val == pytest.approx(zeta(s), abs=1e-10)

    def test_diverges(self):
        with pytest.raises(ArithmeticError):
            zeta_series(1.0)


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            GradingSpec((0.5,), (1,))
        with pytest.raises(ValueError):
            GradingSpec((1, 2), (1,))
        with pytest.raises(ValueError):
            GradingSpec((1,), (0,))
        with pytest.raises(ValueError):
            GradingSpec((1,), (1,), 0)

    def test_parse_number(self):
        assert parse_number("3/2") == F(3, 2)
        assert parse_number(1.5) == F(3, 2)
        assert parse_number(0.1) == F(1, 10)
        assert isinstance(parse_number(math.pi), float)
        with pytest.raises(ValueError):
            parse_number(float("nan"))

    def test_json_round_trip(self):
        s = GradingSpec((F(3, 2), 2), (2, 1), F(5, 2))
        assert GradingSpec.from_json(s.to_json()) == s
        assert s.p_max == 2 and s.dim == 3 and s.offsets == (0, 2)
