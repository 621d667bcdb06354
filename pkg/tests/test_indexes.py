import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from georouting.divergence import kl_bernoulli
from georouting.env import SemiBanditFeedback
from georouting.exceptions import UnexploredLink
from georouting.graph import Path
from georouting.indexes import (
    f1,
    f2,
    index_b,
    index_c,
    index_c_matrix,
    index_cucb,
    index_omega,
    omega_vector,
    cucb_vector,
)
from georouting.stats import LinkStats, SlotStats


def make_stats(s, t):
    st_ = LinkStats(len(s))
    st_.s[:] = s
    st_.t[:] = t
    return st_


def kl_upper_oracle(mean, count, level):
    """Largest q with count * KL(mean, q) <= level, by brentq."""
    if count * (-math.log(mean)) <= level:
        return 1.0
    return optimize.brentq(lambda q: count * kl_bernoulli(mean, q) - level, mean, 1.0 - 1e-15,
                           xtol=1e-15)


def b_oracle(means, counts, level):
    """Generic constrained minimisation of sum 1/u."""
    means, counts = np.asarray(means), np.asarray(counts)
    cons = {"type": "ineq", "fun": lambda u: level - np.sum(counts * kl_bernoulli(means, np.clip(u, 1e-12, 1 - 1e-12)))}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # SLSQP probes outside the bounds
        res = optimize.minimize(lambda u: np.sum(1.0 / u), x0=means + (1 - means) * 0.01,
                                bounds=[(m, 1 - 1e-12) for m in means], constraints=[cons],
                                method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    return res.fun


class TestSchedules:
    def test_values(self):
        assert f1(1, 3) == 0.0 and f2(1) == 0.0
        assert f2(2) == pytest.approx(math.log(2))
        assert f1(100, 1) == pytest.approx(math.log(100) + 4 * math.log(math.log(100)))
        assert f1(100, 1) == pytest.approx(10.714, abs=1e-3)
        assert f2(100) == pytest.approx(9.187, abs=1e-3)

    def test_monotone(self):
        v = [f2(n) for n in range(1, 1000)]
        assert all(b >= a for a, b in zip(v, v[1:]))


class TestIndexC:
    def test_example(self):
        c = index_c(Path((0,), 1), make_stats([100], [200]), 100, 1)
        expected = 2 - math.sqrt(f1(100, 1) / 2 * 1 / (100 * 0.125))
        assert c == pytest.approx(expected, rel=1e-12)
        assert c == pytest.approx(1.3454, abs=1e-4)

    def test_limit(self):
        c = index_c(Path((0, 1), 2), make_stats([10**9, 10**9], [2 * 10**9, 4 * 10**9]), 100, 2)
        assert c == pytest.approx(6.0, rel=1e-3)

    def test_needs_successes(self):
        with pytest.raises(UnexploredLink):
            index_c(Path((0,), 1), make_stats([0], [3]), 10, 1)

    def test_matrix_matches_scalar(self):
        stats = make_stats([5, 7, 3, 9], [9, 20, 4, 11])
        paths = [Path((0, 2), 4), Path((1, 3), 4), Path((0, 3), 4)]
        masks = np.array([p.mask for p in paths], float)
        mat = index_c_matrix(masks, stats, 50, 2)
        assert np.allclose(mat, [index_c(p, stats, 50, 2) for p in paths], rtol=1e-13)


class TestIndexB:
    def test_all_perfect(self):
        assert index_b(Path((0, 1, 2), 3), make_stats([5, 5, 5], [5, 5, 5]), 100, 3) == 3.0

    def test_single_link_oracle(self):
        stats = make_stats([50], [100])
        q = kl_upper_oracle(0.5, 100, f1(100, 1))
        assert index_b(Path((0,), 1), stats, 100, 1) == pytest.approx(1 / q, abs=1e-8)
        assert 1 / q == pytest.approx(1.38968, abs=1e-5)

    @pytest.mark.parametrize("seed", range(10))
    def test_multi_link_oracle(self, seed):
        rng = np.random.default_rng(seed)
        h = rng.integers(2, 5)
        t = rng.integers(5, 300, size=h)
        s = np.maximum(1, (rng.uniform(0.1, 0.9, size=h) * t).astype(int))
        n = int(rng.integers(10, 10**5))
        stats = make_stats(s, t)
        b = index_b(Path(tuple(range(h)), h), stats, n, h)
        ref = b_oracle(s / t, t, f1(n, h))
        assert b == pytest.approx(ref, rel=1e-6)

    def test_feasibility_residual(self):
        stats = make_stats([30, 12, 40], [70, 15, 40])
        r = index_b(Path((0, 1, 2), 3), stats, 500, 3, full=True)
        means = stats.s / stats.t
        resid = np.sum(stats.t * kl_bernoulli(means, r.u)) - f1(500, 3)
        assert abs(resid) < 1e-6
        assert r.u[2] == 1.0 and r.value == pytest.approx(np.sum(1 / r.u))

    @given(st.integers(0, 2**32 - 1))
    def test_residual_property(self, seed):
        # includes states where u rounds to 1 and only 1 - u carries the constraint
        rng = np.random.default_rng(seed)
        h = int(rng.integers(1, 7))
        t = rng.integers(1, 2000, size=h)
        s = np.maximum(1, (rng.uniform(0.05, 1.0, size=h) * t).astype(int))
        n = int(rng.integers(3, 10**6))
        stats = make_stats(s, t)
        r = index_b(Path(tuple(range(h)), h), stats, n, h, full=True)
        m = s / t
        act = m < 1
        if act.any():
            kl = m * np.log(m / r.u) + (1 - m) * np.log((1 - m) / np.where(act, r.slack, 1.0))
            assert abs(np.sum((t * kl)[act]) - f1(n, h)) < 1e-6
        assert np.allclose(r.slack + r.u, 1.0, atol=1e-12)

    def test_saturated_single_link(self):
        # level far above t * KL(mean, .) over the representable range below 1
        r = index_b(Path((0,), 1), make_stats([1], [2]), 10**6, 6, full=True)
        assert r.value == pytest.approx(1.0, abs=1e-12)
        assert 0.0 < r.slack[0] < 1e-12

    def test_unexplored(self):
        with pytest.raises(UnexploredLink):
            index_b(Path((0,), 2), make_stats([0, 1], [0, 1]), 5, 1)

    @given(st.integers(0, 2**32 - 1))
    def test_order(self, seed):
        rng = np.random.default_rng(seed)
        h = int(rng.integers(1, 7))
        t = rng.integers(1, 1000, size=h)
        s = np.maximum(1, (rng.uniform(0.05, 1.0, size=h) * t).astype(int))
        s = np.minimum(s, t)
        n = int(rng.integers(2, 10**6))
        stats = make_stats(s, t)
        p = Path(tuple(range(h)), h)
        b, c = index_b(p, stats, n, h), index_c(p, stats, n, h)
        plug_in = float(np.sum(t / s))
        assert c <= b * (1 + 1e-12)
        assert b <= plug_in * (1 + 1e-12)


class TestIndexOmega:
    def test_example(self):
        stats = make_stats([50], [100])
        w = index_omega(0, stats, 100)
        q = 1 / w
        assert 100 * kl_bernoulli(0.5, q) == pytest.approx(f2(100), abs=1e-8)
        assert w == pytest.approx(1 / kl_upper_oracle(0.5, 100, f2(100)), abs=1e-9)

    def test_slack_at_one(self):
        # KL(mean, 1) is infinite below mean = 1, so q reaches 1 only there
        assert index_omega(0, make_stats([3], [3]), 100) == 1.0
        assert index_omega(0, make_stats([1], [2]), 100) < 1.001

    def test_large_t(self):
        w = index_omega(0, make_stats([10**8], [4 * 10**8]), 100)
        assert w == pytest.approx(4.0, rel=1e-3)

    def test_slot_stats(self):
        st_ = SlotStats(1)
        for ok in (True, False, False, True):
            st_.update_slot(0, ok)
        assert index_omega(0, st_, 10) == index_omega(0, make_stats([2], [4]), 10)

    def test_vector(self):
        stats = make_stats([3, 5], [7, 5])
        assert np.allclose(omega_vector(stats, 30), [index_omega(i, stats, 30) for i in range(2)])
        with pytest.raises(UnexploredLink):
            omega_vector(make_stats([0, 1], [0, 1]), 3)

    @given(st.integers(1, 500), st.integers(1, 500), st.integers(2, 10**6))
    def test_bracketed(self, s, extra, n):
        t = s + extra
        w = index_omega(0, make_stats([s], [t]), n)
        assert 1.0 <= w <= t / s


class TestIndexCUCB:
    def test_example(self):
        v = index_cucb(0, make_stats([50], [100]), 100)
        assert v == pytest.approx(1 / (0.5 + math.sqrt(1.5 * math.log(100) / 100)))
        assert v == pytest.approx(1.311, abs=1e-3)

    def test_clamp(self):
        assert index_cucb(0, make_stats([5], [5]), 100) == 1.0
        assert index_cucb(0, make_stats([5], [5]), 100, clamp=False) < 1.0

    def test_limit(self):
        assert index_cucb(0, make_stats([10**9], [2 * 10**9]), 100) == pytest.approx(2.0, rel=1e-3)

    def test_vector(self):
        stats = make_stats([3, 5], [7, 5])
        assert np.allclose(cucb_vector(stats, 30), [index_cucb(i, stats, 30) for i in range(2)])
        with pytest.raises(UnexploredLink):
            cucb_vector(make_stats([0, 1], [0, 1]), 3)
