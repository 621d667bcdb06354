import math

import numpy as np
import pytest

from georouting.env import (
    BanditFeedback,
    LinkParams,
    LinkStreams,
    SemiBanditFeedback,
    attempt_transmission,
    gap_statistics,
    make_rng,
    matched_theta,
    route_packet_source,
    sample_link_delay,
    uniform_theta,
)
from georouting.graph import Path, enumerate_paths, grid_topology


def within_sigma(sample_mean, mean, var, n, k=3.0):
    return abs(sample_mean - mean) <= k * math.sqrt(var / n)


class TestLinkParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            LinkParams([0.0, 0.5])
        with pytest.raises(ValueError):
            LinkParams([1.2])
        with pytest.raises(ValueError):
            LinkParams([np.nan])

    def test_derived(self):
        p = LinkParams([0.5, 0.25, 1.0])
        assert p.theta_min == 0.25
        assert p.mean_delay.tolist() == [2.0, 4.0, 1.0]
        assert p.path_delay(Path((0, 1), 3)) == 6.0
        assert p == LinkParams([0.5, 0.25, 1.0])
        assert hash(p) == hash(LinkParams([0.5, 0.25, 1.0]))

    def test_read_only(self):
        p = LinkParams([0.5])
        with pytest.raises(ValueError):
            p.theta[0] = 0.1


class TestSampling:
    def test_theta_one(self, rng):
        assert all(sample_link_delay(1.0, rng) == 1 for _ in range(100))

    @pytest.mark.parametrize("bad", [0.0, -0.1, 1.5])
    def test_bad_theta(self, bad, rng):
        with pytest.raises(ValueError):
            sample_link_delay(bad, rng)

    def test_mean(self):
        rng = make_rng(1, "mean")
        n = 10**6
        x = np.array([sample_link_delay(0.5, rng) for _ in range(n)])
        assert x.min() >= 1
        assert within_sigma(x.mean(), 2.0, 0.5 / 0.25, n)

    def test_pmf(self):
        rng = make_rng(2, "pmf")
        n = 200_000
        x = np.array([sample_link_delay(0.25, rng) for _ in range(n)])
        for k in range(1, 6):
            p = 0.25 * 0.75 ** (k - 1)
            assert within_sigma((x == k).mean(), p, p * (1 - p), n)

    def test_attempt(self):
        params = LinkParams([0.3, 1.0])
        rng = make_rng(3)
        n = 10**6
        hits = sum(attempt_transmission(0, params, rng) for _ in range(n))
        assert within_sigma(hits / n, 0.3, 0.21, n)
        assert all(attempt_transmission(1, params, rng) for _ in range(100))


class TestRouting:
    def test_deterministic_links(self, rng):
        params = LinkParams([1.0, 1.0, 1.0])
        fb = route_packet_source(Path((0, 1, 2), 3), params, rng, feedback="bandit")
        assert fb == BanditFeedback(3)

    def test_feedback_kinds_agree(self):
        params = LinkParams([0.5, 0.25, 0.7])
        path = Path((0, 2), 3)
        for seed in range(20):
            semi = route_packet_source(path, params, make_rng(seed), feedback="semibandit")
            band = route_packet_source(path, params, make_rng(seed), feedback="bandit")
            assert isinstance(semi, SemiBanditFeedback)
            assert set(semi.delays) == {0, 2}
            assert semi.total == band.total

    def test_path_mean(self):
        params = LinkParams([0.5, 0.25])
        rng = make_rng(4)
        n = 10**5
        tot = np.array([route_packet_source(Path((0, 1), 2), params, rng).total for _ in range(n)])
        var = 0.5 / 0.25 + 0.75 / 0.0625
        assert within_sigma(tot.mean(), 6.0, var, n)

    def test_unknown_feedback(self, rng):
        with pytest.raises(ValueError):
            route_packet_source(Path((0,), 1), LinkParams([0.5]), rng, feedback="full")


class TestStreams:
    def test_reproducible(self):
        a = make_rng(5, "klsr", 3).random(5)
        b = make_rng(5, "klsr", 3).random(5)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("other", [(6, "klsr", 3), (5, "cucb", 3), (5, "klsr", 4)])
    def test_distinct_keys(self, other):
        assert not np.array_equal(make_rng(5, "klsr", 3).random(5), make_rng(*other).random(5))

    def test_string_keys_are_stable(self):
        # CRC32 hashing, independent of PYTHONHASHSEED
        assert make_rng(0, "abc").integers(10**9) == make_rng(0, "abc").integers(10**9)
        assert make_rng(0, "abc").random() == np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(0, spawn_key=(891568578,)))
        ).random()

    def test_link_streams_couple_noise(self):
        params = LinkParams([0.5, 0.5])
        a, b = LinkStreams(1, 2), LinkStreams(1, 2)
        # different visiting orders, same per-link draw sequences
        seq_a = [route_packet_source(Path((0,), 2), params, a).total for _ in range(5)]
        for _ in range(3):
            route_packet_source(Path((1,), 2), params, b)
        seq_b = [route_packet_source(Path((0,), 2), params, b).total for _ in range(5)]
        assert seq_a == seq_b


class TestGeneration:
    def test_uniform_theta(self):
        p = uniform_theta(100, 0.2, 0.4, rng=0)
        assert p.theta.min() >= 0.2 and p.theta.max() <= 0.4

    def test_uniform_theta_bounds(self):
        with pytest.raises(ValueError):
            uniform_theta(3, 0.0, 0.5)

    def test_gap_statistics(self):
        paths = [Path((0,), 2), Path((1,), 2)]
        assert gap_statistics(LinkParams([0.5, 0.25]), paths) == (0.25, 2.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_matched_theta(self, seed):
        topo = grid_topology()
        paths = enumerate_paths(topo)
        p = matched_theta(paths, topo.n_links, 0.3, 0.15, rng=seed)
        tmin, dmin = gap_statistics(p, paths)
        assert tmin == pytest.approx(0.3, abs=1e-12)
        assert dmin == pytest.approx(0.15, abs=1e-9)
