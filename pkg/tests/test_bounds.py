import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from georouting import bounds
from georouting.bounds import (
    LineNetwork,
    RatioDrawError,
    c1_line,
    c2_line,
    random_line_network,
    ratio_csv,
    ratio_experiment,
)
from georouting.divergence import klg
from georouting.env import make_rng
from georouting.graph import enumerate_paths, shortest_path

C2_EXAMPLE = 2.0 / klg(0.25, 0.5)


def c1_oracle(hops, k_max=2000):
    """C1 straight from its definition: float64 convolution pmfs, plain sum."""
    theta = [t for hop in hops for t in hop]
    best = []
    offset = 0
    zeta = {}
    for hop in hops:
        j = offset + int(np.argmax(hop))
        best.append(j)
        for i in range(offset, offset + len(hop)):
            zeta[i] = j
        offset += len(hop)

    def pmf(ths):
        k = np.arange(k_max + 1)
        out = np.zeros(k_max + 1)
        out[0] = 1.0
        for th in ths:
            out = np.convolve(out, np.where(k >= 1, th * (1 - th) ** np.maximum(k - 1, 0), 0.0))[: k_max + 1]
        return out

    q = pmf([theta[j] for j in best])
    total = 0.0
    for i, j in zeta.items():
        if theta[i] >= theta[j]:
            continue
        p = pmf([theta[i] if b == j else theta[b] for b in best])
        m = (p > 0) & (q > 0)
        total += (1 / theta[i] - 1 / theta[j]) / float(np.sum(p[m] * np.log(p[m] / q[m])))
    return total


hop_probs = st.lists(st.floats(0.05, 0.99), min_size=1, max_size=3)


class TestLineNetwork:
    def test_zeta_and_ties(self):
        net = LineNetwork([(0.3, 0.7, 0.7), (0.5,)])
        assert net.zeta.tolist() == [1, 1, 1, 3]
        assert net.best_path == (1, 3)
        assert net.suboptimal_links() == [0]

    def test_matches_topology(self):
        net = LineNetwork([(0.3, 0.7), (0.5, 0.9, 0.1)])
        topo = net.topology()
        assert topo.n_links == 5
        assert shortest_path(topo, net.params().mean_delay) == net.optimal_path()
        assert len(enumerate_paths(topo)) == 6

    def test_invalid(self):
        with pytest.raises(ValueError):
            LineNetwork([])
        with pytest.raises(ValueError):
            LineNetwork([(0.0, 0.5)])


class TestC2:
    def test_example(self):
        assert c2_line(LineNetwork([(0.5, 0.25)])) == pytest.approx(3.822, abs=1e-3)
        assert c2_line(LineNetwork([(0.5, 0.25)])) == pytest.approx(C2_EXAMPLE, rel=1e-14)

    def test_equal_hop_contributes_nothing(self):
        assert c2_line(LineNetwork([(0.4, 0.4), (0.5, 0.25)])) == pytest.approx(C2_EXAMPLE, rel=1e-14)

    def test_additive(self):
        assert c2_line(LineNetwork([(0.5, 0.25)] * 2)) == pytest.approx(2 * C2_EXAMPLE, rel=1e-14)

    @given(st.lists(hop_probs, min_size=1, max_size=4), st.randoms())
    def test_permutation_invariant(self, hops, r):
        shuffled = [tuple(r.sample(h, len(h))) for h in hops]
        assert c2_line(LineNetwork(hops)) == pytest.approx(c2_line(LineNetwork(shuffled)), rel=1e-12)


class TestC1:
    @given(hop_probs)
    def test_one_hop_equals_c2(self, hop):
        net = LineNetwork([hop])
        assert c1_line(net).value == pytest.approx(c2_line(net), rel=1e-6)

    def test_two_hop_example(self):
        hops = [(0.5, 0.25), (0.6, 0.3)]
        c1 = c1_line(LineNetwork(hops))
        assert c1.value >= c2_line(LineNetwork(hops))
        assert c1.value == pytest.approx(c1_oracle(hops), rel=1e-8)
        assert c1.rel_error < 1e-8

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        hops = [tuple(rng.uniform(0.3, 0.95, 2)) for _ in range(3)]
        assert c1_line(LineNetwork(hops)).value == pytest.approx(c1_oracle(hops), rel=1e-7)

    @given(st.lists(st.lists(st.floats(0.1, 0.99), min_size=1, max_size=2), min_size=1, max_size=4))
    def test_dominates_c2(self, hops):
        # gaps of a few ulps leave a KL information that rounds to zero
        assume(all(len(h) < 2 or h[0] == h[1] or abs(h[0] - h[1]) > 1e-6 for h in hops))
        net = LineNetwork(hops)
        assert c1_line(net).value >= c2_line(net) * (1 - 1e-9)

    def test_ratio_grows_with_hops(self):
        ratios = []
        for h in range(1, 5):
            net = LineNetwork([(0.5, 0.25)] * h)
            ratios.append(c1_line(net).value / c2_line(net))
        assert ratios[0] == pytest.approx(1.0, abs=1e-6)
        assert all(b > a for a, b in zip(ratios, ratios[1:]))

    def test_error_bound_covers_tightening(self):
        net = LineNetwork([(0.5, 0.35), (0.6, 0.3), (0.8,)])
        loose = c1_line(net, tail_eps=1e-4, rel_tol=None)
        tight = c1_line(net, tail_eps=1e-6, rel_tol=None)
        assert abs(tight.value - loose.value) <= loose.rel_error * loose.value

    def test_tied_hop(self):
        net = LineNetwork([(0.5, 0.5), (0.6, 0.3)])
        assert c1_line(net).value == pytest.approx(c1_line(LineNetwork([(0.5,), (0.6, 0.3)])).value)


class TestRatioExperiment:
    def test_one_hop(self):
        (row,) = ratio_experiment([1], draws=50, seed=3)
        assert row.mean_ratio == pytest.approx(1.0, abs=1e-6)
        assert row.theta_law == "uniform[0.0,1.0]" and row.draws == 50

    def test_nested_is_monotone(self):
        rows = ratio_experiment(range(1, 5), draws=40, seed=1)
        means = [r.mean_ratio for r in rows]
        assert all(b >= a for a, b in zip(means, means[1:]))

    def test_nested_prefix(self):
        net6 = random_line_network(6, make_rng(0, 5))
        net3 = random_line_network(3, make_rng(0, 5))
        assert net6.hops[:3] == net3.hops

    def test_structure(self):
        net = random_line_network(4, make_rng(1), links_per_hop=3)
        assert [len(h) for h in net.hops] == [3, 1, 1, 1]
        net = random_line_network(4, make_rng(1), branching_hops=None)
        assert [len(h) for h in net.hops] == [2, 2, 2, 2]

    def test_law(self):
        net = random_line_network(50, make_rng(2), branching_hops=None, theta_law=(0.1, 0.99))
        assert 0.1 < net.theta.min() and net.theta.max() <= 0.99
        with pytest.raises(ValueError):
            random_line_network(2, make_rng(2), theta_law=(0.5, 0.2))

    def test_reproducible(self):
        a = ratio_experiment([2, 3], draws=10, seed=4, nested=False)
        b = ratio_experiment([2, 3], draws=10, seed=4, nested=False)
        assert a == b

    def test_failure_carries_seed(self, monkeypatch):
        def boom(net, tail_eps):
            raise FloatingPointError("underflow")

        monkeypatch.setattr(bounds, "c1_line", boom)
        with pytest.raises(RatioDrawError) as exc:
            ratio_experiment([2], draws=3, seed=9)
        assert (exc.value.hops, exc.value.draw, exc.value.seed) == (2, 0, 9)
        assert isinstance(exc.value.__cause__, FloatingPointError)

    def test_csv(self):
        rows = ratio_experiment([1, 2], draws=5, seed=0)
        lines = ratio_csv(rows).splitlines()
        assert lines[0] == "H,draws,mean_ratio,stderr,theta_law,seed"
        assert len(lines) == 3 and lines[1].startswith("1,5,")
