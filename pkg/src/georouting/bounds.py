"""Asymptotic regret lower bounds for line networks.

A line network is a chain of hops, each made of parallel links.  For such
networks the lower-bound constants have closed forms: with per-link
feedback the constant sums, over every sub-optimal link, the delay gap to
the best link of its hop divided by the geometric KL between the two links.
With end-to-end feedback only, the divergence is replaced by the KL
information between the delay distributions of two whole paths, which is
much smaller: the other hops blur the difference.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .divergence import DEFAULT_TAIL_EPS, choose_k_max, klg, path_delay_pmf, path_kl_information
from .env import LinkParams, make_rng
from .exceptions import DegenerateDenominator
from .graph import Path, line_topology
from .validation import check_positive_int, check_probability_vector


@dataclass(frozen=True, eq=False)
class LineNetwork:
    """Per-hop success probabilities of a line network.

    Link ids run hop by hop: hop 0 holds ids ``0 .. len(hops[0]) - 1`` and
    so on, matching :func:`georouting.graph.line_topology`.
    """

    hops: tuple

    def __post_init__(self):
        hops = tuple(tuple(check_probability_vector(h, name="hop").tolist()) for h in self.hops)
        if not hops:
            raise ValueError("a line network needs at least one hop")
        object.__setattr__(self, "hops", hops)

    @property
    def n_hops(self):
        return len(self.hops)

    @cached_property
    def theta(self):
        return np.array([t for hop in self.hops for t in hop])

    @cached_property
    def hop_of(self):
        return np.array([h for h, hop in enumerate(self.hops) for _ in hop])

    @cached_property
    def zeta(self):
        """Best link on each link's hop (largest theta, smallest id on ties)."""
        offsets = np.cumsum([0] + [len(h) for h in self.hops])
        best = [int(offsets[h] + np.argmax(hop)) for h, hop in enumerate(self.hops)]
        return np.array([best[h] for h in self.hop_of])

    @cached_property
    def best_path(self):
        return tuple(sorted(set(self.zeta.tolist())))

    def topology(self):
        return line_topology(self.n_hops, [len(h) for h in self.hops])

    def params(self):
        return LinkParams(self.theta)

    def optimal_path(self):
        return Path(self.best_path, self.theta.size)

    def suboptimal_links(self):
        """Links strictly worse than the best link of their hop."""
        th = self.theta
        return [i for i in range(th.size) if th[i] < th[self.zeta[i]]]


def c2_line(net):
    """Lower-bound constant with per-link (semi-bandit) feedback; the same
    constant holds for hop-by-hop routing."""
    th, z = net.theta, net.zeta
    total = 0.0
    for i in net.suboptimal_links():
        j = z[i]
        total += (1.0 / th[i] - 1.0 / th[j]) / klg(th[i], th[j])
    return float(total)


class LineBound(NamedTuple):
    value: float
    rel_error: float  # worst relative truncation error over the summed terms


def c1_line(net, tail_eps=DEFAULT_TAIL_EPS, rel_tol=1e-9):
    """Lower-bound constant with end-to-end (bandit) feedback.

    Each term's denominator is the KL information between the delay law of
    the optimal path with link ``i`` swapped in for its hop's best link and
    that of the optimal path, truncated where the delay tail falls below
    ``tail_eps``.  When the truncation bound exceeds ``rel_tol`` times the
    term, the cutoff is tightened 100x until it does not (``rel_tol=None``
    keeps the fixed cutoff).
    """
    th, z = net.theta, net.zeta
    best = list(net.best_path)
    theta_best = th[best]
    total = 0.0
    worst = 0.0
    for i in net.suboptimal_links():
        swapped = th[[i if k == z[i] else k for k in best]]
        eps = tail_eps
        while True:
            info = _swap_information(swapped, theta_best, eps)
            if not np.isfinite(info.value) or info.value <= 0.0:
                raise DegenerateDenominator(
                    f"KL information {info.value!r} for link {i} (theta={th[i]}, best={th[z[i]]})"
                )
            rel = info.error / info.value
            if rel_tol is None or rel <= rel_tol or eps < _EPS_FLOOR:
                break
            eps *= 1e-2
        total += (1.0 / th[i] - 1.0 / th[z[i]]) / info.value
        worst = max(worst, rel)
    return LineBound(float(total), float(worst))


_EPS_FLOOR = 1e-250


def _swap_information(swapped, theta_best, eps):
    k_max = max(choose_k_max(swapped, eps), choose_k_max(theta_best, eps))
    return path_kl_information(
        path_delay_pmf(swapped, k_max, method="convolution"),
        path_delay_pmf(theta_best, k_max, method="convolution"),
    )


class RatioRow(NamedTuple):
    hops: int
    draws: int
    mean_ratio: float
    stderr: float
    theta_law: str
    seed: int


class RatioDrawError(RuntimeError):
    def __init__(self, hops, draw, seed):
        super().__init__(f"ratio draw failed (hops={hops}, draw={draw}, seed={seed})")
        self.hops, self.draw, self.seed = hops, draw, seed


def random_line_network(hops, rng, links_per_hop=2, branching_hops=1, theta_law=(0.0, 1.0)):
    """Line network with i.i.d. uniform link probabilities.

    The first ``branching_hops`` hops carry ``links_per_hop`` parallel links
    and the remaining hops a single link; ``branching_hops=None`` branches
    every hop.  With the defaults the network has exactly two paths.
    Probabilities are drawn on ``(low, high]``.

    Draws are laid out so that a longer network extends a shorter one drawn
    from the same generator state: hop ``j`` always consumes row ``j`` of a
    fixed-width block.
    """
    low, high = theta_law
    if not 0.0 <= low < high <= 1.0:
        raise ValueError("theta_law must satisfy 0 <= low < high <= 1")
    theta = low + (high - low) * (1.0 - rng.random((hops, links_per_hop)))
    n_branch = hops if branching_hops is None else branching_hops
    return LineNetwork([row if j < n_branch else row[:1] for j, row in enumerate(theta)])


def ratio_experiment(hop_range, links_per_hop=2, draws=1000, theta_law=(0.0, 1.0), seed=0, *,
                     branching_hops=1, nested=True, tail_eps=DEFAULT_TAIL_EPS):
    """Average of ``c1_line / c2_line`` over random line networks.

    Parameters
    ----------
    hop_range : iterable of int
        Network lengths to sweep.
    theta_law : (low, high)
        Link probabilities are i.i.d. uniform on this interval.
    branching_hops : int or None
        See :func:`random_line_network`.
    nested : bool
        Reuse draw ``k``'s parameters across lengths (stream ``(seed, k)``):
        the length-H network is the length-(H-1) one plus a hop.  Otherwise
        every (H, k) pair gets its own stream ``(seed, H, k)``.
    seed : int
        Master seed.
    """
    draws = check_positive_int(draws, "draws")
    links_per_hop = check_positive_int(links_per_hop, "links_per_hop")
    hop_range = [check_positive_int(H, "hops") for H in hop_range]
    law = f"uniform[{theta_law[0]},{theta_law[1]}]"
    width = max(hop_range)
    rows = []
    for H in hop_range:
        ratios = np.empty(draws)
        for k in range(draws):
            rng = make_rng(seed, k) if nested else make_rng(seed, H, k)
            try:
                net = random_line_network(width if nested else H, rng, links_per_hop,
                                          branching_hops, theta_law)
                net = LineNetwork(net.hops[:H])
                ratios[k] = c1_line(net, tail_eps).value / c2_line(net)
            except Exception as exc:
                raise RatioDrawError(H, k, seed) from exc
        stderr = float(ratios.std(ddof=1) / np.sqrt(draws)) if draws > 1 else float("nan")
        rows.append(RatioRow(H, draws, float(ratios.mean()), stderr, law, seed))
    return rows


def ratio_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["H", "draws", "mean_ratio", "stderr", "theta_law", "seed"])
    for r in rows:
        w.writerow([r.hops, r.draws, f"{r.mean_ratio:.10g}", f"{r.stderr:.10g}", r.theta_law, r.seed])
    return buf.getvalue()
