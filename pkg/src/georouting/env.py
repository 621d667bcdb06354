"""Stochastic link environment: Bernoulli transmissions and geometric delays.

Each link ``i`` succeeds in a slot with probability ``theta[i]``; a packet
retransmitted until success therefore sees a geometric delay with mean
``1 / theta[i]`` slots.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .validation import check_probability_vector


@dataclass(frozen=True, eq=False)
class LinkParams:
    """Ground-truth per-link success probabilities, all in (0, 1]."""

    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", check_probability_vector(self.theta))

    @property
    def n_links(self):
        return self.theta.size

    @cached_property
    def theta_min(self):
        return float(self.theta.min())

    @cached_property
    def mean_delay(self):
        """Expected per-link delay ``1 / theta`` in slots."""
        d = 1.0 / self.theta
        d.setflags(write=False)
        return d

    def path_delay(self, path):
        """Expected end-to-end delay of ``path``."""
        return float(sum(self.mean_delay[i] for i in path.links))

    def __eq__(self, other):
        return isinstance(other, LinkParams) and np.array_equal(self.theta, other.theta)

    def __hash__(self):
        return hash(self.theta.tobytes())


@dataclass(frozen=True)
class BanditFeedback:
    """End-to-end delay only."""

    total: int


@dataclass(frozen=True)
class SemiBanditFeedback:
    """Per-link delays, keyed by link id, for exactly the links of the path."""

    delays: dict

    @property
    def total(self):
        return sum(self.delays.values())


DelayFeedback = Union[BanditFeedback, SemiBanditFeedback]


# ---------------------------------------------------------------------------
# random streams


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def make_rng(seed, *key):
    """Generator for the stream identified by ``(seed, *key)``.

    Key parts may be ints or strings (strings are hashed with CRC32, so the
    mapping is stable across interpreter runs).  Identical arguments always
    give bit-identical draws.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


class LinkStreams:
    """One independent random stream per link.

    Used for coupled-noise comparisons: the k-th transmission attempt on
    link ``i`` sees the same uniform draw whichever policy makes it.
    """

    def __init__(self, seed, n_links, *key):
        self._rngs = [make_rng(seed, *key, "link", i) for i in range(n_links)]

    def __getitem__(self, link):
        return self._rngs[link]


def _link_rng(rng, link):
    if isinstance(rng, LinkStreams):
        return rng[link]
    return rng


# ---------------------------------------------------------------------------
# sampling


def sample_link_delay(theta_i, rng):
    """Geometric delay on a link: ``k >= 1`` with probability
    ``theta_i * (1 - theta_i) ** (k - 1)``.

    Inverse-CDF sampling, ``ceil(ln U / ln(1 - theta_i))`` with ``U`` in
    (0, 1]; ``theta_i == 1`` always returns 1.
    """
    if not 0.0 < theta_i <= 1.0:
        raise ValueError(f"theta_i must lie in (0, 1], got {theta_i}")
    if theta_i == 1.0:
        return 1
    u = 1.0 - rng.random()
    return max(1, math.ceil(math.log(u) / math.log1p(-theta_i)))


def route_packet_source(path, params, rng, feedback="semibandit"):
    """Send one packet along ``path`` with per-link retransmission.

    Returns a :class:`SemiBanditFeedback` (per-link delays) or a
    :class:`BanditFeedback` (their sum).  Links are sampled in path order,
    so both feedback kinds consume the same draws.
    """
    theta = params.theta
    delays = {i: sample_link_delay(theta[i], _link_rng(rng, i)) for i in path.links}
    if feedback == "semibandit":
        return SemiBanditFeedback(delays)
    if feedback == "bandit":
        return BanditFeedback(sum(delays.values()))
    raise ValueError(f"unknown feedback kind {feedback!r}")


def attempt_transmission(link, params, rng):
    """One slot on ``link``: True with probability ``theta[link]``."""
    theta_i = params.theta[link]
    return bool(_link_rng(rng, link).random() < theta_i)


# ---------------------------------------------------------------------------
# parameter generation


def uniform_theta(n_links, low=0.1, high=0.99, rng=None):
    """i.i.d. uniform success probabilities on ``[low, high]``."""
    if not 0.0 < low <= high <= 1.0:
        raise ValueError("need 0 < low <= high <= 1")
    rng = np.random.default_rng(rng)
    return LinkParams(rng.uniform(low, high, size=n_links))


def gap_statistics(params, paths):
    """(theta_min, delta_min): smallest link probability and smallest
    expected-delay gap between the best and any other path."""
    delays = sorted(params.path_delay(p) for p in paths)
    gaps = [d - delays[0] for d in delays[1:] if d - delays[0] > 1e-12]
    return params.theta_min, (min(gaps) if gaps else math.inf)


def matched_theta(paths, n_links, theta_min, delta_min, rng=None, high=0.95, max_tries=10_000):
    """Random link parameters with prescribed ``theta_min`` and ``delta_min``.

    Draws uniform probabilities on ``[theta_min, high]``, pins one random
    link at exactly ``theta_min`` and then slows one link of the optimal path
    (a link outside the runner-up path) so that the best/runner-up gap is
    exactly ``delta_min``.  Draws where the adjustment breaks either
    statistic are rejected.
    """
    rng = np.random.default_rng(rng)
    for _ in range(max_tries):
        theta = rng.uniform(theta_min, high, size=n_links)
        pinned = int(rng.integers(n_links))
        theta[pinned] = theta_min
        cand = LinkParams(theta)
        order = sorted(paths, key=lambda p: (cand.path_delay(p), p.links))
        best, runner = order[0], order[1]
        gap = cand.path_delay(runner) - cand.path_delay(best)
        if gap < delta_min:
            continue
        free = [i for i in best.links if i not in runner.links and i != pinned]
        if not free:
            continue
        i = free[int(rng.integers(len(free)))]
        new_delay = 1.0 / theta[i] + (gap - delta_min)
        if 1.0 / new_delay < theta_min:
            continue
        theta[i] = 1.0 / new_delay
        out = LinkParams(theta)
        tmin, dmin = gap_statistics(out, paths)
        if abs(tmin - theta_min) < 1e-12 and abs(dmin - delta_min) < 1e-9:
            return out
    raise RuntimeError("could not match the requested theta_min / delta_min")
