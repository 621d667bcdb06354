"""Routing policies as scikit-learn style estimators.

Hyperparameters go to ``__init__`` (so ``get_params``/``set_params``/``clone``
work); ``fit`` binds a policy to a topology and resets its learned state
(attributes with a trailing underscore).  Source-routing policies then
alternate ``select_path()`` and ``partial_fit(path, feedback)``.  The
hop-by-hop policy instead exposes ``select_hop``, ``observe`` and
``end_packet``.

Learning policies first route one packet along each path of a covering set so
that every usable link has been observed before any index is evaluated.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import _kernels as K
from .env import LinkParams, SemiBanditFeedback
from .exceptions import NoConvergence, Stranded
from .graph import (
    DEFAULT_PATH_CAP,
    _bellman_ford,
    _is_tight,
    _shortest_path_trusted,
    covering_paths,
    enumerate_paths,
    max_hops,
    shortest_path,
)
from .indexes import cucb_vector, f1, f2, index_c_matrix, omega_vector
from .stats import LinkStats, SlotStats
from .validation import check_random_state

POLICY_NAMES = ("geocombucb1", "geocombucb2", "klsr", "klhhr", "cucb", "oracle", "uniform")


def _check_fitted(policy):
    # sklearn's check_is_fitted walks every attribute; this runs per packet
    if "stats_" not in policy.__dict__:
        raise NotFittedError(f"{type(policy).__name__} is not fitted yet; call fit() first")


class RoutingPolicy(BaseEstimator):
    """Shared machinery of the source-routing policies."""

    hop_by_hop = False
    explores = True

    def fit(self, topology, params=None, *, initial_paths=None):
        """Reset state for ``topology``.

        Parameters
        ----------
        topology : NetworkTopology
        params : LinkParams, optional
            Ground truth; only the oracle reads it.
        initial_paths : list of Path, optional
            Covering set routed first.  Computed from the topology when
            omitted; ignored by policies that do not explore.
        """
        self.topology_ = topology
        self.stats_ = LinkStats(topology.n_links)
        self.n_ = 1
        if self.explores:
            cover = covering_paths(topology) if initial_paths is None else initial_paths
            self.init_queue_ = list(cover)
        else:
            self.init_queue_ = []
        self._setup(topology, params)
        return self

    def _setup(self, topology, params):
        pass

    def select_path(self):
        _check_fitted(self)
        if self.init_queue_:
            return self.init_queue_[0]
        return self._select()

    def _select(self):
        raise NotImplementedError

    def partial_fit(self, path, feedback):
        """Record the feedback of the packet just routed on ``path``."""
        _check_fitted(self)
        self._observe(path, feedback)
        if self.init_queue_ and self.init_queue_[0] == path:
            self.init_queue_.pop(0)
        self.n_ += 1
        return self

    def _observe(self, path, feedback):
        self.stats_.update_semibandit(feedback)

    @property
    def in_initialization(self):
        return bool(self.init_queue_)


class GeoCombUCB(RoutingPolicy):
    """Path-index policy: route on the path with the smallest ``b`` (variant
    1) or ``c`` (variant 2) index.

    Parameters
    ----------
    variant : {1, 2}
    path_cap : int
        Maximum number of enumerated paths.
    prune : bool
        Variant 1 only.  Evaluate ``b`` in increasing order of ``c`` and stop
        once ``c`` exceeds the best ``b`` found; valid because ``c <= b``.
        The selected path is the same as with exhaustive evaluation.
    """

    def __init__(self, variant=1, path_cap=DEFAULT_PATH_CAP, prune=True):
        self.variant = variant
        self.path_cap = path_cap
        self.prune = prune

    def _setup(self, topology, params):
        if self.variant not in (1, 2):
            raise ValueError(f"variant must be 1 or 2, got {self.variant!r}")
        self.paths_ = enumerate_paths(topology, self.path_cap)
        self.H_ = max_hops(self.paths_)
        self.masks_ = np.array([p.mask for p in self.paths_], dtype=float)
        self._link_idx = [np.fromiter(p.links, dtype=np.int64) for p in self.paths_]
        self._ptr = np.cumsum([0] + [p.hops for p in self.paths_]).astype(np.int64)
        self._flat = np.concatenate(self._link_idx)

    def path_indexes(self, which=None):
        """Current index of every enumerated path (``which`` is "b" or "c")."""
        which = which or ("b" if self.variant == 1 else "c")
        c = index_c_matrix(self.masks_, self.stats_, self.n_, self.H_)
        if which == "c":
            return c
        return np.array([self._b(k) for k in range(len(self.paths_))])

    def _b(self, k):
        idx = self._link_idx[k]
        t = self.stats_.t[idx]
        means = self.stats_.s[idx] / t
        value, _, it = K.index_b_kernel(means, t.astype(float), f1(self.n_, self.H_))
        if it < 0:
            raise NoConvergence("multiplier search did not converge")
        return value

    def _select(self):
        c = index_c_matrix(self.masks_, self.stats_, self.n_, self.H_)
        if self.variant == 2:
            return self.paths_[int(np.argmin(c))]
        order = np.argsort(c, kind="stable") if self.prune else np.arange(c.size)
        k = K.select_b(order, self._ptr, self._flat, self.stats_.s, self.stats_.t, c,
                       f1(self.n_, self.H_), self.prune)
        if k < 0:
            raise NoConvergence("multiplier search did not converge")
        return self.paths_[int(k)]


class KLSR(RoutingPolicy):
    """Link-index policy: shortest path under the KL-UCB link indexes."""

    def __init__(self):
        pass

    def _setup(self, topology, params):
        self._weights = np.empty(topology.n_links)

    def link_indexes(self):
        return omega_vector(self.stats_, self.n_, out=self._weights)

    def _select(self):
        return _shortest_path_trusted(self.topology_, self.link_indexes())


class CUCB(RoutingPolicy):
    """Baseline: shortest path under ``1 / (theta_hat + sqrt(1.5 ln n / t))``.

    Parameters
    ----------
    clamp : bool
        Cap the optimistic success probability at 1.
    """

    def __init__(self, clamp=True):
        self.clamp = clamp

    def _setup(self, topology, params):
        self._weights = np.empty(topology.n_links)

    def link_indexes(self):
        return cucb_vector(self.stats_, self.n_, clamp=self.clamp, out=self._weights)

    def _select(self):
        return _shortest_path_trusted(self.topology_, self.link_indexes())


class Oracle(RoutingPolicy):
    """Always routes on the path with the smallest true expected delay."""

    explores = False

    def __init__(self):
        pass

    def _setup(self, topology, params):
        if not isinstance(params, LinkParams):
            raise ValueError("the oracle needs the true LinkParams in fit()")
        self.path_ = shortest_path(topology, params.mean_delay)

    def _select(self):
        return self.path_

    def _observe(self, path, feedback):
        if isinstance(feedback, SemiBanditFeedback):
            self.stats_.update_semibandit(feedback)


class UniformRandom(RoutingPolicy):
    """Picks a path uniformly at random for every packet."""

    explores = False

    def __init__(self, random_state=None, path_cap=DEFAULT_PATH_CAP):
        self.random_state = random_state
        self.path_cap = path_cap

    def _setup(self, topology, params):
        self.paths_ = enumerate_paths(topology, self.path_cap)
        self.rng_ = check_random_state(self.random_state)
        self._pending = None

    def _select(self):
        if self._pending is None:
            self._pending = self.paths_[int(self.rng_.integers(len(self.paths_)))]
        return self._pending

    def _observe(self, path, feedback):
        self._pending = None
        if isinstance(feedback, SemiBanditFeedback):
            self.stats_.update_semibandit(feedback)


class KLHHR(BaseEstimator):
    """Hop-by-hop routing on link indexes.

    In every slot the node holding the packet sends it on the outgoing link
    minimising ``omega(link) + J(head)``, where ``J`` is the smallest sum of
    link indexes from ``head`` to the destination.  Indexes use slot-level
    counters: every attempt updates them.

    Parameters
    ----------
    schedule : {"packet", "slot"}
        Round counter fed to the exploration level: packet number or slot.
    sync : {"slot", "packet"}
        "packet" holds observations back until the packet is delivered, so
        indexes only change between packets (as for source routing).
    recompute : {"always", "on_change"}
        "on_change" caches the cost-to-go table while indexes are unchanged;
        decisions are identical.
    slot_cap : int
        Largest number of slots a single packet may use.
    """

    hop_by_hop = True
    explores = True

    def __init__(self, schedule="packet", sync="slot", recompute="always", slot_cap=10**6):
        self.schedule = schedule
        self.sync = sync
        self.recompute = recompute
        self.slot_cap = slot_cap

    def fit(self, topology, params=None, *, initial_paths=None):
        for name, allowed in (("schedule", ("packet", "slot")), ("sync", ("slot", "packet")),
                              ("recompute", ("always", "on_change"))):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}")
        self.topology_ = topology
        self.stats_ = SlotStats(topology.n_links)
        self.n_ = 1
        self.init_queue_ = list(covering_paths(topology) if initial_paths is None else initial_paths)
        self._init_links = {}
        self._pending = []
        self._weights = np.empty(topology.n_links)
        self._version = 0
        self._cache_key = None
        self._cost = None
        self.revisits_ = 0
        self._start_packet()
        return self

    def _start_packet(self):
        self._visited = {self.topology_.source}
        if self.init_queue_:
            edges = self.topology_.edges
            self._init_links = {edges[i].tail: i for i in self.init_queue_[0].links}
        else:
            self._init_links = {}

    @property
    def in_initialization(self):
        return bool(self.init_queue_)

    def select_hop(self, node, slot=None):
        """Outgoing link for the packet currently held at ``node``."""
        _check_fitted(self)
        if node == self.topology_.destination:
            raise ValueError("packet already at the destination")
        if self._init_links:
            return self._init_links[node]
        round_ = self.n_ if self.schedule == "packet" or slot is None else slot
        cost = self.cost_to_go(round_)
        out = self.topology_.out_links[node]
        values = [self._weights[l.id] + cost[l.head] for l in out]
        best = min(values, default=math.inf)
        if math.isinf(best):
            raise Stranded(f"no outgoing link of node {node} reaches the destination")
        # same tie rule as shortest_path: smallest id among (near-)minimisers
        for l, c in zip(out, values):
            if _is_tight(c, best):
                return l.id

    def cost_to_go(self, round_=None):
        """Map node -> J for the current link indexes."""
        round_ = self.n_ if round_ is None else round_
        level = f2(round_)
        key = (self._version, level)
        if self.recompute == "on_change" and key == self._cache_key:
            return self._cost
        if K.omega_all(self.stats_.s, self.stats_.t_prime, level, self._weights):
            # links on no loop-free path escape the covering set; with no
            # attempts the confidence constraint is vacuous, so q = 1
            self._weights[self._weights < 0] = 1.0
        table = _bellman_ford(self.topology_.nodes, self.topology_.edges,
                              self.topology_.destination, self._weights)
        self._cost = {v: c for v, (c, _) in table.items()}
        self._cache_key = key
        return self._cost

    def observe(self, link, success):
        """Record one transmission attempt on ``link``."""
        if self.sync == "slot":
            self.stats_.update_slot(link, success)
            self._version += 1
        else:
            self._pending.append((link, success))
        if success:
            head = self.topology_.edges[link].head
            if head in self._visited:
                self.revisits_ += 1
            self._visited.add(head)

    def end_packet(self):
        """Close the current packet (it has reached the destination)."""
        for link, success in self._pending:
            self.stats_.update_slot(link, success)
        if self._pending:
            self._version += 1
        self._pending = []
        if self.init_queue_:
            self.init_queue_.pop(0)
        self.n_ += 1
        self._start_packet()
        return self


_REGISTRY = {
    "geocombucb1": lambda: GeoCombUCB(variant=1),
    "geocombucb2": lambda: GeoCombUCB(variant=2),
    "klsr": KLSR,
    "klhhr": KLHHR,
    "cucb": CUCB,
    "oracle": Oracle,
    "uniform": UniformRandom,
}


def make_policy(name, **params):
    """Policy instance from its CLI/config name."""
    try:
        policy = _REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}") from None
    return policy.set_params(**params) if params else policy
