"""Network topologies, loop-free path enumeration and additive shortest paths.

Links are identified by consecutive integer ids ``0 .. n_links - 1`` so that
per-link quantities (success probabilities, counters, indexes) live in plain
arrays indexed by link id.  Every solver breaks ties towards the
lexicographically smallest sequence of link ids, which keeps simulation traces
reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path as _FsPath
from typing import NamedTuple

import numpy as np

from .exceptions import NoPath, PathExplosion
from .validation import check_positive_int, check_weights

DEFAULT_PATH_CAP = 10_000

# Relative slack when deciding that an edge is tight in a cost-to-go table.
_TIGHT_RTOL = 1e-12


class Link(NamedTuple):
    tail: int
    head: int
    id: int


@dataclass(frozen=True)
class NetworkTopology:
    """Directed graph with a single source/destination pair.

    Parameters
    ----------
    nodes : sequence of int
    edges : sequence of (tail, head) or Link
        Edge ``k`` of the sequence receives link id ``k`` unless explicit
        ``Link`` objects are passed, in which case their ids must be a
        permutation of ``0 .. len(edges) - 1``.
    source, destination : int
    """

    nodes: tuple
    edges: tuple
    source: int
    destination: int
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        links = []
        for k, e in enumerate(self.edges):
            if isinstance(e, Link):
                links.append(e)
            else:
                tail, head = e
                links.append(Link(tail, head, k))
        links.sort(key=lambda l: l.id)
        if [l.id for l in links] != list(range(len(links))):
            raise ValueError("link ids must be exactly 0 .. n_links - 1")
        node_set = set(nodes)
        if len(node_set) != len(nodes):
            raise ValueError("duplicate node ids")
        for l in links:
            if l.tail not in node_set or l.head not in node_set:
                raise ValueError(f"link {l} references an unknown node")
            if l.tail == l.head:
                raise ValueError(f"self-loop on link {l.id}")
        if self.source not in node_set or self.destination not in node_set:
            raise ValueError("source and destination must be nodes of the graph")
        if self.source == self.destination:
            raise ValueError("source and destination must differ")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", tuple(links))
        if not np.isfinite(self._hop_distances()[self.source]):
            raise NoPath(f"destination {self.destination} unreachable from {self.source}")

    @property
    def n_links(self):
        return len(self.edges)

    @cached_property
    def out_links(self):
        """Map node -> tuple of outgoing links sorted by id."""
        out = {v: [] for v in self.nodes}
        for l in self.edges:
            out[l.tail].append(l)
        return {v: tuple(ls) for v, ls in out.items()}

    def _hop_distances(self):
        return {v: c for v, (c, _) in min_cost_to_destination(self, np.ones(len(self.edges))).items()}

    def to_dict(self):
        return {
            "name": self.name,
            "nodes": list(self.nodes),
            "edges": [[l.tail, l.head] for l in self.edges],
            "source": self.source,
            "destination": self.destination,
        }


@dataclass(frozen=True, order=True)
class Path:
    """A loop-free source-to-destination path, stored as its link-id sequence.

    Ordering compares link sequences lexicographically.
    """

    links: tuple
    n_links: int = field(compare=False)

    @property
    def hops(self):
        return len(self.links)

    @cached_property
    def mask(self):
        m = np.zeros(self.n_links, dtype=np.int8)
        m[list(self.links)] = 1
        m.setflags(write=False)
        return m

    def cost(self, weights):
        return float(sum(weights[i] for i in self.links))

    def __iter__(self):
        return iter(self.links)

    def __len__(self):
        return len(self.links)


def path_from_links(topology, links):
    """Build a Path and check that ``links`` is a loop-free s->d walk."""
    links = tuple(int(i) for i in links)
    if not links:
        raise ValueError("empty path")
    node = topology.source
    seen = {node}
    for i in links:
        l = topology.edges[i]
        if l.tail != node:
            raise ValueError(f"link {i} does not leave node {node}")
        node = l.head
        if node in seen:
            raise ValueError(f"path revisits node {node}")
        seen.add(node)
    if node != topology.destination:
        raise ValueError("path does not end at the destination")
    return Path(links, topology.n_links)


def enumerate_paths(topology, cap=DEFAULT_PATH_CAP, *, start=None):
    """All loop-free paths to the destination, in lexicographic link-id order.

    Raises
    ------
    PathExplosion
        If more than ``cap`` paths exist.
    NoPath
        If there are none.
    """
    cap = check_positive_int(cap, "cap")
    start = topology.source if start is None else start
    dest = topology.destination
    out = topology.out_links
    found = []
    stack_links = []
    on_path = {start}

    # Explicit DFS with per-node iterators: the recursion depth of a
    # recursive version equals |V|, which can exceed Python's limit.
    iters = [iter(out[start])]
    while iters:
        nxt = next(iters[-1], None)
        if nxt is None:
            iters.pop()
            if stack_links:
                on_path.discard(topology.edges[stack_links.pop()].head)
            continue
        if nxt.head in on_path:
            continue
        if nxt.head == dest:
            found.append(tuple(stack_links) + (nxt.id,))
            if len(found) > cap:
                raise PathExplosion(f"more than {cap} loop-free paths")
            continue
        stack_links.append(nxt.id)
        on_path.add(nxt.head)
        iters.append(iter(out[nxt.head]))

    if not found:
        raise NoPath(f"no path from {start} to {dest}")
    found.sort()
    return [Path(p, topology.n_links) for p in found]


def min_cost_to_destination(topology, weights):
    """Bellman-Ford cost-to-go towards the destination.

    Returns
    -------
    dict
        ``node -> (J, next_link_id)``.  Unreachable nodes map to
        ``(math.inf, None)`` and the destination to ``(0.0, None)``.  The
        next-hop pointer is the smallest link id attaining the minimum.
    """
    weights = check_weights(weights, topology.n_links)
    return _bellman_ford(topology.nodes, topology.edges, topology.destination, weights)


def _bellman_ford_costs(nodes, edges, dest, weights):
    cost = dict.fromkeys(nodes, math.inf)
    cost[dest] = 0.0
    for _ in range(len(nodes) - 1):
        changed = False
        for l in edges:
            c = weights[l.id] + cost[l.head]
            if c < cost[l.tail]:
                cost[l.tail] = c
                changed = True
        if not changed:
            break
    return cost


def _bellman_ford(nodes, edges, dest, weights):
    cost = _bellman_ford_costs(nodes, edges, dest, weights)
    table = {}
    for v in nodes:
        if v == dest or math.isinf(cost[v]):
            table[v] = (cost[v], None)
    best = {}
    for l in edges:
        if l.tail in table:
            continue
        c = weights[l.id] + cost[l.head]
        if _is_tight(c, cost[l.tail]) and l.tail not in best:
            best[l.tail] = l.id
    for v, i in best.items():
        table[v] = (cost[v], i)
    return table


def _is_tight(candidate, optimum):
    return candidate <= optimum + _TIGHT_RTOL * max(1.0, abs(optimum))


def shortest_path(topology, weights):
    """Minimum-weight loop-free s->d path under nonnegative link weights.

    Among minimum-cost paths the lexicographically smallest link-id sequence
    is returned.
    """
    return _shortest_path_trusted(topology, check_weights(weights, topology.n_links))


def _shortest_path_trusted(topology, weights):
    # caller guarantees a nonnegative float array of the right length
    cost = _bellman_ford_costs(topology.nodes, topology.edges, topology.destination, weights)
    return _tight_path(topology, weights, cost)


def _tight_path(topology, weights, cost):
    # Every optimal path is made only of tight edges, and any simple path of
    # tight edges ending at d telescopes to the optimum.  A DFS over tight
    # edges in id order therefore yields the lexicographically smallest
    # optimal path; backtracking only matters for zero-weight cycles.
    s, d = topology.source, topology.destination
    if math.isinf(cost[s]):
        raise NoPath(f"destination {d} unreachable")
    out = topology.out_links
    stack = [iter(out[s])]
    seq = []
    on_path = {s}
    while stack:
        l = next(stack[-1], None)
        if l is None:
            stack.pop()
            if seq:
                on_path.discard(topology.edges[seq.pop()].head)
            continue
        if l.head in on_path or math.isinf(cost[l.head]):
            continue
        if not _is_tight(weights[l.id] + cost[l.head], cost[l.tail]):
            continue
        seq.append(l.id)
        if l.head == d:
            return Path(tuple(seq), topology.n_links)
        on_path.add(l.head)
        stack.append(iter(out[l.head]))
    raise NoPath("no tight path found")  # pragma: no cover - guarded by cost[s] finite


def covering_paths(topology, paths=None, cap=DEFAULT_PATH_CAP):
    """Small set of s->d paths whose union touches every usable link.

    Greedy set cover over the enumerated path set (most new links first,
    lexicographic ties).  When enumeration exceeds ``cap`` the cover is
    built per link with a DFS through that link instead.  Links that lie on
    no loop-free s->d path are left uncovered.
    """
    if paths is None:
        try:
            paths = enumerate_paths(topology, cap)
        except PathExplosion:
            return _covering_by_link(topology)
    usable = set()
    for p in paths:
        usable.update(p.links)
    uncovered = set(usable)
    cover = []
    while uncovered:
        best = min(paths, key=lambda p: (-len(uncovered.intersection(p.links)), p.links))
        cover.append(best)
        uncovered.difference_update(best.links)
    return cover


def _covering_by_link(topology):
    cover = []
    covered = set()
    for l in topology.edges:
        if l.id in covered:
            continue
        p = _path_through(topology, l)
        if p is not None:
            cover.append(p)
            covered.update(p.links)
    return cover


def _path_through(topology, link):
    # simple path s -> link.tail, then link, then link.head -> d, disjoint
    s, d = topology.source, topology.destination
    out = topology.out_links

    def dfs(start, goal, banned):
        stack = [(start, ())]
        seen = {start}
        while stack:
            v, seq = stack.pop()
            if v == goal:
                return seq
            for l in reversed(out[v]):
                if l.head in seen or l.head in banned:
                    continue
                seen.add(l.head)
                stack.append((l.head, seq + (l.id,)))
        return None

    for first in _simple_paths_to(topology, s, link.tail, banned={link.head}):
        nodes = {s} | {topology.edges[i].head for i in first}
        rest = dfs(link.head, d, nodes)
        if rest is not None:
            return Path(first + (link.id,) + rest, topology.n_links)
    return None


def _simple_paths_to(topology, start, goal, banned, limit=1000):
    if start == goal:
        yield ()
        return
    out = topology.out_links
    stack = [(start, (), frozenset({start}))]
    count = 0
    while stack and count < limit:
        v, seq, seen = stack.pop()
        for l in reversed(out[v]):
            if l.head in seen or l.head in banned:
                continue
            if l.head == goal:
                count += 1
                yield seq + (l.id,)
                continue
            stack.append((l.head, seq + (l.id,), seen | {l.head}))


def max_hops(paths):
    """H: the largest hop count among ``paths``."""
    return max(p.hops for p in paths)


# ---------------------------------------------------------------------------
# generators and file IO


def line_topology(hops, links_per_hop=2):
    """Line network: ``hops`` consecutive hops, each with parallel links.

    Node ``k`` connects to node ``k + 1``; links of hop ``k`` take ids
    ``k * links_per_hop ... (k + 1) * links_per_hop - 1``.
    """
    hops = check_positive_int(hops, "hops")
    per_hop = _per_hop_list(links_per_hop, hops)
    edges = [(k, k + 1) for k in range(hops) for _ in range(per_hop[k])]
    return NetworkTopology(
        nodes=tuple(range(hops + 1)),
        edges=tuple(edges),
        source=0,
        destination=hops,
        name=f"line(H={hops})",
    )


def _per_hop_list(links_per_hop, hops):
    if isinstance(links_per_hop, int):
        per_hop = [links_per_hop] * hops
    else:
        per_hop = list(links_per_hop)
    if len(per_hop) != hops or any(int(k) < 1 for k in per_hop):
        raise ValueError("links_per_hop must give a positive count for every hop")
    return [int(k) for k in per_hop]


def grid_topology(rows=4, cols=4):
    """Directed grid, source at the top-left and destination at the bottom-right.

    Links point right or down only, so every s->d path has
    ``(rows - 1) + (cols - 1)`` hops; the default 4x4 grid has 24 links and
    20 six-hop paths.  Node ``r * cols + c`` sits at row ``r``, column ``c``.
    """
    rows = check_positive_int(rows, "rows")
    cols = check_positive_int(cols, "cols")
    if rows * cols < 2:
        raise ValueError("grid needs at least two nodes")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return NetworkTopology(
        nodes=tuple(range(rows * cols)),
        edges=tuple(edges),
        source=0,
        destination=rows * cols - 1,
        name=f"grid({rows}x{cols})",
    )


def topology_from_dict(spec):
    """Build a topology from its JSON description.

    Accepted forms::

        {"generator": "line", "hops": 3, "links_per_hop": 2}
        {"generator": "grid", "rows": 4, "cols": 4}
        {"nodes": [0, 1, 2], "edges": [[0, 1], [1, 2], [0, 2]],
         "source": 0, "destination": 2}

    Explicit edges may also be objects ``{"id": 0, "tail": 0, "head": 1}``.
    """
    spec = dict(spec)
    gen = spec.pop("generator", None)
    if gen == "line":
        return line_topology(spec.get("hops", 1), spec.get("links_per_hop", 2))
    if gen == "grid":
        return grid_topology(spec.get("rows", 4), spec.get("cols", 4))
    if gen is not None:
        raise ValueError(f"unknown topology generator {gen!r}")
    edges = []
    for k, e in enumerate(spec["edges"]):
        if isinstance(e, dict):
            edges.append(Link(e["tail"], e["head"], e.get("id", k)))
        else:
            edges.append(Link(e[0], e[1], k))
    nodes = spec.get("nodes")
    if nodes is None:
        nodes = sorted({v for l in edges for v in (l.tail, l.head)})
    return NetworkTopology(
        nodes=tuple(nodes),
        edges=tuple(edges),
        source=spec["source"],
        destination=spec["destination"],
        name=spec.get("name", "custom"),
    )


def load_topology(path):
    with open(_FsPath(path)) as fh:
        return topology_from_dict(json.load(fh))
