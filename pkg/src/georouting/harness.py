"""Replicated regret simulations and their CSV output.

An experiment is described by an :class:`ExperimentConfig` (usually read
from JSON).  Every (policy, run) pair draws from its own random stream,
derived from the master seed and the pair's identity, so adding a policy
to a config leaves the other policies' results unchanged.

Two simulation modes exist:

* ``"source"``: the path is fixed at the source and the whole packet is
  simulated at once (one geometric draw per link).
* ``"slot"``: the packet moves slot by slot (one Bernoulli draw per
  attempt).  Hop-by-hop policies need this mode; source policies may use it
  too and then simply follow their path.

Regret is reported in two flavours.  *Realized* regret subtracts ``n D*``
from the realized delays and is the default.  *Pseudo* regret replaces each
realized delay by its conditional expectation given the routing decisions
(for source routing, the expected delay of the chosen path; for hop-by-hop,
a per-slot advantage against the true cost-to-go).  Both have the same
expectation; the pseudo variant has far less noise.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import stats as sps

from .env import (
    BanditFeedback,
    LinkParams,
    LinkStreams,
    SemiBanditFeedback,
    attempt_transmission,
    make_rng,
    matched_theta,
    route_packet_source,
)
from .exceptions import SlotCapExceeded
from .graph import _bellman_ford, covering_paths, enumerate_paths, shortest_path, topology_from_dict
from .policies import POLICY_NAMES, make_policy
from .validation import check_positive_int

CHECKPOINT_RATIO = 1.3
DEFAULT_SLOT_CAP = 10**6

_LEARNERS = {"geocombucb1", "geocombucb2", "klsr", "klhhr", "cucb"}


@dataclass(frozen=True)
class PolicySpec:
    """One policy entry of a config.

    ``label`` names the policy in the output (defaults to ``name``);
    ``params`` go to the estimator's ``set_params``.
    """

    name: str
    label: str = None
    params: dict = field(default_factory=dict)
    mode: str = None
    feedback: str = "semibandit"

    def __post_init__(self):
        if self.name not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.name!r}; choose from {', '.join(POLICY_NAMES)}")
        if self.label is None:
            object.__setattr__(self, "label", self.name)
        mode = self.mode or ("slot" if self.name == "klhhr" else "source")
        if mode not in ("source", "slot"):
            raise ValueError(f"mode must be 'source' or 'slot', got {mode!r}")
        if self.name == "klhhr" and mode != "slot":
            raise ValueError("klhhr routes hop by hop and needs mode 'slot'")
        object.__setattr__(self, "mode", mode)
        if self.feedback not in ("semibandit", "bandit"):
            raise ValueError(f"feedback must be 'semibandit' or 'bandit', got {self.feedback!r}")
        if self.feedback == "bandit" and self.name in _LEARNERS:
            raise ValueError(f"{self.name} learns from per-link delays and needs semi-bandit feedback")

    @classmethod
    def from_obj(cls, obj):
        if isinstance(obj, PolicySpec):
            return obj
        if isinstance(obj, str):
            return cls(obj)
        return cls(**obj)

    def build(self, seed=None, run=0):
        """Fresh estimator.  An unset ``random_state`` is derived from
        ``(seed, label, run)`` so that randomized policies are reproducible."""
        policy = make_policy(self.name, **self.params)
        if seed is not None and policy.get_params().get("random_state", 0) is None:
            rng = make_rng(seed, "policy", self.label, run)
            policy.set_params(random_state=int(rng.integers(2**63)))
        return policy


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce an experiment.

    Parameters
    ----------
    topology : dict
        See :func:`georouting.graph.topology_from_dict`.
    theta : dict
        One of ``{"values": [...]}``, ``{"law": "uniform", "low": a,
        "high": b, "seed": s}`` or ``{"theta_min": a, "delta_min": d,
        "high": b, "seed": s}``.
    policies : list
        Policy names or :class:`PolicySpec` mappings.
    packets, runs, seed : int
    checkpoints : list of int, optional
        Packet counts at which cumulative regret is recorded; a geometric
        grid up to ``packets`` by default.
    coupled : bool
        Key random streams by run only (one stream per link), so that all
        policies face the same link noise.
    slot_cap : int
        Per-packet slot limit in slot mode.
    """

    topology: dict
    theta: dict
    policies: tuple
    packets: int = 1000
    runs: int = 10
    seed: int = 0
    checkpoints: Optional[tuple] = None
    coupled: bool = False
    slot_cap: int = DEFAULT_SLOT_CAP

    def __post_init__(self):
        check_positive_int(self.packets, "packets")
        check_positive_int(self.runs, "runs")
        check_positive_int(self.slot_cap, "slot_cap")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        specs = tuple(PolicySpec.from_obj(p) for p in self.policies)
        if not specs:
            raise ValueError("at least one policy is required")
        labels = [p.label for p in specs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate policy labels {labels}")
        object.__setattr__(self, "policies", specs)
        cps = default_checkpoints(self.packets) if self.checkpoints is None else self.checkpoints
        cps = tuple(sorted({int(c) for c in cps}))
        if not cps or cps[0] < 1 or cps[-1] > self.packets:
            raise ValueError("checkpoints must lie in [1, packets]")
        object.__setattr__(self, "checkpoints", cps)
        object.__setattr__(self, "topology", dict(self.topology))
        object.__setattr__(self, "theta", dict(self.theta))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        if "policies" in d:
            d["policies"] = tuple(d["policies"])
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = asdict(self)
        d["policies"] = [asdict(p) for p in self.policies]
        d["checkpoints"] = list(self.checkpoints)
        return d

    def replace(self, **changes):
        d = self.to_dict()
        if "packets" in changes and "checkpoints" not in changes:
            d["checkpoints"] = None
        d.update(changes)
        return type(self).from_dict(d)

    def build_topology(self):
        return topology_from_dict(self.topology)

    def build_params(self, topology=None):
        """Realize the link parameters (deterministic given the config)."""
        topology = topology or self.build_topology()
        spec = dict(self.theta)
        n = topology.n_links
        if "values" in spec:
            params = LinkParams(spec["values"])
        elif spec.get("law") == "uniform":
            rng = make_rng(spec.get("seed", self.seed), "theta")
            low, high = spec.get("low", 0.1), spec.get("high", 0.99)
            params = LinkParams(low + (high - low) * (1.0 - rng.random(n)))
        elif "theta_min" in spec:
            rng = make_rng(spec.get("seed", self.seed), "theta")
            paths = enumerate_paths(topology)
            params = matched_theta(paths, n, spec["theta_min"], spec["delta_min"], rng,
                                   high=spec.get("high", 0.95))
        else:
            raise ValueError(f"cannot interpret theta spec {spec}")
        if params.n_links != n:
            raise ValueError(f"theta has {params.n_links} entries for {n} links")
        return params


def default_checkpoints(n, ratio=CHECKPOINT_RATIO):
    """Geometric grid ``1, ceil(ratio), ...`` up to and including ``n``."""
    out = {1, int(n)}
    x = 1.0
    while x < n:
        out.add(int(math.ceil(x)))
        x *= ratio
    return tuple(sorted(c for c in out if c <= n))


# ---------------------------------------------------------------------------
# traces


@dataclass
class RegretTrace:
    """One run of one policy.

    ``cumulative_regret[j]`` is the realized regret after
    ``checkpoints[j]`` packets; ``pseudo_regret`` its lower-noise
    counterpart.  ``delays`` holds every packet's delay in slots.
    ``throughput_regret[j]`` is ``T / D* - (packets delivered by slot T)``
    at ``T = slot_checkpoints[j]``.
    """

    policy: str
    run: int
    checkpoints: np.ndarray
    cumulative_regret: np.ndarray
    pseudo_regret: np.ndarray
    delays: np.ndarray
    d_star: float
    mode: str = "source"
    slot_checkpoints: np.ndarray = None
    throughput_regret: np.ndarray = None
    revisits: int = 0

    def __post_init__(self):
        if self.slot_checkpoints is None:
            delivered = np.cumsum(self.delays)
            self.slot_checkpoints = np.array(default_checkpoints(int(delivered[-1])), dtype=np.int64)
            n_delivered = np.searchsorted(delivered, self.slot_checkpoints, side="right")
            self.throughput_regret = self.slot_checkpoints / self.d_star - n_delivered

    def regret(self, kind="realized"):
        if kind == "realized":
            return self.cumulative_regret
        if kind == "pseudo":
            return self.pseudo_regret
        raise ValueError(f"regret kind must be 'realized' or 'pseudo', got {kind!r}")


def _finish(label, run, checkpoints, delays, expected, d_star, mode, revisits=0):
    cps = np.asarray(checkpoints, dtype=np.int64)
    n = np.arange(1, delays.size + 1)
    realized = np.cumsum(delays) - n * d_star
    pseudo = np.cumsum(expected) - n * d_star
    return RegretTrace(label, run, cps, realized[cps - 1], pseudo[cps - 1], delays, d_star, mode,
                       revisits=revisits)


def simulate_source_routing(topology, params, policy, n_packets, rng, checkpoints=None, *,
                            feedback="semibandit", initial_paths=None, label=None, run=0):
    """Route ``n_packets`` packets with a source-routing policy.

    The policy must already be configured (not fitted); it is fitted here.
    Returns a :class:`RegretTrace`.
    """
    checkpoints = default_checkpoints(n_packets) if checkpoints is None else checkpoints
    policy.fit(topology, params, initial_paths=initial_paths)
    d_star = params.path_delay(shortest_path(topology, params.mean_delay))
    mean = params.mean_delay
    delays = np.empty(n_packets, dtype=np.int64)
    expected = np.empty(n_packets)
    cache = {}
    for k in range(n_packets):
        path = policy.select_path()
        fb = route_packet_source(path, params, rng, feedback="semibandit")
        delays[k] = fb.total
        e = cache.get(path.links)
        if e is None:
            e = cache[path.links] = float(sum(mean[i] for i in path.links))
        expected[k] = e
        policy.partial_fit(path, fb if feedback == "semibandit" else BanditFeedback(fb.total))
    return _finish(label or type(policy).__name__, run, checkpoints, delays, expected, d_star,
                   "source")


def simulate_hop_by_hop(topology, params, policy, n_packets, rng, checkpoints=None, *,
                        feedback="semibandit", initial_paths=None, slot_cap=DEFAULT_SLOT_CAP,
                        label=None, run=0):
    """Slot-level simulation.

    Hop-by-hop policies choose a link in every slot; source policies pick a
    path at injection and the packet follows it.  A new packet is injected
    as soon as the previous one is delivered.  Raises SlotCapExceeded when a
    packet needs more than ``slot_cap`` slots.
    """
    checkpoints = default_checkpoints(n_packets) if checkpoints is None else checkpoints
    policy.fit(topology, params, initial_paths=initial_paths)
    table = _bellman_ford(topology.nodes, topology.edges, topology.destination, params.mean_delay)
    value = {v: c for v, (c, _) in table.items()}
    theta = params.theta
    src, dest = topology.source, topology.destination
    d_star = value[src]
    edges = topology.edges
    delays = np.empty(n_packets, dtype=np.int64)
    expected = np.empty(n_packets)
    slot = 1
    hop_by_hop = getattr(policy, "hop_by_hop", False)
    cap = min(slot_cap, getattr(policy, "slot_cap", slot_cap))
    for k in range(n_packets):
        used = 0
        adv = 0.0
        if hop_by_hop:
            node = src
            while node != dest:
                link = policy.select_hop(node, slot)
                ok = attempt_transmission(link, params, rng)
                policy.observe(link, ok)
                head = edges[link].head
                adv += 1.0 + theta[link] * (value[head] - value[node])
                slot += 1
                used += 1
                if ok:
                    node = head
                if used >= cap and node != dest:
                    raise SlotCapExceeded(f"packet {k + 1} exceeded {cap} slots (run {run})")
            policy.end_packet()
        else:
            path = policy.select_path()
            per_link = {}
            for link in path.links:
                tries = 0
                node, head = edges[link].tail, edges[link].head
                while True:
                    tries += 1
                    adv += 1.0 + theta[link] * (value[head] - value[node])
                    if attempt_transmission(link, params, rng):
                        break
                    if used + tries >= cap:
                        raise SlotCapExceeded(f"packet {k + 1} exceeded {cap} slots (run {run})")
                per_link[link] = tries
                used += tries
            slot += used
            fb = SemiBanditFeedback(per_link)
            policy.partial_fit(path, fb if feedback == "semibandit" else BanditFeedback(used))
        delays[k] = used
        # the advantages telescope: their sum has mean E[delay] - V*(source)
        expected[k] = d_star + adv
    return _finish(label or type(policy).__name__, run, checkpoints, delays, expected, d_star,
                   "slot", revisits=getattr(policy, "revisits_", 0))


# ---------------------------------------------------------------------------
# experiments


def _run_rng(config, spec, run, n_links):
    if config.coupled:
        return LinkStreams(config.seed, n_links, "run", run)
    return make_rng(config.seed, "run", spec.label, run)


def run_source_routing(config, spec, run, *, topology=None, params=None, initial_paths=None):
    """One replication of a source-mode policy of ``config``."""
    spec = PolicySpec.from_obj(spec)
    topology = topology or config.build_topology()
    params = params or config.build_params(topology)
    rng = _run_rng(config, spec, run, topology.n_links)
    return simulate_source_routing(topology, params, spec.build(config.seed, run), config.packets, rng,
                                   config.checkpoints, feedback=spec.feedback,
                                   initial_paths=initial_paths, label=spec.label, run=run)


def run_hop_by_hop(config, spec, run, *, topology=None, params=None, initial_paths=None):
    """One replication of a slot-mode policy of ``config``."""
    spec = PolicySpec.from_obj(spec)
    topology = topology or config.build_topology()
    params = params or config.build_params(topology)
    rng = _run_rng(config, spec, run, topology.n_links)
    return simulate_hop_by_hop(topology, params, spec.build(config.seed, run), config.packets, rng,
                               config.checkpoints, feedback=spec.feedback,
                               initial_paths=initial_paths, slot_cap=config.slot_cap,
                               label=spec.label, run=run)


def run_one(config, spec, run, **kw):
    spec = PolicySpec.from_obj(spec)
    runner = run_hop_by_hop if spec.mode == "slot" else run_source_routing
    return runner(config, spec, run, **kw)


def _worker(args):
    config_dict, spec_dict, run = args
    config = ExperimentConfig.from_dict(config_dict)
    topology = config.build_topology()
    params = config.build_params(topology)
    return run_one(config, PolicySpec(**spec_dict), run, topology=topology, params=params,
                   initial_paths=covering_paths(topology))


class ExperimentResult(NamedTuple):
    config: ExperimentConfig
    params: LinkParams
    traces: dict  # label -> list of RegretTrace, ordered by run


def run_experiment(config, workers=1):
    """All policies and runs of ``config``.

    Every learning policy starts from the same covering set of paths.  With
    ``workers > 1`` replications run in separate processes; results do not
    depend on the number of workers.
    """
    topology = config.build_topology()
    params = config.build_params(topology)
    jobs = [(spec, run) for spec in config.policies for run in range(config.runs)]
    if workers and workers > 1:
        cfg = config.to_dict()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_worker, [(cfg, asdict(s), r) for s, r in jobs]))
    else:
        cover = covering_paths(topology)
        out = [run_one(config, s, r, topology=topology, params=params, initial_paths=cover)
               for s, r in jobs]
    traces = {spec.label: [] for spec in config.policies}
    for (spec, _), tr in zip(jobs, out):
        traces[spec.label].append(tr)
    return ExperimentResult(config, params, traces)


class Summary(NamedTuple):
    checkpoints: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n_runs: int


def aggregate(traces, kind="realized", level=0.95):
    """Mean and normal-approximation confidence band across runs."""
    traces = list(traces)
    if len(traces) < 2:
        raise ValueError("aggregate needs at least two traces")
    cps = traces[0].checkpoints
    for tr in traces[1:]:
        if not np.array_equal(tr.checkpoints, cps):
            raise ValueError("traces have misaligned checkpoints")
    values = np.vstack([tr.regret(kind) for tr in traces])
    mean = values.mean(axis=0)
    stderr = values.std(axis=0, ddof=1) / math.sqrt(len(traces))
    z = sps.norm.ppf(0.5 + level / 2.0)
    return Summary(cps.copy(), mean, stderr, mean - z * stderr, mean + z * stderr, len(traces))


# ---------------------------------------------------------------------------
# CSV


def _fmt(x):
    return repr(float(x))


def results_csv(result, kind="realized"):
    """CSV text for ``result``: a ``#`` metadata header then one row per
    (policy, run or summary statistic, checkpoint)."""
    buf = io.StringIO()
    meta = {"config": result.config.to_dict(), "theta": result.params.theta.tolist(),
            "regret": kind}
    for key, val in meta.items():
        buf.write(f"# {key}: {json.dumps(val, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["policy", "run", "checkpoint_n", "cumulative_regret"])
    for label, traces in result.traces.items():
        for tr in traces:
            for n, r in zip(tr.checkpoints, tr.regret(kind)):
                w.writerow([label, tr.run, int(n), _fmt(r)])
        if len(traces) >= 2:
            s = aggregate(traces, kind)
            for name, col in (("mean", s.mean), ("ci_lo", s.ci_lo), ("ci_hi", s.ci_hi)):
                for n, r in zip(s.checkpoints, col):
                    w.writerow([label, name, int(n), _fmt(r)])
    return buf.getvalue()


def write_csv(result, path, kind="realized"):
    text = results_csv(result, kind)
    if path in (None, "-"):
        return text
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return text
