"""Command-line entry point: ``georouting {simulate,bounds,paths}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from .bounds import LineNetwork, c1_line, c2_line, ratio_csv, ratio_experiment
from .env import LinkParams
from .graph import covering_paths, enumerate_paths, load_topology, topology_from_dict
from .harness import ExperimentConfig, run_experiment, write_csv
from .policies import POLICY_NAMES


def _parse_hops(text):
    """``"0.5,0.25;0.6,0.3"`` -> ((0.5, 0.25), (0.6, 0.3))."""
    return tuple(tuple(float(x) for x in hop.split(",")) for hop in text.split(";") if hop.strip())


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def cmd_simulate(args):
    config = ExperimentConfig.from_json(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.runs is not None:
        changes["runs"] = args.runs
    if args.packets is not None:
        changes["packets"] = args.packets
    if args.policies:
        wanted = args.policies.split(",")
        known = {p.label: asdict(p) for p in config.policies}
        changes["policies"] = [known.get(w, w) for w in wanted]
    if changes:
        config = config.replace(**changes)
    result = run_experiment(config, workers=args.workers)
    text = write_csv(result, None, kind=args.regret)
    _emit(text, args.out)
    return 0


def cmd_bounds(args):
    if args.theta:
        net = LineNetwork(_parse_hops(args.theta))
        c2 = c2_line(net)
        c1 = c1_line(net, args.tail_eps)
        lines = ["H,C1,C2,ratio,c1_rel_error",
                 f"{net.n_hops},{c1.value!r},{c2!r},{(c1.value / c2) if c2 > 0 else float('nan')!r},"
                 f"{c1.rel_error!r}"]
        _emit("\n".join(lines) + "\n", args.out)
        return 0
    lo, hi = (int(x) for x in args.hops.split("-")) if "-" in args.hops else (int(args.hops),) * 2
    rows = ratio_experiment(range(lo, hi + 1), links_per_hop=args.links_per_hop, draws=args.draws,
                            theta_law=(args.low, args.high), seed=args.seed,
                            branching_hops=None if args.branching_hops == 0 else args.branching_hops,
                            tail_eps=args.tail_eps)
    _emit(ratio_csv(rows), args.out)
    return 0


def cmd_paths(args):
    if args.topology:
        topo = load_topology(args.topology)
    elif args.grid:
        rows, cols = (int(x) for x in args.grid.lower().split("x"))
        topo = topology_from_dict({"generator": "grid", "rows": rows, "cols": cols})
    else:
        topo = topology_from_dict({"generator": "line", "hops": args.line,
                                   "links_per_hop": args.links_per_hop})
    paths = enumerate_paths(topo, args.cap)
    params = LinkParams(json.loads(args.theta)) if args.theta else None
    cover = {p.links for p in covering_paths(topo, paths)}
    out = [f"# {topo.name}: {len(topo.nodes)} nodes, {topo.n_links} links, {len(paths)} paths"]
    header = "path,hops,links,covering" + (",expected_delay" if params else "")
    out.append(header)
    for k, p in enumerate(paths):
        row = f"{k},{p.hops},{' '.join(map(str, p.links))},{int(p.links in cover)}"
        if params:
            row += f",{params.path_delay(p)!r}"
        out.append(row)
    _emit("\n".join(out) + "\n", args.out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="georouting", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a regret experiment and write CSV")
    sim.add_argument("--config", required=True, help="experiment JSON file")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--runs", type=int)
    sim.add_argument("--packets", type=int)
    sim.add_argument("--policies", help=f"comma-separated subset of: {', '.join(POLICY_NAMES)}")
    sim.add_argument("--out", default="-")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--regret", choices=("realized", "pseudo"), default="realized")
    sim.set_defaults(func=cmd_simulate)

    bnd = sub.add_parser("bounds", help="line-network lower bounds or the C1/C2 ratio sweep")
    bnd.add_argument("--theta", help='per-hop probabilities, e.g. "0.5,0.25;0.6,0.3"')
    bnd.add_argument("--hops", default="1-6", help="sweep range, e.g. 1-6")
    bnd.add_argument("--draws", type=int, default=1000)
    bnd.add_argument("--links-per-hop", type=int, default=2)
    bnd.add_argument("--branching-hops", type=int, default=1,
                     help="hops with parallel links (0 = every hop)")
    bnd.add_argument("--low", type=float, default=0.0)
    bnd.add_argument("--high", type=float, default=1.0)
    bnd.add_argument("--seed", type=int, default=0)
    bnd.add_argument("--tail-eps", type=float, default=1e-10)
    bnd.add_argument("--out", default="-")
    bnd.set_defaults(func=cmd_bounds)

    pth = sub.add_parser("paths", help="enumerate the paths of a topology")
    src = pth.add_mutually_exclusive_group()
    src.add_argument("--topology", help="topology JSON file")
    src.add_argument("--grid", help="ROWSxCOLS directed grid")
    src.add_argument("--line", type=int, default=2, help="line network with this many hops")
    pth.add_argument("--links-per-hop", type=int, default=2)
    pth.add_argument("--theta", help="JSON list of link probabilities")
    pth.add_argument("--cap", type=int, default=10_000)
    pth.add_argument("--out", default="-")
    pth.set_defaults(func=cmd_paths)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
