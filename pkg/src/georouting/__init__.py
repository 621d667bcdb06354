"""Online shortest-path routing over links with geometric delays.

Learning policies (path and link KL-UCB indexes, hop-by-hop routing and a
CUCB baseline), an event simulator with regret accounting, and the
asymptotic regret lower bounds of line networks.
"""

from .bounds import LineNetwork, c1_line, c2_line, ratio_experiment
from .divergence import DelayPmf, kl_bernoulli, klg, path_delay_pmf, path_kl_information
from .env import (
    BanditFeedback,
    LinkParams,
    SemiBanditFeedback,
    attempt_transmission,
    make_rng,
    route_packet_source,
    sample_link_delay,
)
from .exceptions import (
    DegenerateDenominator,
    DomainError,
    NoConvergence,
    NoPath,
    PathExplosion,
    RoutingError,
    SlotCapExceeded,
    Stranded,
    UnexploredLink,
)
from .graph import (
    Link,
    NetworkTopology,
    Path,
    covering_paths,
    enumerate_paths,
    grid_topology,
    line_topology,
    min_cost_to_destination,
    shortest_path,
)
from .harness import ExperimentConfig, RegretTrace, aggregate, run_experiment
from .indexes import f1, f2, index_b, index_c, index_cucb, index_omega
from .policies import CUCB, KLHHR, KLSR, GeoCombUCB, Oracle, UniformRandom, make_policy
from .stats import LinkStats, SlotStats

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
