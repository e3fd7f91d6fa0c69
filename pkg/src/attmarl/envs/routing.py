"""Packet-routing traffic-engineering simulator.

Edge routers (the agents) each hold an aggregated flow demand and split it
across their candidate paths every step. Link utilization is flow/capacity,
additive across everything traversing the link; the shared reward is
1 - MLU (maximum link utilization over the whole network). Fluid model:
utilization may exceed 1, which simply drives the reward negative.

Topology files are plain text with four sections::

    [routers]   whitespace-separated node names
    [links]     one directed link per line: src dst capacity
    [demands]   one demand pair per line: src dst demand_lo demand_hi
    [paths]     one candidate path per line: src dst: node node node ...

'#' starts a comment. Every demand pair needs at least two candidate paths,
and every path hop must name a declared directed link.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..errors import ContractError, ValidationError
from .base import Env, JointAction, JointObservation, Simplex, StepResult

HISTORY_LEN = 10


@dataclass(frozen=True)
class Link:
    src: str
    dst: str
    capacity: float

    @property
    def name(self) -> str:
        return f"{self.src}-{self.dst}"


@dataclass(frozen=True)
class DemandPair:
    src: str
    dst: str
    demand_lo: float
    demand_hi: float


@dataclass(frozen=True)
class Path:
    nodes: tuple[str, ...]
    links: tuple[int, ...]  # indices into Topology.links


@dataclass
class Topology:
    routers: list[str]
    links: list[Link]
    pairs: list[DemandPair]
    paths: list[list[Path]]  # candidate paths, one list per demand pair

    @property
    def capacities(self) -> np.ndarray:
        return np.array([l.capacity for l in self.links])

    @property
    def n_links(self) -> int:
        return len(self.links)

    def undirected_link_count(self) -> int:
        return len({frozenset((l.src, l.dst)) for l in self.links})


def _parse_sections(text: str) -> dict[str, list[str]]:
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, [])
        elif current is None:
            raise ValidationError(f"content before any section header: {line!r}")
        else:
            sections[current].append(line)
    return sections


def load_topology(spec_text: str) -> Topology:
    """Parse and validate a topology file's text."""
    sections = _parse_sections(spec_text)
    for required in ("routers", "links", "demands", "paths"):
        if required not in sections:
            raise ValidationError(f"missing [{required}] section")

    routers: list[str] = []
    for line in sections["routers"]:
        routers.extend(line.split())
    if len(set(routers)) != len(routers):
        raise ValidationError("duplicate router names")
    known = set(routers)

    links: list[Link] = []
    link_index: dict[tuple[str, str], int] = {}
    for line in sections["links"]:
        parts = line.split()
        if len(parts) != 3:
            raise ValidationError(f"link line needs 'src dst capacity': {line!r}")
        src, dst, cap_s = parts
        for node in (src, dst):
            if node not in known:
                raise ValidationError(f"link {src}-{dst} references unknown router {node!r}")
        cap = float(cap_s)
        if cap <= 0:
            raise ValidationError(f"link {src}-{dst} has nonpositive capacity {cap}")
        if (src, dst) in link_index:
            raise ValidationError(f"duplicate link {src}-{dst}")
        link_index[(src, dst)] = len(links)
        links.append(Link(src, dst, cap))

    pairs: list[DemandPair] = []
    pair_index: dict[tuple[str, str], int] = {}
    for line in sections["demands"]:
        parts = line.split()
        if len(parts) != 4:
            raise ValidationError(f"demand line needs 'src dst lo hi': {line!r}")
        src, dst, lo_s, hi_s = parts
        for node in (src, dst):
            if node not in known:
                raise ValidationError(f"demand {src}->{dst} references unknown router {node!r}")
        lo, hi = float(lo_s), float(hi_s)
        if not 0 < lo <= hi:
            raise ValidationError(f"demand {src}->{dst} has invalid range [{lo}, {hi}]")
        pair_index[(src, dst)] = len(pairs)
        pairs.append(DemandPair(src, dst, lo, hi))

    paths: list[list[Path]] = [[] for _ in pairs]
    for line in sections["paths"]:
        if ":" not in line:
            raise ValidationError(f"path line needs 'src dst: node ...': {line!r}")
        head, walk = line.split(":", 1)
        hp = head.split()
        if len(hp) != 2:
            raise ValidationError(f"path header needs 'src dst': {line!r}")
        key = (hp[0], hp[1])
        if key not in pair_index:
            raise ValidationError(f"path for undeclared demand pair {hp[0]}->{hp[1]}")
        nodes = tuple(walk.split())
        if len(nodes) < 2:
            raise ValidationError(f"path {line!r} has fewer than two nodes")
        if nodes[0] != hp[0] or nodes[-1] != hp[1]:
            raise ValidationError(
                f"path {'-'.join(nodes)} does not connect {hp[0]} to {hp[1]}")
        hops = []
        for a, b in zip(nodes[:-1], nodes[1:]):
            if (a, b) not in link_index:
                raise ValidationError(
                    f"path {'-'.join(nodes)} uses missing link {a}-{b}")
            hops.append(link_index[(a, b)])
        paths[pair_index[key]].append(Path(nodes, tuple(hops)))

    for pair, plist in zip(pairs, paths):
        if len(plist) < 2:
            raise ValidationError(
                f"demand pair {pair.src}->{pair.dst} needs >= 2 candidate paths, "
                f"has {len(plist)}")

    return Topology(routers, links, pairs, paths)


def load_topology_file(path) -> Topology:
    with open(path, "r", encoding="utf-8") as fh:
        return load_topology(fh.read())


def builtin_topology(name: str) -> Topology:
    """Load one of the shipped topologies ('small' or 'large')."""
    ref = resources.files("attmarl.envs").joinpath(f"data/{name}.topo")
    return load_topology(ref.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# per-step flow arithmetic


def apply_split(demand: float, ratios: np.ndarray) -> np.ndarray:
    """Split a demand across paths; flows sum back to the demand bitwise.

    Flows are cut at boundaries quantized to integer multiples of ulp(demand)
    (the last boundary pinned to the demand itself), so every flow and every
    partial sum is exactly representable and the total telescopes to the
    demand with no rounding, in any summation order. Each flow differs from
    demand*ratio by at most one ulp of the demand.
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if not Simplex(ratios.size).contains(ratios):
        raise ContractError(f"split ratios {ratios!r} are not on the simplex")
    if demand == 0.0:
        return np.zeros_like(ratios)
    grain = np.spacing(demand)
    total = demand / grain  # the demand's integer mantissa, <= 2**53
    bounds = np.minimum(np.round(np.cumsum(ratios) * total), total)
    bounds[-1] = total
    return np.diff(np.concatenate([[0.0], bounds])) * grain


def compute_utilizations(topology: Topology, per_path_flows) -> np.ndarray:
    """Per-link utilization from all agents' path flows (additive)."""
    link_flow = np.zeros(topology.n_links)
    for agent, flows in enumerate(per_path_flows):
        for path, flow in zip(topology.paths[agent], flows):
            for li in path.links:
                link_flow[li] += flow
    return link_flow / topology.capacities


def reward_from_mlu(utilizations) -> float:
    """Shared reward 1 - max link utilization."""
    u = np.asarray(utilizations, dtype=np.float64)
    return 1.0 - (float(u.max()) if u.size else 0.0)


# ---------------------------------------------------------------------------
# environment


class RoutingEnv(Env):
    """Multi-agent flow-splitting over a fixed topology.

    Per agent the observation is the concatenation of:

    * buffered demand, scaled by the largest link capacity (1 slot);
    * utilization history (oldest to newest, HISTORY_LEN slots) for each
      link on the agent's own candidate paths, sorted by link index;
    * the agent's previous split ratios (one slot per candidate path).

    Demands: a per-episode base level is drawn uniformly from the pair's
    configured range, then scaled each step by uniform noise in
    [1-demand_noise, 1+demand_noise].
    """

    def __init__(self, topology: Topology, horizon: int = 50,
                 bonus_beta: float = 0.0, demand_noise: float = 0.2):
        super().__init__()
        self.topology = topology
        self.horizon = int(horizon)
        self.bonus_beta = float(bonus_beta)
        self.demand_noise = float(demand_noise)
        self.n_agents = len(topology.pairs)
        self.observable_links = [
            sorted({li for p in plist for li in p.links})
            for plist in topology.paths
        ]
        self.action_spaces = [Simplex(len(p)) for p in topology.paths]
        self.obs_dims = [
            1 + HISTORY_LEN * len(obs_links) + len(plist)
            for obs_links, plist in zip(self.observable_links, topology.paths)
        ]
        self._cap_scale = float(topology.capacities.max())
        self._rng = None

    # -- state

    def reset(self, seed: int) -> JointObservation:
        self._rng = np.random.default_rng(seed)
        lo = np.array([p.demand_lo for p in self.topology.pairs])
        hi = np.array([p.demand_hi for p in self.topology.pairs])
        self._base_demand = self._rng.uniform(lo, hi)
        self.demands = self._sample_demands()
        self.history = np.zeros((self.topology.n_links, HISTORY_LEN))
        self.last_actions = [np.full(len(p), 1.0 / len(p)) for p in self.topology.paths]
        self.step_count = 0
        self._begin_episode()
        return self._observe()

    def _sample_demands(self) -> np.ndarray:
        noise = self._rng.uniform(1.0 - self.demand_noise, 1.0 + self.demand_noise,
                                  self.n_agents)
        return self._base_demand * noise

    def step(self, action: JointAction) -> StepResult:
        self._guard_step(action)
        flows = [apply_split(self.demands[i], np.asarray(a, dtype=np.float64))
                 for i, a in enumerate(action.per_agent)]
        utils = compute_utilizations(self.topology, flows)
        mlu = float(utils.max())
        rewards = np.full(self.n_agents, 1.0 - mlu)
        if self.bonus_beta != 0.0:
            for i, links in enumerate(self.observable_links):
                rewards[i] += self.bonus_beta * (1.0 - float(utils[links].max()))
        self.history[:, :-1] = self.history[:, 1:]
        self.history[:, -1] = utils
        self.last_actions = [np.asarray(a, dtype=np.float64).copy()
                             for a in action.per_agent]
        self.demands = self._sample_demands()
        self.step_count += 1
        done = self.step_count >= self.horizon
        self._finish_step(done)
        return StepResult(self._observe(), rewards, done,
                          info={"mlu": mlu, "utilizations": utils})

    def _observe(self) -> JointObservation:
        per_agent = []
        for i in range(self.n_agents):
            parts = [np.array([self.demands[i] / self._cap_scale])]
            for li in self.observable_links[i]:
                parts.append(self.history[li])
            parts.append(self.last_actions[i])
            per_agent.append(np.concatenate(parts))
        return JointObservation(per_agent)

    # -- baseline hooks

    def path_costs(self) -> list[np.ndarray]:
        """Per agent, current cost of each candidate path: the sum of the
        latest utilization snapshot over the path's links."""
        latest = self.history[:, -1]
        return [np.array([latest[list(p.links)].sum() for p in plist])
                for plist in self.topology.paths]
