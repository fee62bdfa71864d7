"""Bipartite master/slave network model.

Masters are ``m``-coloured vertices and slaves are ``s``-coloured; every
edge joins one master and one slave.  A slave with exactly one link is a
*pure slave*, a slave bridging two or more masters is a *PMP* node.  This
module owns the mutable graph, role classification, exact degree
statistics, the closed-form size identity those statistics satisfy,
seeded random generation, churn mutation (slave migration, PMP link
changes, node crashes) and a line-oriented text serialization used for
scenario replay.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

M_COLOUR = "m"
S_COLOUR = "s"

_CHURN_RETRIES = 4


class Role(enum.Enum):
    MASTER = "master"
    PMP = "pmp"
    PURE_SLAVE = "pure_slave"


class Topology:
    """Undirected bipartite graph of master and slave nodes.

    Node ids are dense small integers assigned in creation order and are
    never reused after a removal, so a crashed node's id stays retired for
    the rest of a simulation run.  Adjacency is kept as sets, which rules
    out parallel edges by construction.
    """

    def __init__(self, max_pmp_degree: int | None = None):
        self._colour: dict[int, str] = {}
        self._adj: dict[int, set[int]] = {}
        self._next_id = 0
        self._n_edges = 0
        # Degree cap for slaves, enforced by generation and churn. None = no cap.
        self.max_pmp_degree = max_pmp_degree

    # -- construction ------------------------------------------------------

    def add_node(self, colour: str, node_id: int | None = None) -> int:
        if colour not in (M_COLOUR, S_COLOUR):
            raise ValueError(f"colour must be {M_COLOUR!r} or {S_COLOUR!r}, got {colour!r}")
        if node_id is None:
            node_id = self._next_id
        elif node_id in self._colour:
            raise ValueError(f"node id {node_id} already in use")
        self._colour[node_id] = colour
        self._adj[node_id] = set()
        self._next_id = max(self._next_id, node_id + 1)
        return node_id

    def add_master(self, node_id: int | None = None) -> int:
        return self.add_node(M_COLOUR, node_id)

    def add_slave(self, node_id: int | None = None) -> int:
        return self.add_node(S_COLOUR, node_id)

    def add_edge(self, u: int, v: int) -> None:
        if u not in self._colour or v not in self._colour:
            raise KeyError(f"unknown node in edge ({u}, {v})")
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        if self._colour[u] == self._colour[v]:
            raise ValueError(f"edge ({u}, {v}) joins two {self._colour[u]}-coloured nodes")
        if v in self._adj[u]:
            raise ValueError(f"edge ({u}, {v}) already present")
        self._adj[u].add(v)
        self._adj[v].add(u)
        self._n_edges += 1

    def remove_edge(self, u: int, v: int) -> None:
        if u not in self._adj or v not in self._adj[u]:
            raise KeyError(f"edge ({u}, {v}) not present")
        self._adj[u].discard(v)
        self._adj[v].discard(u)
        self._n_edges -= 1

    def remove_node(self, v: int) -> None:
        if v not in self._colour:
            raise KeyError(f"unknown node {v}")
        for u in list(self._adj[v]):
            self.remove_edge(v, u)
        del self._adj[v]
        del self._colour[v]

    # -- queries -----------------------------------------------------------

    def __contains__(self, v: int) -> bool:
        return v in self._colour

    def has_node(self, v: int) -> bool:
        return v in self._colour

    def has_edge(self, u: int, v: int) -> bool:
        return u in self._adj and v in self._adj[u]

    def colour(self, v: int) -> str:
        return self._colour[v]

    def is_master(self, v: int) -> bool:
        return self._colour[v] == M_COLOUR

    def is_slave(self, v: int) -> bool:
        return self._colour[v] == S_COLOUR

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def neighbors(self, v: int) -> list[int]:
        """Neighbours of ``v`` in ascending id order."""
        return sorted(self._adj[v])

    def node_ids(self) -> list[int]:
        return sorted(self._colour)

    def master_ids(self) -> list[int]:
        return sorted(v for v, c in self._colour.items() if c == M_COLOUR)

    def slave_ids(self) -> list[int]:
        return sorted(v for v, c in self._colour.items() if c == S_COLOUR)

    def edge_list(self) -> list[tuple[int, int]]:
        """All edges as (low id, high id) pairs in ascending order."""
        edges = []
        for v, nbrs in self._adj.items():
            for u in nbrs:
                if v < u:
                    edges.append((v, u))
        return sorted(edges)

    @property
    def n_nodes(self) -> int:
        return len(self._colour)

    @property
    def n_masters(self) -> int:
        return sum(1 for c in self._colour.values() if c == M_COLOUR)

    @property
    def n_edges(self) -> int:
        return self._n_edges

    def is_connected(self) -> bool:
        """True when all nodes form a single component (or the graph is empty)."""
        if self.n_nodes <= 1:
            return True
        start = next(iter(self._adj))
        seen = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for u in self._adj[v]:
                if u not in seen:
                    seen.add(u)
                    queue.append(u)
        return len(seen) == self.n_nodes

    def component_of(self, v: int) -> set[int]:
        seen = {v}
        queue = deque([v])
        while queue:
            w = queue.popleft()
            for u in self._adj[w]:
                if u not in seen:
                    seen.add(u)
                    queue.append(u)
        return seen

    def copy(self) -> "Topology":
        dup = Topology(max_pmp_degree=self.max_pmp_degree)
        dup._colour = dict(self._colour)
        dup._adj = {v: set(nbrs) for v, nbrs in self._adj.items()}
        dup._next_id = self._next_id
        dup._n_edges = self._n_edges
        return dup


def classify_role(topo: Topology, node: int) -> Role:
    """Role of ``node``: master by colour, slaves split by degree (1 vs >1)."""
    if not topo.has_node(node):
        raise KeyError(f"unknown node {node}")
    if topo.is_master(node):
        return Role.MASTER
    d = topo.degree(node)
    if d == 0:
        raise ValueError(f"slave {node} has no master link; roles are undefined")
    return Role.PURE_SLAVE if d == 1 else Role.PMP


@dataclass(frozen=True)
class GraphStats:
    """Exact counts and average degrees of a topology.

    Averages are carried as Fractions so the identity checks downstream
    are not confounded by float rounding.
    """

    n_total: int
    n_masters: int
    n_slaves: int
    n_pmp: int
    n_pure: int
    edge_count: int
    avg_deg_masters: Fraction
    avg_deg_slaves: Fraction
    avg_deg_pmp: Fraction


def compute_stats(topo: Topology) -> GraphStats:
    """Direct-enumeration statistics; PMP average degree is 0 when there are no PMPs."""
    if topo.n_nodes == 0:
        raise ValueError("empty topology has no statistics")
    m = p = ps = 0
    dm = ds = dp = 0
    for v in topo.node_ids():
        d = topo.degree(v)
        if topo.is_master(v):
            m += 1
            dm += d
        else:
            if d == 0:
                raise ValueError(f"slave {v} has no master link")
            ds += d
            if d == 1:
                ps += 1
            else:
                p += 1
                dp += d
    s = p + ps
    return GraphStats(
        n_total=m + s,
        n_masters=m,
        n_slaves=s,
        n_pmp=p,
        n_pure=ps,
        edge_count=topo.n_edges,
        avg_deg_masters=Fraction(dm, m) if m else Fraction(0),
        avg_deg_slaves=Fraction(ds, s) if s else Fraction(0),
        avg_deg_pmp=Fraction(dp, p) if p else Fraction(0),
    )


def size_from_role_stats(n_masters, avg_master_degree, n_pmp, avg_pmp_degree):
    """Node count of a master/slave graph from master and PMP statistics.

    Computes ``n_masters * (avg_master_degree + 1) - n_pmp * (avg_pmp_degree - 1)``.
    Exact when given ints/Fractions; standard IEEE rounding applies to floats.
    A negative result is possible for undersampled inputs and is returned as-is.
    """
    return n_masters * (avg_master_degree + 1) - n_pmp * (avg_pmp_degree - 1)


def validate(topo: Topology) -> None:
    """Raise ValueError if a structural invariant is broken."""
    deg_sum = 0
    for v in topo.node_ids():
        for u in topo.neighbors(v):
            if u == v:
                raise ValueError(f"self-loop at {v}")
            if not topo.has_node(u):
                raise ValueError(f"edge ({v}, {u}) dangles")
            if topo.colour(u) == topo.colour(v):
                raise ValueError(f"edge ({v}, {u}) joins same-coloured nodes")
            if not topo.has_edge(u, v):
                raise ValueError(f"adjacency of ({v}, {u}) is not symmetric")
        if topo.is_slave(v) and topo.degree(v) == 0:
            raise ValueError(f"slave {v} has no master")
        deg_sum += topo.degree(v)
    if deg_sum != 2 * topo.n_edges:
        raise ValueError("edge count disagrees with degree sum")


# -- random generation -----------------------------------------------------


@dataclass(frozen=True)
class GenParams:
    n_masters: int
    n_slaves: int
    pmp_fraction: float = 0.0
    max_pmp_degree: int = 2
    require_connected: bool = True

    def __post_init__(self):
        if self.n_masters < 1:
            raise ValueError("n_masters must be >= 1")
        if self.n_slaves < 0:
            raise ValueError("n_slaves must be >= 0")
        if not 0.0 <= self.pmp_fraction <= 1.0:
            raise ValueError("pmp_fraction must lie in [0, 1]")
        if self.max_pmp_degree < 2:
            raise ValueError("max_pmp_degree must be >= 2")


def generate_topology(rng, params: GenParams) -> Topology:
    """Build a random master/slave topology; pure function of (rng state, params).

    Masters are created first, slaves attach to a master by weighted random
    choice, then a sample of slaves is promoted to PMPs by linking them to
    additional distinct masters.  When connectivity is required the first
    promoted slaves bridge the masters into a single component before the
    remaining PMP capacity is spent at random.
    """
    n_pmp = round(params.pmp_fraction * params.n_slaves)
    eff_max = min(params.max_pmp_degree, params.n_masters)
    if n_pmp > 0 and params.n_masters < 2:
        raise ValueError("pmp_fraction > 0 requires at least 2 masters (a PMP links distinct masters)")
    if params.require_connected and params.n_masters > 1:
        if params.n_slaves == 0:
            raise ValueError("connectivity with several masters requires slaves to bridge them")
        needed = -(-(params.n_masters - 1) // (eff_max - 1))
        if n_pmp < needed:
            raise ValueError(
                f"connectivity needs >= {needed} PMP nodes to bridge {params.n_masters} masters; "
                f"pmp budget is {n_pmp}"
            )

    topo = Topology(max_pmp_degree=params.max_pmp_degree)
    masters = [topo.add_master() for _ in range(params.n_masters)]
    slaves = [topo.add_slave() for _ in range(params.n_slaves)]
    if not slaves:
        return topo

    weights = [0.25 + rng.random() for _ in masters]
    homes = rng.choices(masters, weights=weights, k=len(slaves))
    for s, home in zip(slaves, homes):
        topo.add_edge(s, home)

    if n_pmp == 0:
        return topo
    pmps = rng.sample(slaves, n_pmp)

    if params.require_connected and params.n_masters > 1:
        parent = {v: v for v in masters}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        comp_count = len(masters)
        for q in pmps:
            if comp_count == 1:
                break
            home_root = find(topo.neighbors(q)[0])
            while topo.degree(q) < eff_max and comp_count > 1:
                candidates = [v for v in masters if find(v) != home_root]
                target = rng.choice(candidates)
                topo.add_edge(q, target)
                parent[find(target)] = home_root
                comp_count -= 1

    for q in pmps:
        goal = rng.randint(2, eff_max)
        while topo.degree(q) < goal:
            candidates = [v for v in masters if not topo.has_edge(q, v)]
            if not candidates:
                break
            topo.add_edge(q, rng.choice(candidates))
    return topo


# -- churn -----------------------------------------------------------------


@dataclass(frozen=True)
class ChurnParams:
    """Per-node, per-tick mutation probabilities."""

    migration_rate: float = 0.0
    pmp_link_rate: float = 0.0
    crash_rate: float = 0.0
    preserve_connectivity: bool = True


@dataclass(frozen=True)
class ChangeEvent:
    kind: str  # migrate | link_add | link_drop | crash
    node: int
    detail: tuple = ()


def mutate_topology(topo: Topology, rng, churn: ChurnParams) -> list[ChangeEvent]:
    """Apply one churn tick of atomic topology changes; returns the applied list.

    Pure slaves migrate between masters, slaves add or drop master links
    within the degree cap (which can promote a pure slave to a PMP or
    demote a PMP), and nodes crash when crash_rate > 0.  A crashed master
    takes its orphaned (now degree-0) slaves with it.  With
    preserve_connectivity any change that would split the component is
    rolled back and resampled a bounded number of times, then skipped.
    """
    changes: list[ChangeEvent] = []

    for s in [v for v in topo.slave_ids() if topo.degree(v) == 1]:
        if rng.random() >= churn.migration_rate:
            continue
        old = topo.neighbors(s)[0]
        targets = [m for m in topo.master_ids() if m != old]
        if not targets:
            continue
        for _ in range(_CHURN_RETRIES):
            tgt = rng.choice(targets)
            topo.remove_edge(s, old)
            topo.add_edge(s, tgt)
            if not churn.preserve_connectivity or topo.is_connected():
                changes.append(ChangeEvent("migrate", s, (old, tgt)))
                break
            topo.remove_edge(s, tgt)
            topo.add_edge(s, old)

    n_m = topo.n_masters
    cap = min(topo.max_pmp_degree or n_m, n_m)
    for v in topo.slave_ids():
        if rng.random() >= churn.pmp_link_rate:
            continue
        d = topo.degree(v)
        addable = [m for m in topo.master_ids() if not topo.has_edge(v, m)] if d < cap else []
        can_drop = d >= 2
        if addable and (not can_drop or rng.random() < 0.5):
            tgt = rng.choice(addable)
            topo.add_edge(v, tgt)
            changes.append(ChangeEvent("link_add", v, (tgt,)))
        elif can_drop:
            for _ in range(_CHURN_RETRIES):
                tgt = rng.choice(topo.neighbors(v))
                topo.remove_edge(v, tgt)
                if not churn.preserve_connectivity or topo.is_connected():
                    changes.append(ChangeEvent("link_drop", v, (tgt,)))
                    break
                topo.add_edge(v, tgt)

    if churn.crash_rate > 0:
        for v in topo.node_ids():
            if v not in topo:  # removed earlier this tick as an orphan
                continue
            if rng.random() >= churn.crash_rate:
                continue
            colours, edges, orphans = _crash(topo, v)
            if churn.preserve_connectivity and not topo.is_connected():
                for node, colour in colours.items():
                    topo.add_node(colour, node)
                for a, b in edges:
                    topo.add_edge(a, b)
            else:
                changes.append(ChangeEvent("crash", v, (tuple(orphans),)))
    return changes


def _crash(topo: Topology, v: int):
    """Remove ``v`` and any slaves it orphans; returns undo info and orphan list."""
    colours = {v: topo.colour(v)}
    edges = [(v, u) for u in topo.neighbors(v)]
    nbrs = topo.neighbors(v)
    was_master = topo.is_master(v)
    topo.remove_node(v)
    orphans = []
    if was_master:
        for u in nbrs:
            if topo.degree(u) == 0:
                colours[u] = S_COLOUR
                orphans.append(u)
                topo.remove_node(u)
    return colours, edges, orphans


# -- serialization ---------------------------------------------------------


def topology_to_text(topo: Topology) -> str:
    """Line format: ``nodes <n>``, then ``node <id> <m|s>`` rows, then ``edge <a> <b>`` rows."""
    lines = [f"nodes {topo.n_nodes}"]
    for v in topo.node_ids():
        lines.append(f"node {v} {topo.colour(v)}")
    for u, v in topo.edge_list():
        lines.append(f"edge {u} {v}")
    return "\n".join(lines) + "\n"


def topology_from_text(text: str) -> Topology:
    topo = Topology()
    declared = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "nodes" and len(parts) == 2:
                declared = int(parts[1])
            elif parts[0] == "node" and len(parts) == 3:
                topo.add_node(parts[2], int(parts[1]))
            elif parts[0] == "edge" and len(parts) == 3:
                topo.add_edge(int(parts[1]), int(parts[2]))
            else:
                raise ValueError(f"unrecognised record {parts[0]!r}")
        except (ValueError, KeyError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    if declared is not None and declared != topo.n_nodes:
        raise ValueError(f"header declares {declared} nodes, found {topo.n_nodes}")
    return topo
