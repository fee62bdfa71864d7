"""Gossip aggregation size estimators.

One node starts with mass 1 and every other node with 0; local averaging
spreads the mass until each node's value approaches 1/N, so its reciprocal
recovers the node count.  The pairwise variant averages one (node,
neighbour) pair per round; the cluster variant lets a master collect the
values of its whole piconet, average them and broadcast the result back,
which moves much more mass per round.  The global sum stays 1 after every
round as long as nothing crashes, which is why convergence survives
mobility.

Convergence is judged by an oracle that compares each node's reciprocal
against the current true node count; nodes themselves never see the truth.
At epsilon 0 the check is integer-rounded equality, since exact reciprocal
equality is unattainable in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .sim import ROUND, Simulator
from .topology import Role, Topology, classify_role


@dataclass
class GossipState:
    avg: float
    is_initiator: bool = False


@dataclass(frozen=True)
class PrecisionSpec:
    epsilon: float = 0.0
    scope: str = "all_nodes"  # all_nodes | initiator_only

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.scope not in ("all_nodes", "initiator_only"):
            raise ValueError(f"unknown precision scope {self.scope!r}")


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    master: int
    cluster_size: int
    post_avg: float
    max_rel_error: float | None = None
    sum_avg: float | None = None


def init_gossip(topo: Topology, initiator: int) -> dict[int, GossipState]:
    if not topo.has_node(initiator):
        raise KeyError(f"unknown initiator {initiator}")
    states = {v: GossipState(avg=0.0) for v in topo.node_ids()}
    states[initiator] = GossipState(avg=1.0, is_initiator=True)
    return states


def pairwise_exchange(a, b):
    """Both sides take the midpoint; their sum is preserved exactly."""
    mid = (a + b) / 2
    return mid, mid


def baseline_round(topo: Topology, states: dict[int, GossipState], rng,
                   active: int | None = None) -> dict[int, GossipState]:
    """One pairwise exchange: ``active`` (or a uniform pick) with a uniform neighbour.

    Updates ``states`` in place and returns it.
    """
    if active is None:
        active = rng.choice(topo.node_ids())
    nbrs = topo.neighbors(active)
    if not nbrs:
        return states
    peer = rng.choice(nbrs)
    states[active].avg, states[peer].avg = pairwise_exchange(states[active].avg, states[peer].avg)
    return states


def cluster_round(topo: Topology, states: dict[int, GossipState],
                  master: int) -> dict[int, GossipState]:
    """Master collects its piconet's values, averages and broadcasts back.

    The piconet is the master plus all its slaves (PMPs included).  Updates
    ``states`` in place and returns it.
    """
    if classify_role(topo, master) is not Role.MASTER:
        raise ValueError(f"cluster rounds are performed by masters; {master} is not one")
    cluster = [master] + topo.neighbors(master)
    mean = sum(states[v].avg for v in cluster) / len(cluster)
    for v in cluster:
        states[v].avg = mean
    return states


def estimate_of(state: GossipState) -> float | None:
    """Reciprocal estimate, or None while the node is still untouched."""
    return 1.0 / state.avg if state.avg > 0 else None


def node_converged(avg: float, n_true: int, epsilon: float) -> bool:
    if avg <= 0:
        return False
    est = 1.0 / avg
    if epsilon == 0:
        return round(est) == n_true
    return abs(est - n_true) / n_true <= epsilon


def is_converged(topo: Topology, states: dict[int, GossipState], n_true: int,
                 precision: PrecisionSpec, initiator: int) -> bool:
    if precision.scope == "initiator_only":
        st = states.get(initiator)
        return st is not None and node_converged(st.avg, n_true, precision.epsilon)
    return all(
        node_converged(states[v].avg, n_true, precision.epsilon) for v in topo.node_ids()
    )


@dataclass
class GossipResult:
    rounds: int
    converged: bool
    states: dict[int, GossipState]
    messages_sent: int


VARIANT_CLUSTER = "cluster"
VARIANT_PAIRWISE = "pairwise"


class GossipRun:
    """Round scheduler attached to a Simulator.

    Rounds fire one per tick so churn ticks interleave at their configured
    period.  The cluster variant walks a fresh random permutation of the
    masters each sweep; the pairwise variant rotates the active node the
    same way.  After every round the convergence oracle is consulted and
    the run stops at the first satisfied round (or is censored at
    max_rounds).
    """

    def __init__(self, sim: Simulator, variant: str, initiator: int,
                 precision: PrecisionSpec, max_rounds: int = 10 ** 6,
                 rng=None, round_log: list | None = None):
        if variant not in (VARIANT_CLUSTER, VARIANT_PAIRWISE):
            raise ValueError(f"unknown gossip variant {variant!r}")
        self.sim = sim
        self.variant = variant
        self.initiator = initiator
        self.precision = precision
        self.max_rounds = max_rounds
        self.rng = rng if rng is not None else sim.rng.substream("gossip")
        self.round_log = round_log
        self.states = init_gossip(sim.topo, initiator)
        self.rounds = 0
        self.converged = False
        self.stopped = False
        self.messages = 0
        self._queue: list[int] = []
        self._n_true = sim.topo.n_nodes
        self._bad = self._count_bad()
        sim.protocol = self
        if self._bad == 0:  # trivially converged (singleton network)
            self.converged = True
            self.stopped = True
        else:
            sim.schedule(sim.now + 1, ROUND)

    # -- convergence bookkeeping ------------------------------------------

    def _in_scope(self, v: int) -> bool:
        return self.precision.scope == "all_nodes" or v == self.initiator

    def _count_bad(self) -> int:
        eps = self.precision.epsilon
        if self.precision.scope == "initiator_only":
            st = self.states.get(self.initiator)
            ok = st is not None and node_converged(st.avg, self._n_true, eps)
            return 0 if ok else 1
        return sum(
            1 for v in self.sim.topo.node_ids()
            if not node_converged(self.states[v].avg, self._n_true, eps)
        )

    def _refresh(self, touched: list[int], before: dict[int, bool]) -> None:
        n_now = self.sim.topo.n_nodes
        if n_now != self._n_true or any(v not in self.states for v in touched):
            self._n_true = n_now
            self._bad = self._count_bad()
            return
        eps = self.precision.epsilon
        for v in touched:
            if not self._in_scope(v):
                continue
            now_ok = node_converged(self.states[v].avg, self._n_true, eps)
            if now_ok and not before[v]:
                self._bad -= 1
            elif not now_ok and before[v]:
                self._bad += 1

    # -- sim callbacks -----------------------------------------------------

    def on_round(self, data) -> None:
        if self.stopped:
            return
        touched = self._run_one_round()
        if touched is not None:
            self.rounds += 1
            if self.round_log is not None:
                self._log_round(touched)
        if self._bad == 0:
            self.converged = True
            self.stopped = True
            return
        if self.rounds >= self.max_rounds:
            self.stopped = True  # censored
            return
        self.sim.schedule(self.sim.now + 1, ROUND)

    def on_message(self, node, msg, src) -> None:  # gossip rounds are atomic
        pass

    def on_timer(self, owner, timer_id) -> None:
        pass

    def _run_one_round(self) -> list[int] | None:
        topo = self.sim.topo
        # churn may have removed or demoted nodes since the sweep was drawn
        while True:
            if not self._queue:
                base = topo.master_ids() if self.variant == VARIANT_CLUSTER else topo.node_ids()
                if not base:
                    return None
                self.rng.shuffle(base)
                self._queue = base
            v = self._queue.pop()
            if not topo.has_node(v):
                continue
            if self.variant == VARIANT_CLUSTER and not topo.is_master(v):
                continue
            break
        self._sync_states()
        eps_before = {
            u: node_converged(self.states[u].avg, self._n_true, self.precision.epsilon)
            for u in ([v] + topo.neighbors(v))
        }
        if self.variant == VARIANT_CLUSTER:
            cluster = [v] + topo.neighbors(v)
            cluster_round(topo, self.states, v)
            self.messages += 2 * (len(cluster) - 1)  # collect + broadcast
            touched = cluster
            self._last_master, self._last_size = v, len(cluster)
        else:
            nbrs = topo.neighbors(v)
            if nbrs:
                peer = self.rng.choice(nbrs)
                self.states[v].avg, self.states[peer].avg = pairwise_exchange(
                    self.states[v].avg, self.states[peer].avg)
                self.messages += 2  # push + pull
                touched = [v, peer]
            else:
                touched = [v]
            self._last_master, self._last_size = v, len(touched)
        self._refresh(touched, eps_before)
        return touched

    def _sync_states(self) -> None:
        """Drop state for crashed nodes; churn only ever removes nodes."""
        topo = self.sim.topo
        if len(self.states) == topo.n_nodes:
            return
        for v in list(self.states):
            if not topo.has_node(v):
                del self.states[v]
        self._n_true = topo.n_nodes
        self._bad = self._count_bad()

    def _log_round(self, touched: list[int]) -> None:
        total = sum(st.avg for st in self.states.values())
        worst = 0.0
        for v in self.sim.topo.node_ids():
            est = estimate_of(self.states[v])
            err = 1.0 if est is None else abs(est - self._n_true) / self._n_true
            worst = max(worst, err)
        self.round_log.append(RoundRecord(
            round_index=self.rounds,
            master=self._last_master,
            cluster_size=self._last_size,
            post_avg=self.states[self._last_master].avg,
            max_rel_error=worst,
            sum_avg=total,
        ))


def _run_gossip(variant: str, topo: Topology, sim: Simulator, initiator: int,
                precision: PrecisionSpec, churn=None, churn_period: int = 1,
                max_rounds: int = 10 ** 6, rng=None, round_log=None) -> GossipResult:
    if churn is not None:
        sim.configure_churn(churn, churn_period, sim.rng.substream("churn"))
    run = GossipRun(sim, variant, initiator, precision, max_rounds, rng, round_log)
    sim.run(stop_when=lambda: run.stopped)
    return GossipResult(run.rounds, run.converged, run.states, run.messages)


def run_adapted(topo: Topology, sim: Simulator, initiator: int, precision: PrecisionSpec,
                churn=None, churn_period: int = 1, max_rounds: int = 10 ** 6,
                rng=None, round_log=None) -> GossipResult:
    """Cluster-variant run; returns the count of individual master rounds."""
    return _run_gossip(VARIANT_CLUSTER, topo, sim, initiator, precision, churn,
                       churn_period, max_rounds, rng, round_log)


def run_baseline(topo: Topology, sim: Simulator, initiator: int, precision: PrecisionSpec,
                 churn=None, churn_period: int = 1, max_rounds: int = 10 ** 6,
                 rng=None, round_log=None) -> GossipResult:
    """Pairwise-variant run; one exchange counts as one round."""
    return _run_gossip(VARIANT_PAIRWISE, topo, sim, initiator, precision, churn,
                       churn_period, max_rounds, rng, round_log)
