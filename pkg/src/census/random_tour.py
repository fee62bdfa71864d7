"""Token-passing size estimation over the event engine.

Two variants share one engine.  The plain counter tour accumulates 1/d at
every visited node and multiplies by the originator's degree on return.
The master/slave tour instead carries distinct-node counters for masters
and PMPs plus their degree sums, marks visited nodes, acknowledges every
forward, re-selects on acknowledgement timeout and, when a holder runs out
of untried unvisited neighbours, sends the token home along shortest-path
routes.  Finished estimates are disseminated with a flood.

Counter updates are first-visit-only: the completion formula treats the
counters as distinct-node counts, and re-incrementing on a revisit would
bias both upward.  Normal forwarding picks uniformly among *all* current
neighbours (a tour must be able to reach its originator again); the
visited filter applies only to timeout recovery.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

from .sim import Simulator, route_to
from .topology import Role, Topology, classify_role, size_from_role_stats

VARIANT_BASELINE = "baseline"
VARIANT_ADAPTED = "adapted"

NATURAL_RETURN = "natural_return"
ROUTED_RETURN = "routed_return"
FAILED = "failed"

_ROLE_CODE = {Role.MASTER: "m", Role.PMP: "p", Role.PURE_SLAVE: "s"}


@dataclass(frozen=True)
class BaselineToken:
    originator: int
    origin_degree: int
    x: float  # running sum of 1/degree over visits


@dataclass(frozen=True)
class AdaptedToken:
    originator: int
    tour_id: int
    n_m: int
    d_m_sum: int
    n_p: int
    d_p_sum: int
    visited: frozenset[int]
    hops: int = 0


@dataclass
class TourOutcome:
    estimate: float | None
    hops: int
    messages_sent: int
    completed_via: str  # natural_return | routed_return | failed
    stats_gathered: tuple | None = None  # (n_m, avg_dm, n_p, avg_dp)
    forced: bool = False


@dataclass(frozen=True)
class TourParams:
    ack_timeout_ticks: int = 4
    max_hops: int | None = None  # None: 50 * node count at start
    disseminate: bool = True

    def __post_init__(self):
        # ack must be able to cover token hop + ack hop + processing tick
        if self.ack_timeout_ticks < 3:
            raise ValueError("ack_timeout_ticks must be >= 3")


# -- pure token operations ---------------------------------------------------


def init_baseline(topo: Topology, originator: int) -> BaselineToken:
    d = topo.degree(originator)
    if d == 0:
        raise ValueError(f"originator {originator} is isolated; no tour possible")
    return BaselineToken(originator=originator, origin_degree=d, x=1.0 / d)


def baseline_step(token: BaselineToken, holder_degree: int) -> BaselineToken:
    return replace(token, x=token.x + 1.0 / holder_degree)


def baseline_finalize(token: BaselineToken, hops: int = 0, messages_sent: int = 0,
                      completed_via: str = NATURAL_RETURN, forced: bool = False) -> TourOutcome:
    return TourOutcome(
        estimate=token.origin_degree * token.x,
        hops=hops,
        messages_sent=messages_sent,
        completed_via=completed_via,
        stats_gathered=None,
        forced=forced,
    )


def init_adapted(topo: Topology, originator: int, tour_id: int = 0) -> AdaptedToken:
    if classify_role(topo, originator) is not Role.MASTER:
        raise ValueError(f"originator {originator} is not a master")
    return AdaptedToken(
        originator=originator,
        tour_id=tour_id,
        n_m=1,
        d_m_sum=topo.degree(originator),
        n_p=0,
        d_p_sum=0,
        visited=frozenset([originator]),
    )


def adapted_update(token: AdaptedToken, holder: int, role: Role, degree: int) -> AdaptedToken:
    """Fold one receipt into the token; counters move on first visit only."""
    if holder in token.visited:
        return replace(token, hops=token.hops + 1)
    n_m, d_m, n_p, d_p = token.n_m, token.d_m_sum, token.n_p, token.d_p_sum
    if role is Role.MASTER:
        n_m += 1
        d_m += degree
    elif role is Role.PMP:
        n_p += 1
        d_p += degree
    return AdaptedToken(
        originator=token.originator,
        tour_id=token.tour_id,
        n_m=n_m,
        d_m_sum=d_m,
        n_p=n_p,
        d_p_sum=d_p,
        visited=token.visited | {holder},
        hops=token.hops + 1,
    )


def adapted_finalize(token: AdaptedToken, hops: int = 0, messages_sent: int = 0,
                     completed_via: str = NATURAL_RETURN, forced: bool = False) -> TourOutcome:
    """Average the gathered degrees and apply the closed-form size identity.

    The division is done in exact rational arithmetic, so a token whose
    visited set covers every master and PMP yields the exact node count.
    """
    avg_dm = Fraction(token.d_m_sum, token.n_m)
    avg_dp = Fraction(token.d_p_sum, token.n_p) if token.n_p else Fraction(0)
    estimate = size_from_role_stats(token.n_m, avg_dm, token.n_p, avg_dp)
    return TourOutcome(
        estimate=float(estimate),
        hops=hops,
        messages_sent=messages_sent,
        completed_via=completed_via,
        stats_gathered=(token.n_m, float(avg_dm), token.n_p, float(avg_dp)),
        forced=forced,
    )


def select_next_hop(topo: Topology, holder: int, token, rng,
                    mode: str = "normal", tried=frozenset()) -> int | None:
    """Pick the forwarding target, or None when the candidate pool is empty.

    normal: uniform over all current neighbours.
    recovery: uniform over neighbours not yet tried for this hop and not in
    the token's visited set.
    """
    neighbours = topo.neighbors(holder)
    if mode == "normal":
        candidates = neighbours
    elif mode == "recovery":
        visited = getattr(token, "visited", frozenset())
        candidates = [v for v in neighbours if v not in tried and v not in visited]
    else:
        raise ValueError(f"unknown selection mode {mode!r}")
    if not candidates:
        return None
    return rng.choice(candidates)


# -- engine ------------------------------------------------------------------


@dataclass(frozen=True)
class TokenMsg:
    token: object
    hop: int


@dataclass(frozen=True)
class AckMsg:
    hop: int


@dataclass(frozen=True)
class ReturnMsg:
    token: object
    forced: bool = False


@dataclass
class _Pending:
    token: object
    tried: set
    timer_id: int
    state: str = "inflight"  # inflight | delivered | lost


class TourEngine:
    """State machine for one tour, driven by a Simulator's callbacks.

    A holder that forwards the token keeps a pending record until the next
    node's acknowledgement arrives.  The acknowledgement travels the same
    lossy links as everything else; when the timer fires, the engine
    consults whether its forward was actually consumed (the stand-in for
    the sequence numbering a real stack would use) so a lost ack never
    spawns a second live token.
    """

    def __init__(self, sim: Simulator, variant: str, originator: int,
                 params: TourParams = TourParams(), rng=None, tour_id: int = 0):
        if variant not in (VARIANT_BASELINE, VARIANT_ADAPTED):
            raise ValueError(f"unknown tour variant {variant!r}")
        self.sim = sim
        self.variant = variant
        self.originator = originator
        self.params = params
        self.rng = rng if rng is not None else sim.rng.substream("tour")
        self.tour_id = tour_id
        self.max_hops = params.max_hops or 50 * sim.topo.n_nodes
        self.hops = 0
        self.route_attempts = 0
        self.max_route_attempts = 10 * sim.topo.n_nodes + 10
        self.outcome: TourOutcome | None = None
        self.flood_job = None
        self.pending: dict[int, _Pending] = {}
        self._timer_seq = 0
        self._messages_base = sim.messages_sent
        if variant == VARIANT_ADAPTED:
            self.token = init_adapted(sim.topo, originator, tour_id)
        else:
            self.token = init_baseline(sim.topo, originator)
        sim.protocol = self

    # The run is over once an outcome exists and the dissemination flood
    # (when any) has drained.
    @property
    def done(self) -> bool:
        return self.outcome is not None and self.sim.flood_outstanding == 0

    def start(self) -> None:
        nxt = select_next_hop(self.sim.topo, self.originator, self.token, self.rng)
        if nxt is None:
            raise ValueError(f"originator {self.originator} has no neighbours")
        self._forward(self.originator, nxt, self.token)

    def run(self) -> TourOutcome:
        """Drive the simulator until the tour (and its dissemination) completes."""
        self.start()
        self.sim.run(stop_when=lambda: self.done)
        if self.outcome is None:  # queue drained without a verdict: token vanished
            self._fail()
        self.outcome.messages_sent = self.sim.messages_sent - self._messages_base
        return self.outcome

    # -- sim callbacks -----------------------------------------------------

    def on_message(self, node: int, msg, src: int) -> None:
        if self.outcome is not None:
            return
        if isinstance(msg, TokenMsg):
            self._on_token(node, src, msg)
        elif isinstance(msg, AckMsg):
            self.pending.pop(node, None)
        elif isinstance(msg, ReturnMsg):
            self._on_return(node, msg)

    def on_drop(self, msg, src: int, dst: int) -> None:
        if self.outcome is not None:
            return
        if isinstance(msg, TokenMsg):
            if self.variant == VARIANT_BASELINE:
                # the original protocol has no recovery; a lost token ends the tour
                self._fail()
            else:
                pend = self.pending.get(src)
                if pend is not None and pend.timer_id == msg.hop:
                    pend.state = "lost"
        elif isinstance(msg, ReturnMsg):
            # idealized routing: re-route at the broken hop
            self._route_home(src, msg.token, forced=msg.forced)

    def on_timer(self, owner: int, timer_id) -> None:
        if self.outcome is not None:
            return
        pend = self.pending.get(owner)
        if pend is None or pend.timer_id != timer_id:
            return
        if pend.state == "delivered":
            # forward was consumed; only the ack went missing
            self.pending.pop(owner, None)
            return
        if not self.sim.topo.has_node(owner):
            self._fail()  # holder crashed while the token was already lost
            return
        self.pending.pop(owner, None)
        cand = select_next_hop(self.sim.topo, owner, pend.token, self.rng,
                               mode="recovery", tried=pend.tried)
        if cand is None:
            self._route_home(owner, pend.token)
        else:
            self._forward(owner, cand, pend.token, tried=pend.tried)

    def on_round(self, data) -> None:  # tours schedule no rounds
        pass

    # -- token flow --------------------------------------------------------

    def _on_token(self, node: int, src: int, msg: TokenMsg) -> None:
        pend = self.pending.get(src)
        if pend is not None and pend.timer_id == msg.hop:
            pend.state = "delivered"
        self.hops += 1
        if self.variant == VARIANT_ADAPTED:
            self.sim.send(AckMsg(msg.hop), node, src)
        if node == self.originator:
            self._finalize(msg.token, NATURAL_RETURN)
            return
        if self.variant == VARIANT_ADAPTED:
            role = classify_role(self.sim.topo, node)
            token = adapted_update(msg.token, node, role, self.sim.topo.degree(node))
            self._trace_hop(node, role, token)
        else:
            token = baseline_step(msg.token, self.sim.topo.degree(node))
            if self.sim.trace is not None:
                role = classify_role(self.sim.topo, node)
                self.sim.trace(
                    f"tour {self.tour_id} hop {self.hops} at {node} "
                    f"role {_ROLE_CODE[role]} counter {token.x!r}"
                )
        if self.hops >= self.max_hops:
            self._route_home(node, token, forced=True)
            return
        nxt = select_next_hop(self.sim.topo, node, token, self.rng)
        if nxt is None:
            self._route_home(node, token)
            return
        self._forward(node, nxt, token)

    def _forward(self, frm: int, to: int, token, tried: set | None = None) -> None:
        self._timer_seq += 1
        self.sim.send(TokenMsg(token, self._timer_seq), frm, to)
        if self.variant == VARIANT_ADAPTED:
            tried = tried if tried is not None else set()
            tried.add(to)
            self.pending[frm] = _Pending(token=token, tried=tried, timer_id=self._timer_seq)
            self.sim.set_timer(frm, self._timer_seq, self.params.ack_timeout_ticks)

    def _route_home(self, node: int, token, forced: bool = False) -> None:
        if node == self.originator:
            self._finalize(token, ROUTED_RETURN, forced)
            return
        if not self.sim.topo.has_node(node):
            self._fail()
            return
        self.route_attempts += 1
        if self.route_attempts > self.max_route_attempts:
            self._fail()
            return
        path = route_to(self.sim.topo, node, self.originator)
        if path is None:
            self._fail()
            return
        self.sim.send(ReturnMsg(token, forced), node, path[1])

    def _on_return(self, node: int, msg: ReturnMsg) -> None:
        self._route_home(node, msg.token, forced=msg.forced)

    # -- completion --------------------------------------------------------

    def _finalize(self, token, via: str, forced: bool = False) -> None:
        sent = self.sim.messages_sent - self._messages_base
        if self.variant == VARIANT_ADAPTED:
            self.outcome = adapted_finalize(token, self.hops, sent, via, forced)
        else:
            self.outcome = baseline_finalize(token, self.hops, sent, via, forced)
        if self.params.disseminate:
            self.flood_job = self.sim.flood_broadcast(
                self.originator, ("estimate", self.outcome.estimate))

    def _fail(self) -> None:
        sent = self.sim.messages_sent - self._messages_base
        self.outcome = TourOutcome(
            estimate=None,
            hops=self.hops,
            messages_sent=sent,
            completed_via=FAILED,
            stats_gathered=None,
        )

    def _trace_hop(self, node: int, role: Role, token: AdaptedToken) -> None:
        if self.sim.trace is not None:
            self.sim.trace(
                f"tour {self.tour_id} hop {self.hops} at {node} role {_ROLE_CODE[role]} "
                f"token {token.n_m} {token.d_m_sum} {token.n_p} {token.d_p_sum}"
            )


def run_tour(topo: Topology, sim: Simulator, originator: int, variant: str,
             params: TourParams = TourParams(), rng=None, tour_id: int = 0) -> TourOutcome:
    """Run one tour to completion and return its outcome with message accounting."""
    return TourEngine(sim, variant, originator, params, rng, tour_id).run()
