"""Deterministic discrete-event engine.

Virtual time is an integer tick counter that advances only by popping the
event queue; ties dispatch in insertion order, so an entire run is a pure
function of (config, seed).  Messages between nodes take one tick per hop
and are silently dropped when the link has vanished or the destination has
crashed by delivery time.  The module also provides named RNG substreams,
a shortest-path routing oracle and a duplicate-suppressed flood primitive.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field

from .topology import Topology, mutate_topology

DELIVER = "deliver"
TIMER = "timer"
CHURN = "churn"
ROUND = "round"
FLOOD = "flood"


class SeededRng(random.Random):
    """Seeded generator splittable into independent named substreams.

    Substreams are seeded from the root seed plus the stream path, so the
    draw counts of one concern (e.g. churn) never perturb another (e.g.
    protocol choices).
    """

    def __new__(cls, seed: int = 0, stream: str = "root"):
        return super().__new__(cls)

    def __init__(self, seed: int, stream: str = "root"):
        super().__init__(f"{seed}/{stream}")
        self.root_seed = seed
        self.stream = stream

    def substream(self, name: str) -> "SeededRng":
        return SeededRng(self.root_seed, f"{self.stream}/{name}")


@dataclass(frozen=True)
class Event:
    at: int
    seq: int
    kind: str
    data: tuple = ()


@dataclass
class FloodJob:
    flood_id: int
    payload: object
    reached: set[int] = field(default_factory=set)
    messages: int = 0


class Simulator:
    """Single-threaded event loop bound to one topology.

    A protocol object may be attached via :attr:`protocol`; it receives
    ``on_message(node, msg, src)``, ``on_timer(owner, timer_id)`` and
    optionally ``on_drop(msg, src, dst)`` / ``on_round(data)`` callbacks.
    """

    def __init__(self, topo: Topology, rng: SeededRng | None = None, trace=None):
        self.topo = topo
        self.rng = rng if rng is not None else SeededRng(0)
        self.now = 0
        self.protocol = None
        self.trace = trace  # callable(str) or None
        self.messages_sent = 0
        self.dropped = 0
        self.flood_outstanding = 0
        self.churn_params = None
        self.churn_period = None
        self.churn_rng = None
        self.churn_log: list = []
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self._floods: dict[int, FloodJob] = {}
        self._next_flood_id = 0

    # -- scheduling --------------------------------------------------------

    def schedule(self, at: int, kind: str, data: tuple = ()) -> Event:
        if at < self.now:
            raise ValueError(f"cannot schedule {kind} at {at}; clock is at {self.now}")
        ev = Event(at, self._seq, kind, data)
        self._seq += 1
        heapq.heappush(self._heap, (at, ev.seq, ev))
        return ev

    def send(self, msg, src: int, dst: int, latency: int = 1, reliable: bool = False) -> Event:
        """Schedule delivery of ``msg`` to ``dst``; the link is re-checked at delivery."""
        self.messages_sent += 1
        return self.schedule(self.now + latency, DELIVER, (msg, src, dst, reliable))

    def set_timer(self, owner: int, timer_id, delay: int) -> Event:
        return self.schedule(self.now + delay, TIMER, (owner, timer_id))

    def configure_churn(self, params, period: int, rng: SeededRng) -> None:
        """Mutate the topology every ``period`` ticks while the loop runs."""
        if period < 1:
            raise ValueError("churn period must be >= 1 tick")
        self.churn_params = params
        self.churn_period = period
        self.churn_rng = rng
        self.schedule(self.now + period, CHURN)

    # -- dispatch ----------------------------------------------------------

    def pending_events(self) -> list[Event]:
        """Undispatched events, soonest first (inspection hook for tests)."""
        return [ev for _, _, ev in sorted(self._heap)]

    def step(self) -> Event | None:
        if not self._heap:
            return None
        _, _, ev = heapq.heappop(self._heap)
        self.now = ev.at
        if self.trace is not None:
            args = " ".join(_describe(x) for x in ev.data)
            self.trace(f"tick {ev.at} {ev.kind} {args}".rstrip())
        if ev.kind == DELIVER:
            self._dispatch_deliver(ev)
        elif ev.kind == TIMER:
            owner, timer_id = ev.data
            if self.protocol is not None:
                self.protocol.on_timer(owner, timer_id)
        elif ev.kind == CHURN:
            self._dispatch_churn()
        elif ev.kind == ROUND:
            if self.protocol is not None:
                self.protocol.on_round(ev.data)
        elif ev.kind == FLOOD:
            self._dispatch_flood(ev)
        else:
            raise ValueError(f"unknown event kind {ev.kind!r}")
        return ev

    def run(self, stop_when=None, max_events: int | None = None) -> int:
        """Process events until the queue drains or ``stop_when()`` turns true."""
        count = 0
        while self._heap:
            if stop_when is not None and stop_when():
                break
            if max_events is not None and count >= max_events:
                break
            self.step()
            count += 1
        return count

    def _dispatch_deliver(self, ev: Event) -> None:
        msg, src, dst, reliable = ev.data
        alive = self.topo.has_node(dst)
        link_ok = reliable or self.topo.has_edge(src, dst)
        if alive and link_ok:
            if self.protocol is not None:
                self.protocol.on_message(dst, msg, src)
        else:
            self.dropped += 1
            if self.protocol is not None and hasattr(self.protocol, "on_drop"):
                self.protocol.on_drop(msg, src, dst)

    def _dispatch_churn(self) -> None:
        changes = mutate_topology(self.topo, self.churn_rng, self.churn_params)
        if changes:
            self.churn_log.append((self.now, changes))
        self.schedule(self.now + self.churn_period, CHURN)

    # -- flooding ----------------------------------------------------------

    def flood_broadcast(self, origin: int, payload) -> FloodJob:
        """Flood ``payload`` from ``origin``; each node forwards it once.

        Links are checked hop by hop at delivery time, so under churn only
        the nodes reachable when each hop lands are covered.  The returned
        job's ``reached`` set is complete once ``flood_outstanding`` is 0.
        """
        if not self.topo.has_node(origin):
            raise KeyError(f"flood origin {origin} is not alive")
        job = FloodJob(self._next_flood_id, payload)
        self._next_flood_id += 1
        self._floods[job.flood_id] = job
        job.reached.add(origin)
        self._flood_forward(job, origin, None)
        return job

    def _flood_forward(self, job: FloodJob, src: int, came_from: int | None) -> None:
        for nb in self.topo.neighbors(src):
            if nb == came_from:
                continue
            self.messages_sent += 1
            job.messages += 1
            self.flood_outstanding += 1
            self.schedule(self.now + 1, FLOOD, (job.flood_id, src, nb))

    def _dispatch_flood(self, ev: Event) -> None:
        flood_id, src, dst = ev.data
        self.flood_outstanding -= 1
        job = self._floods[flood_id]
        if not self.topo.has_node(dst) or not self.topo.has_edge(src, dst):
            self.dropped += 1
            return
        if dst in job.reached:
            return
        job.reached.add(dst)
        self._flood_forward(job, dst, src)


def _describe(x) -> str:
    """Compact trace form: message objects collapse to their class name."""
    if isinstance(x, (int, str, bool)) or x is None:
        return str(x)
    return type(x).__name__


def route_to(topo: Topology, src: int, dst: int) -> list[int] | None:
    """Shortest path by hop count, or None when disconnected.

    Breadth-first search expanding neighbours in ascending id order, so
    among equally short paths the one through the smallest next hop wins
    and the result is deterministic.
    """
    if not topo.has_node(src) or not topo.has_node(dst):
        raise KeyError(f"route endpoints ({src}, {dst}) must both exist")
    if src == dst:
        return [src]
    parent: dict[int, int | None] = {src: None}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        for u in topo.neighbors(v):
            if u in parent:
                continue
            parent[u] = v
            if u == dst:
                path = [u]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                path.reverse()
                return path
            queue.append(u)
    return None
