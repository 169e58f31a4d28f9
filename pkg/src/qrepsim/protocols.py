"""Request serving on a repeater network with ODO, UCP and ACP link generation.

A ``NetworkSimulation`` owns one engine, one topology and one strategy. Each
quantum link keeps a pool of background pairs (UCP/ACP), a FIFO of request
hops waiting for a pair, and the generation processes in flight. Requests
reserve their routed path, take one pair per hop (pool first, on-demand
generation otherwise), swap left to right and deliver the end-to-end pair.

Memory is counted in slots: a generation process in flight holds one slot at
each endpoint, and so does every live pair.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Literal

from .des import Engine, RngStream
from .entmath import decohere_until, distill_bbpssw, swap_fidelity, werner_decohere
from .errors import DomainError, RoutingError
from .netmodel import (
    QuantumChannel,
    Topology,
    WernerPair,
    edge_key,
    herald_delay_ns,
    link_fidelity,
    link_success_prob,
)

StrategyKind = Literal["ODO", "UCP", "ACP"]


@dataclass(frozen=True)
class Request:
    id: int
    src: str
    dst: str
    arrival: int
    pairs_requested: int = 1
    min_fidelity: float | None = None

    def __post_init__(self):
        if self.src == self.dst:
            raise DomainError(f"request {self.id}: src and dst are both {self.src!r}")
        if self.pairs_requested < 1:
            raise DomainError(f"request {self.id}: pairs_requested must be >= 1")
        if self.arrival < 0:
            raise DomainError(f"request {self.id}: negative arrival time")


@dataclass(frozen=True)
class StrategyConfig:
    """Link-generation strategy.

    Attributes:
        kind: ``ODO`` (on demand only), ``UCP`` (uniform background) or ``ACP``
            (background steered by observed demand).
        background_slots_per_node: memory slots per node reserved for
            background pairs; ignored under ODO.
        acp_ewma_alpha: weight of the newest window in the demand score.
            0 freezes the scores at their uniform start.
        acp_window_ns: period of the allocation update.
        distill_threshold: when set, a hop with two or more pooled pairs all
            below this fidelity distills before handing one out.
        name: label used in outputs; defaults to ``kind``.
    """

    kind: StrategyKind = "UCP"
    background_slots_per_node: int = 0
    acp_ewma_alpha: float = 0.3
    acp_window_ns: int = 1_000_000_000
    distill_threshold: float | None = None
    name: str | None = None

    def __post_init__(self):
        if self.kind not in ("ODO", "UCP", "ACP"):
            raise DomainError(f"unknown strategy kind {self.kind!r}")
        if self.background_slots_per_node < 0:
            raise DomainError("background_slots_per_node must be >= 0")
        if not 0.0 <= self.acp_ewma_alpha <= 1.0:
            raise DomainError("acp_ewma_alpha must lie in [0, 1]")
        if self.acp_window_ns <= 0:
            raise DomainError("acp_window_ns must be positive")
        if self.distill_threshold is not None and not 0.25 <= self.distill_threshold <= 1.0:
            raise DomainError("distill_threshold must lie in [0.25, 1]")

    @property
    def label(self) -> str:
        return self.name or self.kind

    @property
    def effective_slots(self) -> int:
        return 0 if self.kind == "ODO" else self.background_slots_per_node


@dataclass(frozen=True)
class NeighborScore:
    neighbor: str
    ewma_demand: float
    allocated_slots: int


@dataclass(frozen=True)
class PhysicsConfig:
    """Run-wide physical and bookkeeping knobs that are not per-channel.

    Attributes:
        source_fidelity: fidelity of a freshly heralded pair before coexistence noise.
        eviction_fidelity: pooled pairs are dropped when they decay below this.
        hold_timeout_ns: a multi-hop request holding some but not all hop
            pairs for this long releases them and starts over.
        audit: check memory conservation after every event.
    """

    source_fidelity: float = 0.95
    eviction_fidelity: float = 0.3
    hold_timeout_ns: int = 50_000_000
    audit: bool = False


def route(topo: Topology, src: str, dst: str) -> list[str]:
    """Minimum-hop path; among equals, the lexicographically smallest id sequence.

    Raises:
        RoutingError: unknown endpoint or no path.
    """
    for n in (src, dst):
        if n not in topo.adjacency:
            raise RoutingError(f"unknown node {n!r}")
    if src == dst:
        return [src]
    dist = {dst: 0}
    todo = deque([dst])
    while todo:
        u = todo.popleft()
        for v in topo.adjacency[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                todo.append(v)
    if src not in dist:
        raise RoutingError(f"no path from {src!r} to {dst!r}")
    path = [src]
    while path[-1] != dst:
        u = path[-1]
        path.append(min(v for v in topo.adjacency[u] if dist.get(v) == dist[u] - 1))
    return path


def allocate_slots(scores: dict[str, float], slots: int) -> dict[str, int]:
    """Largest-remainder split of ``slots`` proportional to ``scores``.

    All-zero scores split uniformly. Remainder ties go to the smaller neighbor id.
    """
    nbrs = sorted(scores)
    if not nbrs:
        return {}
    total = sum(scores[n] for n in nbrs)
    weights = {n: (scores[n] if total > 0 else 1.0) for n in nbrs}
    total = sum(weights.values())
    quotas = {n: slots * weights[n] / total for n in nbrs}
    alloc = {n: int(math.floor(quotas[n])) for n in nbrs}
    left = slots - sum(alloc.values())
    order = sorted(nbrs, key=lambda n: (-(quotas[n] - alloc[n]), n))
    for n in order[:left]:
        alloc[n] += 1
    return alloc


def acp_update(
    scores: dict[str, float], demand: dict[str, int], alpha: float, slots: int
) -> list[NeighborScore]:
    """Fold one window of per-neighbor demand into the EWMA and reallocate.

    Args:
        scores: current EWMA per neighbor; not modified.
        demand: requests seen on each neighbor link during the window.
        alpha: weight of the new window.
        slots: background slots to hand out.

    Returns:
        One ``NeighborScore`` per neighbor, sorted by id.
    """
    new = {n: (1.0 - alpha) * scores[n] + alpha * demand.get(n, 0) for n in scores}
    alloc = allocate_slots(new, slots)
    return [NeighborScore(n, new[n], alloc[n]) for n in sorted(new)]


def replay_fidelity(pair: WernerPair) -> float:
    """Recompute ``pair.fidelity_at_creation`` from its creation log."""
    kind = pair.origin[0]
    if kind == "link":
        return pair.origin[1]
    if kind == "swap":
        _, left, right, t = pair.origin
        f1 = werner_decohere(replay_fidelity(left), t - left.created_at, left.tcoh)
        f2 = werner_decohere(replay_fidelity(right), t - right.created_at, right.tcoh)
        return swap_fidelity(f1, f2)
    if kind == "distill":
        _, a, b, t = pair.origin
        f1 = werner_decohere(replay_fidelity(a), t - a.created_at, a.tcoh)
        f2 = werner_decohere(replay_fidelity(b), t - b.created_at, b.tcoh)
        return distill_bbpssw(f1, f2).out_fidelity
    raise ValueError(f"unknown pair origin {kind!r}")


@dataclass
class ServiceRecord:
    request: Request
    completed_at: int | None = None
    fidelities: list[float] = field(default_factory=list)
    attempts: int = 0

    @property
    def censored(self) -> bool:
        return self.completed_at is None

    @property
    def time_to_serve(self) -> int | None:
        return None if self.completed_at is None else self.completed_at - self.request.arrival


@dataclass
class AuditReport:
    checks: int = 0
    oversubscriptions: int = 0
    leaks: int = 0

    @property
    def clean(self) -> bool:
        return self.oversubscriptions == 0 and self.leaks == 0


@dataclass
class SimulationResult:
    records: list[ServiceRecord]
    trace_digest: str
    events: int
    audit: AuditReport
    delivered_pairs: list[tuple[int, WernerPair, int]]
    link_stats: dict[str, tuple[int, int]]


class _Gen:
    __slots__ = ("link", "kind", "attempts", "fire_at", "cancelled")

    def __init__(self, link, kind, attempts, fire_at):
        self.link = link
        self.kind = kind
        self.attempts = attempts
        self.fire_at = fire_at
        self.cancelled = False


class _Link:
    def __init__(self, ch: QuantumChannel, topo: Topology, phys: PhysicsConfig, seed: int):
        self.ch = ch
        self.a, self.b = ch.key
        self.name = f"{self.a}-{self.b}"
        self.p = link_success_prob(ch)
        self.f0 = link_fidelity(ch, phys.source_fidelity)
        self.herald = herald_delay_ns(topo, ch)
        self.cdelay = topo.cchannel(self.a, self.b).delay_ns
        self.tcoh = min(topo.node(self.a).memory_coherence_time_ns, topo.node(self.b).memory_coherence_time_ns)
        self.gen_rng = RngStream(seed, f"gen:{self.name}")
        self.distill_rng = RngStream(seed, f"distill:{self.name}")
        self.pool: list[WernerPair] = []
        self.waiters: deque = deque()
        self.bg_gens: list[_Gen] = []
        self.od_gens: list[_Gen] = []
        self.distilling: tuple[WernerPair, WernerPair] | None = None
        self.cap = 0
        self.attempts = 0
        self.successes = 0

    def bg_count(self) -> int:
        return sum(1 for p in self.pool if p.slot_kind == "bg") + len(self.bg_gens)

    def od_needed(self) -> int:
        return len(self.waiters) - len(self.pool) - (1 if self.distilling else 0)


class _Active:
    """A request between arrival and completion."""

    def __init__(self, req: Request, path: list[str], links: list[_Link], delay: int):
        self.req = req
        self.path = path
        self.links = links
        self.delay = delay
        self.hops: list[WernerPair | None] = [None] * len(links)
        self.missing = 0
        self.chain: WernerPair | None = None
        self.epoch = 0
        self.record = ServiceRecord(req)


class NetworkSimulation:
    """One strategy, one seed, one request list on one topology.

    Args:
        topo: validated topology.
        strategy: generation strategy.
        requests: pregenerated request list (shared across strategies for pairing).
        seed: master seed for all per-entity random streams.
        phys: physical and bookkeeping knobs.
        record_trace: keep the event trace list (its hash is always kept).
    """

    def __init__(
        self,
        topo: Topology,
        strategy: StrategyConfig,
        requests: list[Request],
        seed: int,
        phys: PhysicsConfig = PhysicsConfig(),
        record_trace: bool = False,
    ):
        self.topo = topo
        self.strategy = strategy
        self.phys = phys
        self.seed = seed
        self.engine = Engine(record_trace=True)
        if not record_trace:
            self.engine.trace = _NullList()
        self.engine.set_default_handler(self._dispatch_event)
        self.links: dict[tuple[str, str], _Link] = {
            ch.key: _Link(ch, topo, phys, seed) for ch in sorted(topo.qchannels, key=lambda c: c.key)
        }
        self.link_by_name = {l.name: l for l in self.links.values()}
        self.used = {n.id: 0 for n in topo.nodes}
        self.capacity = {n.id: n.memory_count for n in topo.nodes}
        self.swap_rng = {n.id: RngStream(seed, f"swap:{n.id}") for n in topo.nodes}
        self.slots = {n.id: min(strategy.effective_slots, n.memory_count - 1) for n in topo.nodes}
        self.scores = {u: {v: 1.0 for v in topo.adjacency[u]} for u in self.used}
        self.demand = {u: {v: 0 for v in topo.adjacency[u]} for u in self.used}
        self.alloc = {u: allocate_slots(self.scores[u], self.slots[u]) for u in self.used}
        self.score_history: list[tuple[int, dict[str, list[NeighborScore]]]] = []
        self.requests = sorted(requests, key=lambda r: (r.arrival, r.id))
        self.records: list[ServiceRecord] = []
        self.active: dict[int, _Active] = {}
        self.delivered: list[tuple[int, WernerPair, int]] = []
        self.audit = AuditReport()
        self._pair_id = 0
        if phys.audit:
            self.engine.after_event = lambda ev: self.check_memory()
        self._handlers = {
            "arrive": self._on_arrive,
            "reserve": self._on_reserve,
            "herald": self._on_herald,
            "evict": self._on_evict,
            "distill": self._on_distill,
            "swap": self._on_swap,
            "deliver": self._on_deliver,
            "timeout": self._on_timeout,
            "acp_tick": self._on_tick,
        }

    # -- driver ---------------------------------------------------------

    def run(self, duration_ns: int) -> SimulationResult:
        for req in self.requests:
            if req.arrival <= duration_ns:
                self.engine.schedule(req.arrival, req.src, "arrive", req)
        if any(self.slots.values()):
            for link in self.links.values():
                self._set_cap(link)
            self.engine.schedule(self.strategy.acp_window_ns, "ctl", "acp_tick")
        self.engine.run_until(duration_ns)
        for act in sorted(self.active.values(), key=lambda a: a.req.id):
            self.records.append(act.record)
        self.records.sort(key=lambda r: r.request.id)
        if self.phys.audit:
            self.check_memory(final=True)
        stats = {l.name: (l.attempts, l.successes) for l in self.links.values()}
        return SimulationResult(self.records, self.engine.trace_digest(), self.engine.processed, self.audit, self.delivered, stats)

    def _dispatch_event(self, ev) -> None:
        self._handlers[ev.kind](ev)

    # -- memory ---------------------------------------------------------

    def _free(self, node: str) -> int:
        return self.capacity[node] - self.used[node]

    def _take(self, a: str, b: str) -> None:
        self.used[a] += 1
        self.used[b] += 1

    def _release(self, a: str, b: str) -> None:
        self.used[a] -= 1
        self.used[b] -= 1
        for node in (a, b):
            self._node_freed(node)

    def _node_freed(self, node: str) -> None:
        nbr_links = [self.links[edge_key(node, v)] for v in self.topo.adjacency[node]]
        for link in nbr_links:
            self._start_od(link)
        for link in nbr_links:
            self._refill(link)

    def check_memory(self, final: bool = False) -> None:
        """Recount slots from live objects; flag oversubscription and drift."""
        self.audit.checks += 1
        count = dict.fromkeys(self.used, 0)

        def hold(a, b):
            count[a] += 1
            count[b] += 1

        for link in self.links.values():
            for _ in link.pool:
                hold(link.a, link.b)
            for _ in link.bg_gens + link.od_gens:
                hold(link.a, link.b)
            if link.distilling:
                hold(link.a, link.b)
                hold(link.a, link.b)
        for act in self.active.values():
            for p in act.hops:
                if p is not None:
                    hold(*p.endpoints)
            if act.chain is not None:
                hold(*act.chain.endpoints)
        for node, n in count.items():
            if n > self.capacity[node] or self.used[node] > self.capacity[node]:
                self.audit.oversubscriptions += 1
            if n != self.used[node]:
                self.audit.leaks += 1

    # -- link generation -------------------------------------------------

    def generate_link(self, link: _Link, kind: str) -> _Gen:
        """Start a heralded generation process on ``link``; holds one slot per end.

        The number of attempts until the first success is geometric in the
        per-attempt success probability; the pair is created at the emission
        of the successful attempt and announced one herald delay later.
        """
        self._take(link.a, link.b)
        n = link.gen_rng.geometric(link.p)
        emit = self.engine.now + (n - 1) * link.ch.attempt_period_ns
        gen = _Gen(link, kind, n, emit)
        self.engine.schedule(emit + link.herald, link.name, "herald", gen)
        (link.bg_gens if kind == "bg" else link.od_gens).append(gen)
        return gen

    def _start_od(self, link: _Link) -> None:
        while len(link.od_gens) < link.od_needed() and self._free(link.a) > 0 and self._free(link.b) > 0:
            self.generate_link(link, "od")

    def _refill(self, link: _Link) -> None:
        while link.bg_count() < link.cap and self._free(link.a) > 0 and self._free(link.b) > 0:
            self.generate_link(link, "bg")

    def _cancel(self, gen: _Gen) -> None:
        gen.cancelled = True
        (gen.link.bg_gens if gen.kind == "bg" else gen.link.od_gens).remove(gen)
        self._release(gen.link.a, gen.link.b)

    def _trim_od(self, link: _Link) -> None:
        excess = len(link.od_gens) - max(0, link.od_needed())
        for _ in range(excess):
            self._cancel(max(link.od_gens, key=lambda g: g.fire_at))

    def _on_herald(self, ev) -> None:
        gen: _Gen = ev.data
        if gen.cancelled:
            return
        link = gen.link
        (link.bg_gens if gen.kind == "bg" else link.od_gens).remove(gen)
        link.attempts += gen.attempts
        link.successes += 1
        pair = self._new_pair(link, link.f0, gen.fire_at, ("link", link.f0), gen.kind)
        self._to_pool(link, pair)
        self._serve_waiters(link)

    def _new_pair(self, link: _Link, f: float, created: int, origin: tuple, kind: str) -> WernerPair:
        self._pair_id += 1
        return WernerPair(self._pair_id, (link.a, link.b), f, created, link.tcoh, kind, origin)

    def _to_pool(self, link: _Link, pair: WernerPair) -> None:
        link.pool.append(pair)
        t = decohere_until(pair.fidelity(self.engine.now), self.phys.eviction_fidelity, pair.tcoh)
        if math.isfinite(t):
            self.engine.schedule(self.engine.now + math.ceil(t), link.name, "evict", pair)

    def _on_evict(self, ev) -> None:
        pair = ev.data
        link = self.links[edge_key(*pair.endpoints)]
        if any(p is pair for p in link.pool):
            link.pool.remove(pair)
            self._release(link.a, link.b)

    # -- hop service -----------------------------------------------------

    def _serve_waiters(self, link: _Link) -> None:
        self.distill_policy(link)
        while link.waiters and link.pool:
            if link.distilling and self._below_threshold(link):
                break
            best = max(link.pool, key=lambda p: (p.fidelity(self.engine.now), -p.id))
            link.pool.remove(best)
            act, hop, _ = link.waiters.popleft()
            self._hop_ready(act, hop, best)
            self.distill_policy(link)
        self._trim_od(link)
        self._start_od(link)
        self._refill(link)

    def _below_threshold(self, link: _Link) -> bool:
        thr = self.strategy.distill_threshold
        now = self.engine.now
        return thr is not None and all(p.fidelity(now) < thr for p in link.pool)

    def distill_policy(self, link: _Link) -> None:
        """Start one distillation round on ``link`` if a waiting hop would benefit.

        Applies when a threshold is configured, a hop is waiting, no round is
        running, at least two pairs are pooled and none reaches the threshold.
        The two lowest-fidelity pairs are consumed; the outcome is known one
        classical delay later.
        """
        if link.distilling or not link.waiters or len(link.pool) < 2 or not self._below_threshold(link):
            return
        now = self.engine.now
        lo = sorted(link.pool, key=lambda p: (p.fidelity(now), p.id))[:2]
        for p in lo:
            link.pool.remove(p)
        link.distilling = (lo[0], lo[1])
        self.engine.schedule(now + link.cdelay, link.name, "distill", now)

    def _on_distill(self, ev) -> None:
        t0 = ev.data
        link = self.link_by_name[ev.target]
        a, b = link.distilling
        link.distilling = None
        f1, f2 = a.fidelity(t0), b.fidelity(t0)
        res = distill_bbpssw(f1, f2)
        self._release(link.a, link.b)  # the sacrificed pair
        if link.distill_rng.bernoulli(res.success_prob):
            kind = "bg" if a.slot_kind == b.slot_kind == "bg" else "od"
            pair = self._new_pair(link, res.out_fidelity, t0, ("distill", a, b, t0), kind)
            self._to_pool(link, pair)
        else:
            self._release(link.a, link.b)
        self._serve_waiters(link)

    # -- requests --------------------------------------------------------

    def _on_arrive(self, ev) -> None:
        req: Request = ev.data
        path = route(self.topo, req.src, req.dst)
        links = [self.links[edge_key(u, v)] for u, v in zip(path, path[1:])]
        delay = sum(l.cdelay for l in links)
        act = _Active(req, path, links, delay)
        self.active[req.id] = act
        for u, v in zip(path, path[1:]):
            self.demand[u][v] += 1
            self.demand[v][u] += 1
        self.engine.schedule(self.engine.now + delay, req.src, "reserve", act)

    def _on_reserve(self, ev) -> None:
        self._acquire_all(ev.data)

    def _acquire_all(self, act: _Active) -> None:
        act.epoch += 1
        act.record.attempts += 1
        act.missing = len(act.links)
        for hop, link in enumerate(act.links):
            link.waiters.append((act, hop, act.epoch))
        for link in act.links:
            self._serve_waiters(link)
        if act.missing and len(act.links) > 1:
            self.engine.schedule(self.engine.now + self.phys.hold_timeout_ns, act.req.src, "timeout", (act, act.epoch))

    def _hop_ready(self, act: _Active, hop: int, pair: WernerPair) -> None:
        act.hops[hop] = pair
        act.missing -= 1
        if act.missing == 0:
            self.swap_chain(act)

    def _on_timeout(self, ev) -> None:
        act, epoch = ev.data
        if act.epoch != epoch or act.missing == 0 or act.req.id not in self.active:
            return
        act.epoch += 1
        for link in act.links:
            link.waiters = deque(w for w in link.waiters if w[0] is not act)
        for hop, pair in enumerate(act.hops):
            if pair is not None:
                act.hops[hop] = None
                self._release(*pair.endpoints)
        for link in act.links:
            self._trim_od(link)
        self.engine.schedule(self.engine.now + act.delay, act.req.src, "reserve", act)

    def swap_chain(self, act: _Active) -> None:
        """Begin sequential swaps from the source side once every hop holds a pair."""
        if len(act.links) == 1:
            act.chain, act.hops[0] = act.hops[0], None
            self._deliver(act)
            return
        act.chain, act.hops[0] = act.hops[0], None
        self.engine.schedule(self.engine.now + self.topo.node(act.path[1]).gate_time_ns, act.path[1], "swap", (act, 1))

    def _on_swap(self, ev) -> None:
        act, i = ev.data
        node = act.path[i]
        now = self.engine.now
        left, right = act.chain, act.hops[i]
        act.hops[i] = None
        act.chain = None
        # both memories at the swapping node are freed whatever the outcome
        self.used[node] -= 2
        if not self.swap_rng[node].bernoulli(self.topo.node(node).swap_success_prob):
            self.used[act.path[0]] -= 1
            self.used[act.path[i + 1]] -= 1
            for hop in range(i + 1, len(act.hops)):
                pair = act.hops[hop]
                if pair is not None:
                    act.hops[hop] = None
                    self.used[pair.endpoints[0]] -= 1
                    self.used[pair.endpoints[1]] -= 1
            for n in act.path:
                self._node_freed(n)
            self.engine.schedule(now + act.delay, act.req.src, "reserve", act)
            return
        src, dst = act.path[0], act.path[i + 1]
        f = swap_fidelity(left.fidelity(now), right.fidelity(now))
        tcoh = min(self.topo.node(src).memory_coherence_time_ns, self.topo.node(dst).memory_coherence_time_ns)
        self._pair_id += 1
        act.chain = WernerPair(self._pair_id, (src, dst), f, now, tcoh, "req", ("swap", left, right, now))
        self._node_freed(node)
        if i + 1 < len(act.path) - 1:
            nxt = act.path[i + 1]
            self.engine.schedule(now + self.topo.node(nxt).gate_time_ns, nxt, "swap", (act, i + 1))
        else:
            self.engine.schedule(now + act.delay, act.req.dst, "deliver", act)

    def _on_deliver(self, ev) -> None:
        self._deliver(ev.data)

    def _deliver(self, act: _Active) -> None:
        now = self.engine.now
        pair = act.chain
        act.chain = None
        f = pair.fidelity(now)
        self._release(*pair.endpoints)
        req = act.req
        if req.min_fidelity is not None and f < req.min_fidelity:
            self._acquire_all(act)
            return
        act.record.fidelities.append(f)
        self.delivered.append((req.id, pair, now))
        if len(act.record.fidelities) < req.pairs_requested:
            self._acquire_all(act)
            return
        act.record.completed_at = now
        del self.active[req.id]
        self.records.append(act.record)

    # -- background allocation ------------------------------------------

    def _set_cap(self, link: _Link) -> None:
        link.cap = min(self.alloc[link.a].get(link.b, 0), self.alloc[link.b].get(link.a, 0))
        while link.bg_count() > link.cap and link.bg_gens:
            self._cancel(max(link.bg_gens, key=lambda g: g.fire_at))
        if link.bg_count() > link.cap:
            now = self.engine.now
            spare = sorted((p for p in link.pool if p.slot_kind == "bg"), key=lambda p: (p.fidelity(now), p.id))
            for pair in spare[: link.bg_count() - link.cap]:
                link.pool.remove(pair)
                self._release(link.a, link.b)
        self._refill(link)

    def _on_tick(self, ev) -> None:
        snapshot = {}
        for u in sorted(self.used):
            if self.strategy.kind == "ACP":
                alpha = self.strategy.acp_ewma_alpha
                row = acp_update(self.scores[u], self.demand[u], alpha, self.slots[u])
                self.scores[u] = {s.neighbor: s.ewma_demand for s in row}
                self.alloc[u] = {s.neighbor: s.allocated_slots for s in row}
                snapshot[u] = row
            self.demand[u] = dict.fromkeys(self.demand[u], 0)
        if snapshot:
            self.score_history.append((self.engine.now, snapshot))
        for link in self.links.values():
            self._set_cap(link)
        self.engine.schedule(self.engine.now + self.strategy.acp_window_ns, "ctl", "acp_tick")


class _NullList(list):
    def append(self, item) -> None:
        pass
