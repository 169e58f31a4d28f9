"""Deterministic discrete-event engine and per-entity random streams."""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable

import numpy as np

from .errors import DomainError, HandlerError, SchedulingError

_MASK64 = (1 << 64) - 1


def stable_id(name: str | int) -> int:
    """64-bit id derived from an entity name, identical across processes and runs."""
    if isinstance(name, int):
        return name & _MASK64
    digest = hashlib.blake2b(name.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """Counter-based random stream keyed by ``(master_seed, stream_id)``.

    Backed by Philox; ``counter`` is the number of 64-bit words consumed, so
    the same triple always reproduces the same next output, and streams with
    different ids share nothing.
    """

    __slots__ = ("master_seed", "stream_id", "counter", "_bitgen")

    def __init__(self, master_seed: int, stream_id: int | str):
        self.master_seed = int(master_seed) & _MASK64
        self.stream_id = stable_id(stream_id)
        self.counter = 0
        key = np.array([self.master_seed, self.stream_id], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)

    def _next_u64(self) -> int:
        self.counter += 1
        return int(self._bitgen.random_raw())

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self._next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def bernoulli(self, p: float) -> bool:
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"bernoulli probability {p} outside [0, 1]")
        return self.uniform() < p

    def exponential(self, rate: float) -> float:
        if not rate > 0:
            raise DomainError(f"exponential rate must be positive, got {rate}")
        return -math.log1p(-self.uniform()) / rate

    def geometric(self, p: float) -> int:
        """Number of Bernoulli(p) trials up to and including the first success."""
        if not 0.0 < p <= 1.0:
            raise DomainError(f"geometric probability {p} outside (0, 1]")
        if p == 1.0:
            self.uniform()
            return 1
        u = self.uniform()
        return max(1, math.ceil(math.log1p(-u) / math.log1p(-p)))

    def integers(self, n: int) -> int:
        """Uniform integer in ``range(n)``."""
        if n <= 0:
            raise DomainError("integers() needs n >= 1")
        return min(int(self.uniform() * n), n - 1)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.master_seed}, id={self.stream_id:#x}, counter={self.counter})"


@dataclass(order=True)
class Event:
    fire_at: int
    seq: int
    target: Hashable = field(compare=False)
    kind: str = field(compare=False)
    data: Any = field(default=None, compare=False)


class Engine:
    """Single-threaded event loop with an integer-nanosecond clock.

    Events fire in ``(fire_at, seq)`` order; ``seq`` is assigned on
    insertion, so same-time events fire first-scheduled first.
    """

    def __init__(self, record_trace: bool = True):
        self.now = 0
        self._queue: list[Event] = []
        self._seq = 0
        self._handlers: dict[Hashable, Callable[[Event], None]] = {}
        self._default: Callable[[Event], None] | None = None
        self.record_trace = record_trace
        self._trace_hash = hashlib.sha256()
        self.trace: list[tuple[int, str, str]] = []
        self.processed = 0
        self.after_event: Callable[[Event], None] | None = None

    def register(self, target: Hashable, handler: Callable[[Event], None]) -> None:
        self._handlers[target] = handler

    def set_default_handler(self, handler: Callable[[Event], None]) -> None:
        self._default = handler

    def schedule(self, fire_at: int, target: Hashable, kind: str, data: Any = None) -> Event:
        fire_at = int(fire_at)
        if fire_at < self.now:
            raise SchedulingError(f"cannot schedule {kind!r} for {target!r} at {fire_at} < now {self.now}")
        ev = Event(fire_at, self._seq, target, kind, data)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_in(self, delay: int, target: Hashable, kind: str, data: Any = None) -> Event:
        return self.schedule(self.now + int(delay), target, kind, data)

    def __len__(self) -> int:
        return len(self._queue)

    def pop(self) -> Event:
        return heapq.heappop(self._queue)

    def run_until(self, t_end: int) -> int:
        """Process every event with ``fire_at <= t_end``; return how many ran."""
        count = 0
        q = self._queue
        while q and q[0].fire_at <= t_end:
            ev = heapq.heappop(q)
            self.now = ev.fire_at
            handler = self._handlers.get(ev.target, self._default)
            if handler is None:
                raise HandlerError(ev, LookupError(f"no handler for target {ev.target!r}"))
            try:
                handler(ev)
            except HandlerError:
                raise
            except Exception as exc:
                raise HandlerError(ev, exc) from exc
            if self.record_trace:
                line = f"{ev.fire_at}|{ev.target}|{ev.kind}"
                self._trace_hash.update(line.encode() + b"\n")
                self.trace.append((ev.fire_at, str(ev.target), ev.kind))
            if self.after_event is not None:
                self.after_event(ev)
            count += 1
        self.now = max(self.now, int(t_end))
        self.processed += count
        return count

    def trace_digest(self) -> str:
        return self._trace_hash.hexdigest()
