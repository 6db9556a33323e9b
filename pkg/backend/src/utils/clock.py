"""
Schedulers that drive every BPA instance, CLA and discovery activity.

All state mutation in ScopeStack happens inside callbacks run by a scheduler, so
one scheduler is one logical event loop. ``VirtualScheduler`` advances a
deterministic virtual clock; ``AsyncioScheduler`` maps the same interface onto a
running asyncio loop and the wall clock.
"""

import asyncio
import heapq
import itertools
import time
from abc import ABC, abstractmethod
from typing import Any, Callable, Optional

from .logger import app_logger

# 2000-01-01T00:00:00Z expressed as a Unix timestamp
DTN_EPOCH_UNIX = 946_684_800

# 2022-09-22T10:00:00Z, the default origin of virtual runs
DEFAULT_VIRTUAL_START_MS = 717_156_000_000


def unix_to_dtn_ms(unix_seconds: float) -> int:
    """Convert a Unix timestamp to milliseconds since the DTN epoch."""
    return int((unix_seconds - DTN_EPOCH_UNIX) * 1000)


class TimerHandle:
    """Cancellable reference to a scheduled callback."""

    __slots__ = ("when", "_callback", "_args", "_cancelled", "_inner")

    def __init__(self, when: float, callback: Callable[..., Any], args: tuple):
        self.when = when
        self._callback = callback
        self._args = args
        self._cancelled = False
        self._inner: Optional[asyncio.Handle] = None

    def cancel(self) -> None:
        self._cancelled = True
        if self._inner is not None:
            self._inner.cancel()

    @property
    def cancelled(self) -> bool:
        return self._cancelled

    def _run(self) -> None:
        if self._cancelled:
            return
        try:
            self._callback(*self._args)
        except Exception:
            app_logger.exception(
                f"Unhandled error in scheduled callback {self._callback!r}"
            )


class Scheduler(ABC):
    """Time source and callback queue of one logical event loop."""

    @abstractmethod
    def now(self) -> float:
        """Seconds elapsed since the scheduler started."""

    @abstractmethod
    def dtn_time_ms(self) -> int:
        """Current DTN time in milliseconds."""

    @abstractmethod
    def call_at(self, when: float, callback: Callable[..., Any], *args: Any) -> TimerHandle:
        """Run ``callback(*args)`` at scheduler time ``when``."""

    def call_later(
        self, delay: float, callback: Callable[..., Any], *args: Any
    ) -> TimerHandle:
        return self.call_at(self.now() + max(0.0, delay), callback, *args)

    def call_soon(self, callback: Callable[..., Any], *args: Any) -> TimerHandle:
        return self.call_at(self.now(), callback, *args)


class VirtualScheduler(Scheduler):
    """
    Discrete-event scheduler over virtual time.

    Callbacks run in (time, insertion order); two runs that schedule the same
    callbacks produce the same execution order.
    """

    def __init__(self, start_dtn_ms: int = DEFAULT_VIRTUAL_START_MS):
        self._now = 0.0
        self._start_dtn_ms = start_dtn_ms
        self._queue: list[tuple[float, int, TimerHandle]] = []
        self._sequence = itertools.count()

    def now(self) -> float:
        return self._now

    def dtn_time_ms(self) -> int:
        return self._start_dtn_ms + int(round(self._now * 1000))

    def call_at(self, when: float, callback: Callable[..., Any], *args: Any) -> TimerHandle:
        handle = TimerHandle(max(when, self._now), callback, args)
        heapq.heappush(self._queue, (handle.when, next(self._sequence), handle))
        return handle

    @property
    def pending(self) -> int:
        return sum(1 for _, _, handle in self._queue if not handle.cancelled)

    def step(self) -> bool:
        """Run the next callback; returns False when the queue is empty."""
        while self._queue:
            when, _, handle = heapq.heappop(self._queue)
            if handle.cancelled:
                continue
            self._now = when
            handle._run()
            return True
        return False

    def run_until(self, deadline: float) -> None:
        """Run every callback due at or before ``deadline``, then park the clock there."""
        while self._queue and self._queue[0][0] <= deadline:
            self.step()
        self._now = max(self._now, deadline)

    def advance(self, seconds: float) -> None:
        self.run_until(self._now + seconds)

    def run_until_idle(self, limit: float = float("inf")) -> None:
        """Run until no callbacks are left or the clock would pass ``limit``."""
        while self._queue and self._queue[0][0] <= limit:
            self.step()


class AsyncioScheduler(Scheduler):
    """Scheduler backed by a running asyncio event loop and the wall clock."""

    def __init__(self, loop: Optional[asyncio.AbstractEventLoop] = None):
        self._loop = loop or asyncio.get_event_loop()
        self._origin = self._loop.time()

    @property
    def loop(self) -> asyncio.AbstractEventLoop:
        return self._loop

    def now(self) -> float:
        return self._loop.time() - self._origin

    def dtn_time_ms(self) -> int:
        return unix_to_dtn_ms(time.time())

    def call_at(self, when: float, callback: Callable[..., Any], *args: Any) -> TimerHandle:
        handle = TimerHandle(when, callback, args)
        handle._inner = self._loop.call_at(self._origin + when, handle._run)
        return handle

    async def run_for(self, seconds: float) -> None:
        """Let scheduled activities run for ``seconds`` of wall-clock time."""
        await asyncio.sleep(seconds)
