"""Time sources. All modules read time through one of these."""

from __future__ import annotations

import threading
import time


class LogicalClock:
    """Monotone integer tick counter, advanced explicitly by the driver."""

    def __init__(self, start: int = 0):
        self._now = int(start)
        self._lock = threading.Lock()

    @property
    def now(self) -> int:
        return self._now

    def advance_to(self, tick: int) -> int:
        with self._lock:
            if tick < self._now:
                raise ValueError(f"clock cannot move backwards ({tick} < {self._now})")
            self._now = int(tick)
            return self._now

    def tick(self, n: int = 1) -> int:
        with self._lock:
            if n < 0:
                raise ValueError("tick count must be non-negative")
            self._now += int(n)
            return self._now


class WallClock:
    """Wall-clock adapter for live mode: one tick per second (unix time)."""

    @property
    def now(self) -> int:
        return int(time.time())
