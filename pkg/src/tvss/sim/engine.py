"""Minimal discrete-event engine with millisecond timestamps."""

from __future__ import annotations

import heapq
import itertools
from typing import Any, Callable, List, Tuple


class EventQueue:
    """Events ordered by (time_ms, insertion sequence)."""

    def __init__(self):
        self._heap: List[Tuple[int, int, Callable, tuple]] = []
        self._seq = itertools.count()
        self.now_ms = 0

    def __len__(self):
        return len(self._heap)

    def schedule(self, at_ms: int, fn: Callable[..., Any], *args) -> None:
        at_ms = int(at_ms)
        if at_ms < self.now_ms:
            raise ValueError(f"cannot schedule in the past ({at_ms} < {self.now_ms})")
        heapq.heappush(self._heap, (at_ms, next(self._seq), fn, args))

    def after(self, delay_ms: int, fn: Callable[..., Any], *args) -> None:
        self.schedule(self.now_ms + int(delay_ms), fn, *args)

    def run(self, until_ms: int | None = None) -> int:
        """Process events in order; returns the number handled."""
        n = 0
        while self._heap:
            if until_ms is not None and self._heap[0][0] > until_ms:
                break
            at, _, fn, args = heapq.heappop(self._heap)
            self.now_ms = at
            fn(*args)
            n += 1
        if until_ms is not None and until_ms > self.now_ms:
            self.now_ms = until_ms
        return n
