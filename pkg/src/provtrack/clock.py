"""Injectable clocks.

Every timestamp in a run comes from the clock carried by its configuration,
so deterministic outputs (goldens, byte-compared rank files) are a matter of
injecting a scripted clock instead of the system one.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Protocol, runtime_checkable


@runtime_checkable
class Clock(Protocol):
    def now_ms(self) -> int:
        """Current time as UTC epoch milliseconds."""
        ...


class SystemClock:
    """Wall clock."""

    def now_ms(self) -> int:
        return int(time.time() * 1000)


@dataclass
class TickingClock:
    """Deterministic clock that advances by a fixed tick on every read.

    A tick of 0 freezes time entirely.
    """

    start_ms: int
    tick_ms: int = 0
    _reads: int = 0

    def now_ms(self) -> int:
        value = self.start_ms + self._reads * self.tick_ms
        self._reads += 1
        return value


@dataclass
class ManualClock:
    """Clock under explicit test control; never advances on its own."""

    current_ms: int = 0

    def now_ms(self) -> int:
        return self.current_ms

    def advance(self, delta_ms: int) -> None:
        self.current_ms += delta_ms
