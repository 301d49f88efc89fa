"""Page telemetry: page-table poisoning, point access-rate estimates and
burst-duration coalescing, plus the EWMA estimator used by baselines.

Timestamps are integer picoseconds; rates are accesses per second.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .units import PS_PER_S, seconds_to_ps

if TYPE_CHECKING:
    from .memory import MemoryState


class TelemetryError(RuntimeError):
    """Fault bookkeeping out of order (an engine bug, not a user error)."""


@dataclass(frozen=True)
class ClusterState:
    """Running state of the current burst of a page.

    ``size`` is the burst duration in marking epochs; 0 means no measurement yet.
    """

    size: int = 0
    prev_rate: float = 0.0
    prev_mark: int = 0


@dataclass(frozen=True)
class TelemetryConfig:
    marking_interval: float = 1.0
    delta1: float = 0.2
    delta2: float | None = None
    ewma_alpha: float = 0.5
    relative_delta1: bool = True

    def __post_init__(self) -> None:
        if self.marking_interval <= 0:
            raise ValueError("marking_interval must be positive")
        if self.delta2 is not None and self.delta2 < self.marking_interval:
            raise ValueError("delta2 must be at least one marking interval")
        if not 0.0 < self.ewma_alpha <= 1.0:
            raise ValueError("ewma_alpha must lie in (0, 1]")
        if self.delta1 < 0:
            raise ValueError("delta1 must be non-negative")

    @property
    def delta2_seconds(self) -> float:
        return 2.0 * self.marking_interval if self.delta2 is None else self.delta2

    @property
    def interval_ps(self) -> int:
        return seconds_to_ps(self.marking_interval)

    @property
    def delta2_ps(self) -> int:
        return seconds_to_ps(self.delta2_seconds)


@dataclass(frozen=True)
class FaultReport:
    page_id: int
    rate: float
    burst_duration: int
    ewma_rate: float


def point_rate(mark_time: float, access_time: float) -> float:
    """Access rate from one marking/first-access pair (times in seconds)."""
    if access_time <= mark_time:
        raise TelemetryError(f"access at {access_time} does not follow marking at {mark_time}")
    return 1.0 / (access_time - mark_time)


def rate_from_ps(mark_ps: int, access_ps: int) -> float:
    """Same estimate for integer-picosecond timestamps."""
    if access_ps <= mark_ps:
        raise TelemetryError(f"access at {access_ps} ps does not follow marking at {mark_ps} ps")
    return PS_PER_S / (access_ps - mark_ps)


def coalesce_step(cluster: ClusterState, rate: float, mark: int, config: TelemetryConfig) -> ClusterState:
    """Fold one rate measurement into the running burst.

    ``mark`` is the marking time of the measurement in ps.
    """
    if cluster.size > 0:
        tolerance = config.delta1 * cluster.prev_rate if config.relative_delta1 else config.delta1
        if abs(rate - cluster.prev_rate) < tolerance and mark - cluster.prev_mark <= config.delta2_ps:
            return ClusterState(cluster.size + 1, rate, mark)
    return ClusterState(1, rate, mark)


def ewma_update(prev: float | None, rate: float, alpha: float) -> float:
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if prev is None:
        return rate
    return alpha * rate + (1.0 - alpha) * prev


def mark_pages(state: MemoryState, now: int) -> int:
    """Poison every unmarked page; marked-but-untouched pages keep their old mark."""
    count = 0
    for page in state.pages.values():
        if not page.marked:
            page.marked = True
            page.mark_time = now
            count += 1
    return count


def on_hint_fault(state: MemoryState, page_id: int, now: int, config: TelemetryConfig) -> FaultReport:
    """First touch of a poisoned page: measure, coalesce and unmark it."""
    page = state.pages[page_id]
    if not page.marked:
        raise TelemetryError(f"hint fault on unmarked page {page_id}")
    rate = rate_from_ps(page.mark_time, now)
    page.access_time = now
    page.marked = False
    page.burst = coalesce_step(page.burst, rate, page.mark_time, config)
    page.rate_f = rate
    page.ewma_rate = ewma_update(page.ewma_rate, rate, config.ewma_alpha)
    return FaultReport(page_id, rate, page.burst.size, page.ewma_rate)
