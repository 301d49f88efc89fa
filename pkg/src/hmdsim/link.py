"""Shared memory interconnect between the local node and the remote pool."""

from __future__ import annotations

from dataclasses import dataclass, field

from .units import ns_to_ps


@dataclass
class LinkCounters:
    migration_bytes: int = 0
    remote_access_bytes: int = 0


@dataclass
class LinkModel:
    """Bandwidth/latency model of the disaggregation link.

    Latencies are in nanoseconds, capacity in bytes per second. Contention
    from other traffic is a stationary fraction of capacity that is not
    available to us.
    """

    capacity: float = 12.5e9
    background_fraction: float = 0.0
    local_latency: float = 100.0
    remote_base_latency: float = 900.0
    cacheline: int = 64
    counters: LinkCounters = field(default_factory=LinkCounters)

    def __post_init__(self) -> None:
        if self.capacity <= 0:
            raise ValueError(f"link capacity must be positive, got {self.capacity}")
        if self.local_latency <= 0:
            raise ValueError("local latency must be positive")
        if self.remote_base_latency < self.local_latency:
            raise ValueError("remote latency must not be below local latency")
        if self.cacheline < 0:
            raise ValueError("cacheline size must be non-negative")
        self.set_background_fraction(self.background_fraction)

    @property
    def delta_latency(self) -> float:
        """Remote minus local latency, ns."""
        return self.remote_base_latency - self.local_latency

    def set_background_fraction(self, phi: float) -> None:
        if not 0.0 <= phi < 1.0:
            raise ValueError(f"background fraction must lie in [0, 1), got {phi}")
        self.background_fraction = float(phi)

    def effective_bandwidth(self) -> float:
        return self.capacity * (1.0 - self.background_fraction)

    def remote_access_delay(self) -> float:
        """Latency of one remote cache-line access in ns; charges the counter."""
        self.counters.remote_access_bytes += self.cacheline
        return self._remote_delay_ns()

    def page_transfer_delay(self, page_size: int, pages: int = 0) -> float:
        """Serialization delay of one page in ns.

        ``pages`` is the number of page copies to charge to the migration
        counter: 1 for a one-way promotion, 2 for a swap.
        """
        if page_size <= 0:
            raise ValueError(f"page size must be positive, got {page_size}")
        self.counters.migration_bytes += pages * page_size
        return page_size / self.effective_bandwidth() * 1e9

    # Integer-picosecond views used by the simulation engines. Counters are
    # not touched here; engines account traffic themselves.
    def remote_access_ps(self) -> int:
        return ns_to_ps(self._remote_delay_ns())

    def local_access_ps(self) -> int:
        return ns_to_ps(self.local_latency)

    def page_transfer_ps(self, page_size: int) -> int:
        if page_size <= 0:
            raise ValueError(f"page size must be positive, got {page_size}")
        return ns_to_ps(page_size / self.effective_bandwidth() * 1e9)

    def _remote_delay_ns(self) -> float:
        return self.remote_base_latency + self.cacheline / self.effective_bandwidth() * 1e9
