"""Migration cost model: when is swapping a remote page with a local one worth it."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CostParams:
    """Parameters of the swap benefit inequality.

    ``delta_latency`` and ``bookkeeping_k_time`` are in ns; ``lookahead`` is
    the decision window in simulated seconds over which access rates are
    integrated into access counts.
    """

    page_size: int = 4096
    delta_latency: float = 800.0
    bookkeeping_k_time: float = 1000.0
    lookahead: float = 1.0

    def __post_init__(self) -> None:
        if self.delta_latency <= 0:
            raise ValueError("delta_latency must be positive")
        if self.lookahead <= 0:
            raise ValueError("lookahead must be positive")
        if self.bookkeeping_k_time < 0:
            raise ValueError("bookkeeping_k_time must be non-negative")

    @property
    def k_accesses(self) -> float:
        """Bookkeeping cost expressed in saved-access units."""
        return self.bookkeeping_k_time / self.delta_latency


def transfer_threshold(page_size: float, bandwidth: float, delta_latency: float) -> float:
    """Access-count break-even of moving one page (``delta_latency`` in ns)."""
    if bandwidth <= 0 or delta_latency <= 0:
        raise ValueError("bandwidth and delta_latency must be positive")
    if page_size < 0:
        raise ValueError("page size must be non-negative")
    return page_size / (bandwidth * (delta_latency * 1e-9))


def net_benefit(accesses_p: float, accesses_d: float, params: CostParams, bandwidth: float) -> float:
    """Saved accesses of promoting ``p`` in place of ``d`` minus migration cost."""
    if accesses_p < 0 or accesses_d < 0:
        raise ValueError("access counts must be non-negative")
    threshold = transfer_threshold(params.page_size, bandwidth, params.delta_latency)
    return (accesses_p - accesses_d) - threshold - params.k_accesses


def should_swap(accesses_p: float, accesses_d: float, params: CostParams, bandwidth: float) -> bool:
    # strictly positive: break-even pairs are left alone
    return net_benefit(accesses_p, accesses_d, params, bandwidth) > 0
