"""Promotion policies.

Rates from telemetry are accesses per second. Every policy compares
expected access counts over the cost-model lookahead window (rate times
``CostParams.lookahead``), so with a one-second window the cutoffs read
directly as accesses per second.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

from .cost import CostParams
from .link import LinkModel
from .memory import Location, MemoryState, PageRecord, demotion_candidates
from .telemetry import FaultReport


class Decision(Enum):
    PROMOTE = "promote"
    STAY = "stay"


@dataclass(frozen=True)
class NoMigration:
    name = "none"


@dataclass(frozen=True)
class StaticThreshold:
    rate_cutoff: float = 1.0
    name = "static"

    def __post_init__(self) -> None:
        if self.rate_cutoff < 0:
            raise ValueError("rate_cutoff must be non-negative")


@dataclass(frozen=True)
class EwmaThreshold:
    alpha: float = 0.5
    rate_cutoff: float = 1.0
    name = "ewma"

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.rate_cutoff < 0:
            raise ValueError("rate_cutoff must be non-negative")


@dataclass(frozen=True)
class NetworkAdaptive:
    # bytes; None means one page, which turns the rule into the plain
    # break-even test against the page-transfer threshold
    threshold: float | None = None
    name = "adaptive"


@dataclass(frozen=True)
class Bandit:
    theta_burst: int = 0
    theta_rate: float = 0.0
    name = "bandit"

    def __post_init__(self) -> None:
        if self.theta_burst < 0 or int(self.theta_burst) != self.theta_burst:
            raise ValueError("theta_burst must be a non-negative integer")
        if self.theta_rate < 0:
            raise ValueError("theta_rate must be non-negative")


@dataclass(frozen=True)
class Oracle:
    """Clairvoyant matching planner; acts only at marking boundaries.

    Swaps are weighed over ``lookahead_epochs`` epochs of future accesses,
    promotions into free frames over ``fill_epochs``.
    """

    lookahead_epochs: int = 1
    fill_epochs: int = 64
    name = "oracle"

    def __post_init__(self) -> None:
        for value in (self.lookahead_epochs, self.fill_epochs):
            if value < 1 or int(value) != value:
                raise ValueError("oracle horizons must be positive integers")


PolicyKind = Union[NoMigration, StaticThreshold, EwmaThreshold, NetworkAdaptive, Bandit, Oracle]


def est_demote_rate(mem: MemoryState) -> float:
    """EWMA rate of the page that would be demoted next (0 if none)."""
    if not mem.lru:
        return 0.0
    victim = mem.pages[demotion_candidates(mem, mem.page_size)[0]]
    return victim.ewma_rate if victim.ewma_rate is not None else 0.0


def wants_promotion(
    policy: PolicyKind,
    fault: FaultReport,
    page: PageRecord,
    link: LinkModel,
    mem: MemoryState,
    cost: CostParams,
) -> bool:
    window = cost.lookahead
    if isinstance(policy, StaticThreshold):
        return fault.rate * window > policy.rate_cutoff
    if isinstance(policy, EwmaThreshold):
        return fault.ewma_rate * window > policy.rate_cutoff
    if isinstance(policy, Bandit):
        return fault.burst_duration >= policy.theta_burst and fault.rate * window >= policy.theta_rate
    if isinstance(policy, NetworkAdaptive):
        # no page leaves the local node when there is free room
        demote_rate = 0.0 if mem.fits_without_demotion() else est_demote_rate(mem)
        threshold = mem.page_size if policy.threshold is None else policy.threshold
        delta_latency = cost.delta_latency * 1e-9
        gain = (fault.rate - demote_rate) * window * link.effective_bandwidth() * delta_latency
        return gain > threshold
    return False


def decide(
    policy: PolicyKind,
    fault: FaultReport,
    page: PageRecord,
    link: LinkModel,
    mem: MemoryState,
    cost: CostParams,
) -> Decision:
    if page.location is not Location.REMOTE:
        return Decision.STAY
    if not wants_promotion(policy, fault, page, link, mem, cost):
        return Decision.STAY
    if mem.fits_without_demotion() or mem.lru:
        return Decision.PROMOTE
    return Decision.STAY
