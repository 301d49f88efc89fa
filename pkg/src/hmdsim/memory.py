"""Two-tier memory state: local node and remote pool, with watermarks and
LRU-plus-frequency demotion candidacy."""

from __future__ import annotations

import heapq
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum, IntEnum

from .telemetry import ClusterState
from .units import PS_PER_S

DEFAULT_SLACK = 10 * 1024 * 1024


class Location(IntEnum):
    LOCAL = 0
    REMOTE = 1


class Placement(str, Enum):
    ALL_REMOTE = "all_remote"
    FILL_LOCAL = "fill_local"


class WatermarkViolation(RuntimeError):
    """Promotion would push local usage past the hard low watermark."""


@dataclass(slots=True)
class PageRecord:
    page_id: int
    location: Location = Location.REMOTE
    marked: bool = False
    mark_time: int = 0
    access_time: int = -1
    burst: ClusterState = field(default_factory=ClusterState)
    rate_f: float = 0.0
    ewma_rate: float | None = None
    last_access: int = -1


@dataclass
class MemoryState:
    page_size: int
    local_alloc_bytes: int
    low_watermark: int
    high_watermark: int
    pages: dict[int, PageRecord]
    lru: OrderedDict[int, None] = field(default_factory=OrderedDict)
    local_used_bytes: int = 0
    remote_used_bytes: int = 0
    recency_bucket: int = PS_PER_S

    def lru_order(self) -> list[int]:
        """Local pages, most recently used first."""
        return list(reversed(self.lru))

    def local_pages(self) -> list[int]:
        return [p.page_id for p in self.pages.values() if p.location is Location.LOCAL]

    def remote_pages(self) -> list[int]:
        return [p.page_id for p in self.pages.values() if p.location is Location.REMOTE]

    def fits_without_demotion(self) -> bool:
        return self.local_used_bytes + self.page_size <= self.low_watermark


def init_memory(
    n_pages: int,
    page_size: int = 4096,
    local_alloc: int = 0,
    initial_placement: Placement | str = Placement.ALL_REMOTE,
    slack_bytes: int = DEFAULT_SLACK,
    recency_bucket: int = PS_PER_S,
) -> MemoryState:
    placement = Placement(initial_placement)
    if page_size <= 0:
        raise ValueError("page_size must be positive")
    if local_alloc < 0:
        raise ValueError("local_alloc must be non-negative")
    if n_pages < 0:
        raise ValueError("n_pages must be non-negative")
    if placement is Placement.FILL_LOCAL and local_alloc < page_size:
        raise ValueError("local allocation is smaller than one page")
    if recency_bucket <= 0:
        raise ValueError("recency_bucket must be positive")

    n_local = min(n_pages, local_alloc // page_size) if placement is Placement.FILL_LOCAL else 0
    pages = {}
    lru: OrderedDict[int, None] = OrderedDict()
    for pid in range(n_pages):
        loc = Location.LOCAL if pid < n_local else Location.REMOTE
        pages[pid] = PageRecord(pid, loc)
        if loc is Location.LOCAL:
            lru[pid] = None
    return MemoryState(
        page_size=page_size,
        local_alloc_bytes=local_alloc,
        low_watermark=local_alloc,
        high_watermark=local_alloc + slack_bytes,
        pages=pages,
        lru=lru,
        local_used_bytes=n_local * page_size,
        remote_used_bytes=(n_pages - n_local) * page_size,
        recency_bucket=recency_bucket,
    )


def record_access(state: MemoryState, page_id: int, now: int) -> None:
    page = state.pages[page_id]
    page.last_access = now
    if page.location is Location.LOCAL:
        state.lru.move_to_end(page_id)


def demotion_key(page: PageRecord, bucket: int) -> tuple:
    """Ordering of demotion victims: oldest recency bucket first, then the
    lowest EWMA rate, then least recent access, then page id."""
    recency = page.last_access // bucket if page.last_access >= 0 else -1
    rate = page.ewma_rate if page.ewma_rate is not None else 0.0
    return (recency, rate, page.last_access, page.page_id)


def demotion_candidates(state: MemoryState, bytes_needed: int) -> list[int]:
    if bytes_needed <= 0:
        raise ValueError("bytes_needed must be positive")
    count = -(-bytes_needed // state.page_size)
    local = (state.pages[pid] for pid in state.lru)
    chosen = heapq.nsmallest(count, local, key=lambda p: demotion_key(p, state.recency_bucket))
    return [p.page_id for p in chosen]


def apply_swap(state: MemoryState, promote_id: int, demote_id: int | None = None) -> None:
    if promote_id == demote_id:
        raise ValueError(f"page {promote_id} cannot be both promoted and demoted")
    promote = state.pages[promote_id]
    if promote.location is not Location.REMOTE:
        raise ValueError(f"page {promote_id} is already local")
    if demote_id is None:
        if not state.fits_without_demotion():
            raise WatermarkViolation(
                f"promoting page {promote_id} would exceed the low watermark "
                f"({state.local_used_bytes} + {state.page_size} > {state.low_watermark})"
            )
        state.local_used_bytes += state.page_size
        state.remote_used_bytes -= state.page_size
    else:
        demote = state.pages[demote_id]
        if demote.location is not Location.LOCAL:
            raise ValueError(f"page {demote_id} is not local")
        demote.location = Location.REMOTE
        del state.lru[demote_id]
    promote.location = Location.LOCAL
    state.lru[promote_id] = None


def demote(state: MemoryState, page_id: int) -> None:
    """One-way demotion, used by the background reclaim path."""
    page = state.pages[page_id]
    if page.location is not Location.LOCAL:
        raise ValueError(f"page {page_id} is not local")
    page.location = Location.REMOTE
    del state.lru[page_id]
    state.local_used_bytes -= state.page_size
    state.remote_used_bytes += state.page_size


def reclaim_victims(state: MemoryState) -> list[int]:
    """Pages the demotion daemon evicts: nothing unless usage is above the
    high watermark, then LRU-tail pages until usage drops below the low one."""
    if state.local_used_bytes <= state.high_watermark:
        return []
    excess = state.local_used_bytes - state.low_watermark + 1
    return demotion_candidates(state, excess)
