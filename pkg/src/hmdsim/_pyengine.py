"""Pure-Python simulation tenant, built directly on the memory, telemetry,
link and policy objects. The compiled kernel reproduces it bit for bit."""

from __future__ import annotations

import numpy as np

from .cost import CostParams
from .link import LinkModel
from .memory import (
    Location,
    apply_swap,
    demote,
    demotion_candidates,
    init_memory,
    reclaim_victims,
    record_access,
)
from .policies import Decision, decide
from .telemetry import mark_pages, on_hint_fault


class PyTenant:
    def __init__(self, spec) -> None:
        self.spec = spec
        self.trace = spec.pages.tolist()
        self.n_accesses = len(self.trace)
        self.mem = init_memory(
            spec.n_pages,
            spec.page_size,
            spec.local_alloc,
            spec.placement,
            spec.slack_bytes,
            recency_bucket=spec.telemetry.interval_ps,
        )
        self.telemetry = spec.telemetry
        self.cost: CostParams = spec.cost
        self.policy = spec.policy
        self.link = LinkModel(**spec.link_kwargs)
        self.compute_ps = spec.compute_ps
        self.local_ps = self.link.local_access_ps()
        self.k_ps = spec.k_ps
        self.clock = 0
        self.pos = 0
        self.promotions = 0
        self.demotions = 0
        self.migration_bytes = 0
        self.remote_access_bytes = 0
        self.local_count = 0
        self.remote_count = 0
        self.faults = 0
        self.compute_total = 0
        self.access_total = 0
        self.transfer_total = 0
        self.bookkeeping_total = 0
        self.peak_local = self.mem.local_used_bytes
        self.peak_remote = self.mem.remote_used_bytes
        self._xfer_ps = self.link.page_transfer_ps(spec.page_size)

    @property
    def done(self) -> bool:
        return self.pos >= self.n_accesses

    def mark(self, now: int) -> int:
        return mark_pages(self.mem, now)

    def run_until(self, until: int, segments) -> None:
        seg = 0
        self._enter_segment(segments[0])
        while self.pos < self.n_accesses and self.clock <= until:
            self.clock += self.compute_ps
            self.compute_total += self.compute_ps
            while seg + 1 < len(segments) and segments[seg + 1].start <= self.clock:
                seg += 1
                self._enter_segment(segments[seg])
            self._access(self.trace[self.pos])
            self.pos += 1

    def _enter_segment(self, segment) -> None:
        self.link.set_background_fraction(segment.phi)
        self._remote_ps = self.link.remote_access_ps()
        self._xfer_ps = self.link.page_transfer_ps(self.mem.page_size)

    def _access(self, pid: int) -> None:
        now = self.clock
        mem = self.mem
        page = mem.pages[pid]
        if page.marked:
            self.faults += 1
            fault = on_hint_fault(mem, pid, now, self.telemetry)
            if decide(self.policy, fault, page, self.link, mem, self.cost) is Decision.PROMOTE:
                victim = None if mem.fits_without_demotion() else demotion_candidates(mem, mem.page_size)[0]
                self._migrate(pid, victim)
        if page.location is Location.LOCAL:
            latency = self.local_ps
            self.local_count += 1
        else:
            latency = self._remote_ps
            self.remote_count += 1
            self.remote_access_bytes += self.link.cacheline
        self.clock += latency
        self.access_total += latency
        record_access(mem, pid, now)

    def _migrate(self, pid: int, victim: int | None) -> None:
        copies = 1 if victim is None else 2
        cost = copies * self._xfer_ps
        self.clock += cost + self.k_ps
        self.transfer_total += cost
        self.bookkeeping_total += self.k_ps
        self.migration_bytes += copies * self.mem.page_size
        self.promotions += 1
        if victim is not None:
            self.demotions += 1
        apply_swap(self.mem, pid, victim)
        self.peak_local = max(self.peak_local, self.mem.local_used_bytes)
        self._reclaim()

    def _reclaim(self) -> None:
        for victim in reclaim_victims(self.mem):
            demote(self.mem, victim)
            self.clock += self._xfer_ps
            self.transfer_total += self._xfer_ps
            self.migration_bytes += self.mem.page_size
            self.demotions += 1
            self.peak_remote = max(self.peak_remote, self.mem.remote_used_bytes)

    # planner hooks
    def local_pages(self) -> np.ndarray:
        return np.array(sorted(self.mem.local_pages()), dtype=np.int64)

    def remote_pages(self) -> np.ndarray:
        return np.array(sorted(self.mem.remote_pages()), dtype=np.int64)

    def free_slots(self) -> int:
        free = self.mem.low_watermark - self.mem.local_used_bytes
        return max(0, free // self.mem.page_size)

    def upcoming(self, count: int) -> np.ndarray:
        return self.spec.pages[self.pos : self.pos + count]

    def planned_migrate(self, pid: int, victim: int, xfer_ps: int) -> None:
        self._xfer_ps = xfer_ps
        self._migrate(pid, None if victim < 0 else victim)

    def stats(self) -> dict:
        return {
            "clock": self.clock,
            "promotions": self.promotions,
            "demotions": self.demotions,
            "migration_bytes": self.migration_bytes,
            "remote_access_bytes": self.remote_access_bytes,
            "local_count": self.local_count,
            "remote_count": self.remote_count,
            "faults": self.faults,
            "compute_ps": self.compute_total,
            "access_ps": self.access_total,
            "transfer_ps": self.transfer_total,
            "bookkeeping_ps": self.bookkeeping_total,
            "peak_local": self.peak_local,
            "peak_remote": self.peak_remote,
            "local_used": self.mem.local_used_bytes,
        }
