"""Deterministic trace-replay engine.

Each tenant is a single simulated hardware thread with its own clock.
Time advances in marking epochs: at every epoch boundary each tenant's
pages are poisoned, the clairvoyant planner (if selected) acts, and the
tenant replays its trace until its clock passes the next boundary. Tenants
interact only through the shared link: the traffic every other tenant put
on the link during the previous epoch is added to the background
contention a tenant sees in the current one.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _backend
from .cost import CostParams
from .link import LinkModel
from .memory import DEFAULT_SLACK, Placement
from .oracle import oracle_policy_step
from .policies import (
    Bandit,
    EwmaThreshold,
    NetworkAdaptive,
    NoMigration,
    Oracle,
    PolicyKind,
    StaticThreshold,
)
from .telemetry import TelemetryConfig
from .units import PS_PER_S, ns_to_ps, ps_to_seconds, seconds_to_ps
from .workload import Trace

POLICY_CODES = {NoMigration: 0, StaticThreshold: 1, EwmaThreshold: 2, NetworkAdaptive: 3, Bandit: 4, Oracle: 5}
MAX_CONTENTION = 0.95


@dataclass(frozen=True)
class LinkSettings:
    capacity: float = 12.5e9
    background_fraction: float = 0.0
    local_latency: float = 100.0
    remote_base_latency: float = 900.0
    cacheline: int = 64

    def model(self, phi: float | None = None) -> LinkModel:
        kwargs = dataclasses.asdict(self)
        if phi is not None:
            kwargs["background_fraction"] = phi
        return LinkModel(**kwargs)


@dataclass(frozen=True)
class TenantConfig:
    trace: Trace
    policy: PolicyKind = NoMigration()
    local_alloc: float = 0.5
    placement: Placement = Placement.ALL_REMOTE
    name: str = ""

    @property
    def working_set(self) -> int:
        return self.trace.n_pages


@dataclass(frozen=True)
class SimConfig:
    tenants: tuple[TenantConfig, ...]
    telemetry: TelemetryConfig = TelemetryConfig()
    link: LinkSettings = LinkSettings()
    page_size: int = 4096
    bookkeeping_k_time: float = 1000.0
    lookahead: float | None = None
    contention: tuple[tuple[float, float], ...] = ()
    slack_bytes: int = DEFAULT_SLACK
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.tenants:
            raise ValueError("at least one tenant is required")
        times = [t for t, _ in self.contention]
        if times != sorted(times):
            raise ValueError("contention schedule times must be sorted")
        for t, phi in self.contention:
            if t < 0 or not 0.0 <= phi < 1.0:
                raise ValueError(f"bad contention step ({t}, {phi})")
        for tenant in self.tenants:
            if not 0.0 <= tenant.local_alloc:
                raise ValueError("local_alloc fraction must be non-negative")
            if tenant.trace.compute_ns_per_access <= 0:
                raise ValueError("compute_ns_per_access must be positive for simulation")

    @property
    def cost(self) -> CostParams:
        return CostParams(
            page_size=self.page_size,
            delta_latency=self.link.remote_base_latency - self.link.local_latency,
            bookkeeping_k_time=self.bookkeeping_k_time,
            lookahead=self.lookahead if self.lookahead is not None else self.telemetry.marking_interval,
        )

    def schedule(self) -> list[tuple[int, float]]:
        steps = [(0, self.link.background_fraction)]
        for t, phi in self.contention:
            ps = seconds_to_ps(t)
            if ps == 0:
                steps[0] = (0, phi)
            else:
                steps.append((ps, phi))
        return steps

    def replace(self, **changes) -> SimConfig:
        return dataclasses.replace(self, **changes)

    def with_tenant(self, **changes) -> SimConfig:
        """Copy with the (single) tenant's fields replaced."""
        return dataclasses.replace(self, tenants=(dataclasses.replace(self.tenants[0], **changes),) + self.tenants[1:])


@dataclass(frozen=True)
class PolicyContext:
    """Bandit context: raw bytes plus the scales used to normalize them."""

    local_alloc: int
    local_usage_peak: int
    remote_usage_peak: int
    network_traffic: float
    working_set: int
    traffic_scale: float

    def vector(self) -> np.ndarray:
        ws = float(self.working_set)
        return np.array(
            [
                self.local_alloc / ws,
                self.local_usage_peak / ws,
                self.remote_usage_peak / ws,
                self.network_traffic / self.traffic_scale if self.traffic_scale > 0 else 0.0,
            ]
        )


@dataclass(frozen=True)
class SimResult:
    name: str
    completion_ps: int
    promotions: int
    demotions: int
    migration_bytes: int
    remote_access_bytes: int
    local_access_count: int
    remote_access_count: int
    peak_local_bytes: int
    peak_remote_bytes: int
    fault_count: int
    compute_ps: int
    access_ps: int
    transfer_ps: int
    bookkeeping_ps: int
    local_alloc_bytes: int
    working_set_bytes: int
    background_bytes: float
    context: PolicyContext
    swap_log: tuple = ()

    @property
    def completion_time(self) -> float:
        return ps_to_seconds(self.completion_ps)

    @property
    def accounted_ps(self) -> int:
        return self.compute_ps + self.access_ps + self.transfer_ps + self.bookkeeping_ps

    def metrics(self) -> dict:
        out = dataclasses.asdict(self)
        out.pop("context")
        out.pop("swap_log")
        out["completion_time"] = self.completion_time
        return out


@dataclass
class TenantSpec:
    """Flattened per-tenant parameters handed to a simulation backend."""

    pages: np.ndarray
    n_pages: int
    page_size: int
    local_alloc: int
    slack_bytes: int
    placement: Placement
    placement_fill: bool
    telemetry: TelemetryConfig
    cost: CostParams
    policy: PolicyKind
    policy_code: int
    policy_cutoff: float
    policy_burst: int
    policy_rate: float
    policy_threshold: float
    link_kwargs: dict
    compute_ps: int
    local_ps: int
    k_ps: int


def tenant_spec(config: SimConfig, tenant: TenantConfig) -> TenantSpec:
    policy = tenant.policy
    telemetry = config.telemetry
    if isinstance(policy, EwmaThreshold):
        telemetry = dataclasses.replace(telemetry, ewma_alpha=policy.alpha)
    ws = tenant.trace.n_pages * config.page_size
    cutoff = getattr(policy, "rate_cutoff", 0.0)
    threshold = getattr(policy, "threshold", None)
    link = config.link.model()
    return TenantSpec(
        pages=tenant.trace.pages,
        n_pages=tenant.trace.n_pages,
        page_size=config.page_size,
        local_alloc=int(tenant.local_alloc * ws),
        slack_bytes=config.slack_bytes,
        placement=Placement(tenant.placement),
        placement_fill=Placement(tenant.placement) is Placement.FILL_LOCAL,
        telemetry=telemetry,
        cost=config.cost,
        policy=policy,
        policy_code=POLICY_CODES[type(policy)],
        policy_cutoff=float(cutoff),
        policy_burst=int(getattr(policy, "theta_burst", 0)),
        policy_rate=float(getattr(policy, "theta_rate", 0.0)),
        policy_threshold=float(config.page_size if threshold is None else threshold),
        link_kwargs=dataclasses.asdict(config.link),
        compute_ps=ns_to_ps(tenant.trace.compute_ns_per_access),
        local_ps=link.local_access_ps(),
        k_ps=ns_to_ps(config.bookkeeping_k_time),
    )


@dataclass(frozen=True)
class Segment:
    start: int
    phi: float
    remote_ps: int
    xfer_ps: int
    bandwidth: float


def _segments(config: SimConfig, extra_phi: float) -> list[Segment]:
    out = []
    for start, phi in config.schedule():
        phi = min(phi + extra_phi, MAX_CONTENTION) if extra_phi else phi
        link = config.link.model(phi)
        out.append(Segment(start, phi, link.remote_access_ps(), link.page_transfer_ps(config.page_size), link.effective_bandwidth()))
    return out


def _segment_arrays(segments: list[Segment]) -> tuple:
    return (
        np.array([s.start for s in segments], dtype=np.int64),
        np.array([s.remote_ps for s in segments], dtype=np.int64),
        np.array([s.xfer_ps for s in segments], dtype=np.int64),
        np.array([s.bandwidth for s in segments], dtype=np.float64),
    )


def _background_bytes(config: SimConfig, end_ps: int) -> float:
    steps = config.schedule()
    total = 0.0
    for i, (start, phi) in enumerate(steps):
        stop = steps[i + 1][0] if i + 1 < len(steps) else end_ps
        stop = min(stop, end_ps)
        if stop > start:
            total += phi * config.link.capacity * ((stop - start) / PS_PER_S)
    return total


def simulate(config: SimConfig, backend=None) -> list[SimResult]:
    """Run every tenant to completion; one result per tenant, in order."""
    tenant_cls = backend if backend is not None else _backend.Tenant
    specs = [tenant_spec(config, t) for t in config.tenants]
    tenants = [tenant_cls(spec) for spec in specs]
    interval = config.telemetry.interval_ps
    cost = config.cost
    capacity_per_epoch = config.link.capacity * config.telemetry.marking_interval
    base_segments = _segments(config, 0.0)
    base_arrays = _segment_arrays(base_segments)
    n = len(tenants)
    last_bytes = [0] * n
    epoch_bytes = [0] * n
    epoch_start_pos = [0] * n
    swap_logs: list[list] = [[] for _ in range(n)]
    planner = [isinstance(t.policy, Oracle) for t in config.tenants]
    first_window = [
        max(1, interval // (spec.compute_ps + base_segments[0].remote_ps)) for spec in specs
    ]

    epoch = 0
    while not all(t.done for t in tenants):
        boundary = epoch * interval
        for i, tenant in enumerate(tenants):
            if tenant.done:
                continue
            extra = 0.0
            if n > 1:
                extra = sum(epoch_bytes[j] for j in range(n) if j != i) / capacity_per_epoch
            if extra:
                segments = _segments(config, extra)
                arrays = _segment_arrays(segments)
            else:
                segments, arrays = base_segments, base_arrays
            tenant.mark(boundary)
            if planner[i]:
                window = first_window[i] if epoch == 0 else max(1, tenant.pos - epoch_start_pos[i])
                plan = config.tenants[i].policy
                active = segments[0]
                for seg in segments[1:]:
                    if seg.start <= tenant.clock:
                        active = seg
                link = config.link.model(active.phi)
                planned_at = tenant.clock
                for promoted, demoted in oracle_policy_step(tenant, link, cost, window * plan.lookahead_epochs, window * plan.fill_epochs):
                    swap_logs[i].append((planned_at, promoted, demoted))
            epoch_start_pos[i] = tenant.pos
            if isinstance(tenant, _backend.PyTenant):
                tenant.run_until(boundary + interval, segments)
            else:
                tenant.run_until(boundary + interval, *arrays)
        for i, tenant in enumerate(tenants):
            stats = tenant.stats()
            total = stats["migration_bytes"] + stats["remote_access_bytes"]
            epoch_bytes[i] = total - last_bytes[i]
            last_bytes[i] = total
        epoch += 1

    results = []
    for i, (tenant, tcfg, spec) in enumerate(zip(tenants, config.tenants, specs)):
        s = tenant.stats()
        ws = spec.n_pages * spec.page_size
        background = _background_bytes(config, s["clock"])
        traffic = s["migration_bytes"] + s["remote_access_bytes"] + background
        duration = ps_to_seconds(s["clock"])
        context = PolicyContext(
            local_alloc=spec.local_alloc,
            local_usage_peak=s["peak_local"],
            remote_usage_peak=s["peak_remote"],
            network_traffic=traffic,
            working_set=ws,
            traffic_scale=config.link.capacity * duration,
        )
        results.append(
            SimResult(
                name=tcfg.name or f"tenant{i}",
                completion_ps=s["clock"],
                promotions=s["promotions"],
                demotions=s["demotions"],
                migration_bytes=s["migration_bytes"],
                remote_access_bytes=s["remote_access_bytes"],
                local_access_count=s["local_count"],
                remote_access_count=s["remote_count"],
                peak_local_bytes=s["peak_local"],
                peak_remote_bytes=s["peak_remote"],
                fault_count=s["faults"],
                compute_ps=s["compute_ps"],
                access_ps=s["access_ps"],
                transfer_ps=s["transfer_ps"],
                bookkeeping_ps=s["bookkeeping_ps"],
                local_alloc_bytes=spec.local_alloc,
                working_set_bytes=ws,
                background_bytes=background,
                context=context,
                swap_log=tuple(swap_logs[i]),
            )
        )
    return results


def run(config: SimConfig, backend=None) -> SimResult:
    if len(config.tenants) != 1:
        raise ValueError("run() takes a single-tenant config; use run_multi()")
    return simulate(config, backend)[0]


def run_multi(config: SimConfig, backend=None) -> list[SimResult]:
    if len(config.tenants) < 2:
        raise ValueError("run_multi() needs at least two tenants")
    return simulate(config, backend)


def full_local_baseline(config: SimConfig) -> SimResult:
    """Completion with the whole working set in local memory and no migration."""
    return run(config.with_tenant(local_alloc=1.0, placement=Placement.FILL_LOCAL, policy=NoMigration()))


@dataclass(frozen=True)
class SweepRow:
    index: int
    allocation: float
    contention: float
    result: SimResult
    degradation: float


def _sweep_cell(args) -> SimResult:
    config, alloc, phi = args
    cell = config.replace(link=dataclasses.replace(config.link, background_fraction=phi)).with_tenant(local_alloc=alloc)
    return run(cell)


def sweep(
    base: SimConfig,
    allocations: Sequence[float],
    contentions: Sequence[float],
    jobs: int = 1,
) -> list[SweepRow]:
    """Cartesian product of allocation fractions and background contention.

    Rows come back in grid order (allocation-major) whatever the worker
    completion order.
    """
    if not allocations or not contentions:
        raise ValueError("sweep needs at least one allocation and one contention level")
    cells = [(base, a, phi) for a in allocations for phi in contentions]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    baseline = full_local_baseline(base).completion_ps
    return [
        SweepRow(i, a, phi, res, res.completion_ps / baseline)
        for i, ((_, a, phi), res) in enumerate(zip(cells, results))
    ]
