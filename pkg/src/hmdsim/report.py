"""Run reports: a human table plus CSV rows with the config embedded."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .config import REPORT_PREFIX
from .engine import SimResult

FORMAT_VERSION = 1
COLUMNS = (
    "label",
    "local_alloc",
    "contention",
    "completion_time",
    "runtime_degradation",
    "promotions",
    "demotions",
    "promotion_rate",
    "migration_bytes",
    "remote_access_bytes",
    "normalized_traffic",
    "local_access_count",
    "remote_access_count",
    "peak_local_bytes",
    "peak_remote_bytes",
    "fault_count",
)


@dataclass(frozen=True)
class RunReport:
    label: str
    result: SimResult
    baseline_time: float
    local_alloc: float
    contention: float
    capacity: float
    extra: dict = field(default_factory=dict)

    @property
    def runtime_degradation(self) -> float:
        return self.result.completion_time / self.baseline_time

    @property
    def promotion_rate(self) -> float:
        """Promotions per simulated second."""
        return self.result.promotions / self.result.completion_time

    @property
    def normalized_traffic(self) -> float:
        """Own link bytes as a share of what the link could carry meanwhile."""
        r = self.result
        return (r.migration_bytes + r.remote_access_bytes) / (self.capacity * r.completion_time)

    def row(self) -> dict:
        r = self.result
        return {
            "label": self.label,
            "local_alloc": self.local_alloc,
            "contention": self.contention,
            "completion_time": r.completion_time,
            "runtime_degradation": self.runtime_degradation,
            "promotions": r.promotions,
            "demotions": r.demotions,
            "promotion_rate": self.promotion_rate,
            "migration_bytes": r.migration_bytes,
            "remote_access_bytes": r.remote_access_bytes,
            "normalized_traffic": self.normalized_traffic,
            "local_access_count": r.local_access_count,
            "remote_access_count": r.remote_access_count,
            "peak_local_bytes": r.peak_local_bytes,
            "peak_remote_bytes": r.peak_remote_bytes,
            "fault_count": r.fault_count,
        }


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def to_csv(reports: Sequence[RunReport], config_text: str, notes: Iterable[str] = ()) -> str:
    buf = io.StringIO()
    for line in config_text.splitlines():
        buf.write(f"{REPORT_PREFIX}{line}\n")
    for note in notes:
        buf.write(f"# {note}\n")
    buf.write(f"# hmdsim-report v{FORMAT_VERSION}\n")
    extra_cols = sorted({k for r in reports for k in r.extra})
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(COLUMNS) + extra_cols)
    for rep in reports:
        row = rep.row()
        writer.writerow([_fmt(row[c]) for c in COLUMNS] + [_fmt(rep.extra.get(c, "")) for c in extra_cols])
    return buf.getvalue()


def read_rows(path: str | Path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def table(reports: Sequence[RunReport]) -> str:
    head = ("label", "alloc", "phi", "time_s", "degr", "promos", "mig_MB", "traffic")
    rows = [
        (
            r.label,
            f"{r.local_alloc:.2f}",
            f"{r.contention:.2f}",
            f"{r.result.completion_time:.6f}",
            f"{r.runtime_degradation:.3f}",
            str(r.result.promotions),
            f"{r.result.migration_bytes / 1e6:.2f}",
            f"{r.normalized_traffic:.4f}",
        )
        for r in reports
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h) for i, h in enumerate(head)]
    out = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
    out += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows]
    return "\n".join(out)
