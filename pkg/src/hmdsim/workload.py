"""Synthetic page-access traces and their text file format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_TAG = "hmdsim-trace-v1"
DEFAULT_COMPUTE_NS = 100.0


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Trace:
    pages: np.ndarray
    n_pages: int
    seed: int | None = None
    generator: str = "custom"
    params: dict = field(default_factory=dict)
    compute_ns_per_access: float = DEFAULT_COMPUTE_NS

    def __post_init__(self) -> None:
        pages = np.ascontiguousarray(self.pages, dtype=np.int64)
        if pages.ndim != 1:
            raise ValueError("trace must be one-dimensional")
        if pages.size and (pages.min() < 0 or pages.max() >= self.n_pages):
            raise ValueError("page id out of range for trace")
        if self.compute_ns_per_access < 0:
            raise ValueError("compute_ns_per_access must be non-negative")
        pages.setflags(write=False)
        object.__setattr__(self, "pages", pages)

    def __len__(self) -> int:
        return int(self.pages.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.n_pages == other.n_pages
            and self.seed == other.seed
            and self.generator == other.generator
            and self.params == other.params
            and self.compute_ns_per_access == other.compute_ns_per_access
            and np.array_equal(self.pages, other.pages)
        )

    def with_compute(self, compute_ns: float) -> Trace:
        return Trace(self.pages, self.n_pages, self.seed, self.generator, dict(self.params), compute_ns)


def gen_stationary(
    n_pages: int,
    hot_fraction: float,
    hot_prob: float,
    length: int,
    seed: int,
    compute_ns_per_access: float = DEFAULT_COMPUTE_NS,
) -> Trace:
    if not 0.0 < hot_fraction < 1.0:
        raise ValueError("hot_fraction must lie strictly between 0 and 1")
    if not 0.0 <= hot_prob <= 1.0:
        raise ValueError("hot_prob must lie in [0, 1]")
    n_hot = int(round(n_pages * hot_fraction))
    if n_hot < 1 or n_hot >= n_pages or length < 0:
        raise ValueError("degenerate hot/cold split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_pages)
    hot, cold = order[:n_hot], order[n_hot:]
    pick_hot = rng.random(length) < hot_prob
    hot_idx = rng.integers(0, n_hot, length)
    cold_idx = rng.integers(0, cold.size, length)
    pages = np.where(pick_hot, hot[hot_idx], cold[cold_idx])
    params = {"hot_fraction": hot_fraction, "hot_prob": hot_prob, "length": length}
    return Trace(pages, n_pages, seed, "stationary", params, compute_ns_per_access)


def hot_set(trace: Trace) -> np.ndarray:
    """Hot pages of a stationary trace (re-derived from its seed)."""
    if trace.generator != "stationary":
        raise ValueError("hot_set only applies to stationary traces")
    n_hot = int(round(trace.n_pages * trace.params["hot_fraction"]))
    return np.random.default_rng(trace.seed).permutation(trace.n_pages)[:n_hot]


def gen_shifting(
    n_pages: int,
    window_pages: int,
    shift_every: int,
    length: int,
    seed: int,
    compute_ns_per_access: float = DEFAULT_COMPUTE_NS,
) -> Trace:
    if not 0 < window_pages <= n_pages or shift_every < 1 or length < 0:
        raise ValueError("degenerate shifting-window parameters")
    rng = np.random.default_rng(seed)
    phase = np.arange(length, dtype=np.int64) // shift_every
    start = (phase * window_pages) % n_pages
    pages = (start + rng.integers(0, window_pages, length)) % n_pages
    params = {"window_pages": window_pages, "shift_every": shift_every, "length": length}
    return Trace(pages, n_pages, seed, "shifting", params, compute_ns_per_access)


def gen_zipf(
    n_pages: int,
    s: float,
    length: int,
    seed: int,
    compute_ns_per_access: float = DEFAULT_COMPUTE_NS,
) -> Trace:
    """Page ``i`` has popularity rank ``i + 1``."""
    if s < 0:
        raise ValueError("zipf exponent must be non-negative")
    if n_pages < 1 or length < 0:
        raise ValueError("degenerate zipf parameters")
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, n_pages + 1, dtype=float) ** s
    pages = rng.choice(n_pages, size=length, p=weights / weights.sum())
    params = {"s": s, "length": length}
    return Trace(pages, n_pages, seed, "zipf", params, compute_ns_per_access)


GENERATORS = {"stationary": gen_stationary, "shifting": gen_shifting, "zipf": gen_zipf}


def save_trace(trace: Trace, path: str | Path) -> None:
    header = [
        f"#format={FORMAT_TAG}",
        f"#n_pages={trace.n_pages}",
        f"#seed={'' if trace.seed is None else trace.seed}",
        f"#generator={trace.generator}",
        f"#params={json.dumps(trace.params, sort_keys=True, separators=(',', ':'))}",
        f"#compute_ns_per_access={trace.compute_ns_per_access!r}",
    ]
    body = "\n".join(map(str, trace.pages.tolist()))
    text = "\n".join(header) + "\n" + (body + "\n" if body else "")
    Path(path).write_text(text)


_REQUIRED = ("n_pages", "seed", "generator", "params", "compute_ns_per_access")


def load_trace(path: str | Path) -> Trace:
    path = Path(path)
    lines = path.read_text().splitlines()
    meta: dict[str, str] = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, sep, value = lines[i][1:].partition("=")
        if not sep:
            raise TraceFormatError(f"{path}:{i + 1}: malformed header line {lines[i]!r}")
        meta[key.strip()] = value.strip()
        i += 1
    missing = [k for k in _REQUIRED if k not in meta]
    if missing:
        raise TraceFormatError(f"{path}: missing header keys {', '.join(missing)}")
    try:
        n_pages = int(meta["n_pages"])
        seed = int(meta["seed"]) if meta["seed"] else None
        params = json.loads(meta["params"])
        compute = float(meta["compute_ns_per_access"])
    except ValueError as exc:
        raise TraceFormatError(f"{path}: bad header value: {exc}") from None
    ids = []
    for lineno, line in enumerate(lines[i:], start=i + 1):
        try:
            pid = int(line)
        except ValueError:
            raise TraceFormatError(f"{path}:{lineno}: not a page id: {line!r}") from None
        if not 0 <= pid < n_pages:
            raise TraceFormatError(f"{path}:{lineno}: page id {pid} out of range [0, {n_pages})")
        ids.append(pid)
    return Trace(np.array(ids, dtype=np.int64), n_pages, seed, meta["generator"], params, compute)
