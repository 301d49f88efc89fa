"""Clairvoyant swap planner: maximum-weight bipartite matching between
local pages and all pages, weighted by the net benefit of each swap."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import _backend
from .cost import CostParams, net_benefit, transfer_threshold
from .link import LinkModel

BRUTE_FORCE_LIMIT = 8


@dataclass
class SwapGraph:
    """Left vertices are local pages, right vertices all pages.

    Free local frames appear as negative ids on both sides so that a
    promotion into free space is a swap with an empty frame.
    """

    left: list[int]
    right: list[int]
    weights: dict[tuple[int, int], float | Fraction] = field(default_factory=dict)

    def weight_rows(self) -> list[list[float | Fraction | None]]:
        return [[self.weights.get((l, r)) for r in self.right] for l in self.left]


@dataclass
class Matching:
    pairs: dict[int, int]
    total: float | Fraction
    graph: SwapGraph

    @property
    def swaps(self) -> list[tuple[int, int]]:
        """(promoted, demoted) for every cross edge with positive benefit."""
        out = []
        for l, r in self.pairs.items():
            if l != r and self.graph.weights[(l, r)] > 0:
                out.append((r, l))
        return out


def build_graph(
    local: Sequence[int],
    remote: Sequence[int],
    future_counts: Mapping[int, int],
    cost_params: CostParams,
    bandwidth: float,
    free_slots: int = 0,
    exact: bool = False,
    fill_counts: Mapping[int, int] | None = None,
) -> SwapGraph:
    """``fill_counts`` (default: ``future_counts``) weighs promotions into
    free frames, which can use a longer horizon than swaps."""
    local = list(local)
    fill_counts = future_counts if fill_counts is None else fill_counts
    remote = list(remote)
    missing = [p for p in itertools.chain(local, remote) if p not in future_counts]
    missing += [p for p in remote if free_slots and p not in fill_counts]
    if missing:
        raise ValueError(f"no future access count for pages {missing[:5]}")
    frames = [-(i + 1) for i in range(free_slots)]
    left = local + frames
    graph = SwapGraph(left, local + remote + frames)
    if exact:
        cost = (
            Fraction(cost_params.page_size) / (Fraction(bandwidth) * Fraction(cost_params.delta_latency) * Fraction(1, 10**9))
            + Fraction(cost_params.bookkeeping_k_time) / Fraction(cost_params.delta_latency)
        )
    for d in left:
        graph.weights[(d, d)] = Fraction(0) if exact else 0.0
        count_d = future_counts[d] if d >= 0 else 0
        source = future_counts if d >= 0 else fill_counts
        for p in remote:
            if exact:
                w = Fraction(source[p] - count_d) - cost
            else:
                w = net_benefit(source[p], count_d, cost_params, bandwidth)
            graph.weights[(d, p)] = w
    return graph


def hungarian(rows: list[list]) -> list[int]:
    """Column assigned to each row maximizing total weight (``None`` = no
    edge). Works on any ordered numeric type, so Fractions stay exact."""
    n = len(rows)
    m = len(rows[0]) if rows else 0
    if n > m:
        raise ValueError("more rows than columns")
    inf = float("inf")
    u = [0] * (n + 1)
    v = [0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = rows[i0 - 1]
            delta = inf
            j1 = -1
            ui = u[i0]
            for j in range(1, m + 1):
                if used[j]:
                    continue
                w = row[j - 1]
                if w is not None:
                    cur = -w - ui - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            if j1 < 0 or delta == inf:
                raise ValueError("no feasible assignment")
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    result = [-1] * n
    for j in range(1, m + 1):
        if p[j]:
            result[p[j] - 1] = j - 1
    return result


def _as_matching(graph: SwapGraph, columns: Sequence[int]) -> Matching:
    pairs = {l: graph.right[c] for l, c in zip(graph.left, columns)}
    total = sum((graph.weights[(l, r)] for l, r in pairs.items()), 0)
    return Matching(pairs, total, graph)


def max_weight_matching(graph: SwapGraph) -> Matching:
    if not graph.left:
        return Matching({}, 0, graph)
    rows = graph.weight_rows()
    exact = any(isinstance(w, Fraction) for w in graph.weights.values())
    if _backend.hungarian_kernel is not None and not exact:
        dense = np.array([[-np.inf if w is None else w for w in row] for row in rows], dtype=float)
        columns = _backend.hungarian_kernel(np.ascontiguousarray(dense)).tolist()
    else:
        columns = hungarian(rows)
    return _as_matching(graph, columns)


def brute_force_matching(graph: SwapGraph) -> Matching:
    if len(graph.left) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} left vertices")
    options = [[r for r in graph.right if (l, r) in graph.weights] for l in graph.left]
    best_total = None
    best: tuple[int, ...] = ()

    def walk(i: int, taken: set, chosen: list, total) -> None:
        nonlocal best_total, best
        if i == len(graph.left):
            if best_total is None or total > best_total:
                best_total, best = total, tuple(chosen)
            return
        l = graph.left[i]
        for r in options[i]:
            if r in taken:
                continue
            taken.add(r)
            chosen.append(r)
            walk(i + 1, taken, chosen, total + graph.weights[(l, r)])
            chosen.pop()
            taken.discard(r)

    walk(0, set(), [], 0)
    pairs = dict(zip(graph.left, best))
    return Matching(pairs, best_total if best_total is not None else 0, graph)


def _keep_top(ids: np.ndarray, keys: np.ndarray, count: int) -> np.ndarray:
    """First ``count`` ids by ascending key (id breaks ties), plus any ids
    tied with the last one kept."""
    if ids.size <= count:
        return ids[np.lexsort((ids, keys))]
    order = np.lexsort((ids, keys))
    ids, keys = ids[order], keys[order]
    if count == 0:
        return ids[:0]
    cut = keys[count - 1]
    return ids[keys <= cut]


def oracle_policy_step(
    tenant, link: LinkModel, cost_params: CostParams, lookahead: int, fill_lookahead: int | None = None
) -> list[tuple[int, int]]:
    """Plan and apply the best swaps for the next ``lookahead`` accesses.

    Promotions into free frames are weighed over ``fill_lookahead``
    accesses (default ``lookahead``): they displace nothing, so their
    benefit lasts until a later swap evicts the page. Returns the applied
    (promoted, demoted) pairs; demoted is -1 for a free frame.
    """
    if tenant.done or lookahead < 1:
        return []
    n_pages = int(tenant.spec.n_pages)
    counts = np.bincount(np.asarray(tenant.upcoming(lookahead)), minlength=n_pages)
    fill_lookahead = lookahead if fill_lookahead is None else fill_lookahead
    bandwidth = link.effective_bandwidth()
    cost = transfer_threshold(cost_params.page_size, bandwidth, cost_params.delta_latency) + cost_params.k_accesses

    local = tenant.local_pages()
    remote = tenant.remote_pages()
    free = int(tenant.free_slots())
    if remote.size == 0 or (local.size == 0 and free == 0):
        return []
    fill = counts
    if free and fill_lookahead != lookahead:
        fill = np.bincount(np.asarray(tenant.upcoming(fill_lookahead)), minlength=n_pages)

    # Edge weights are separable, (count_p - count_d) - cost, so only the
    # hottest remote and coldest local pages can sit on a positive edge.
    slots = local.size + free
    keep = np.zeros(0, dtype=np.int64)
    if local.size:
        cand = remote[(counts[remote] - counts[local].min()) - cost > 0]
        keep = _keep_top(cand, -counts[cand], slots)
    if free:
        cand = remote[fill[remote] - cost > 0]
        keep = np.union1d(keep, _keep_top(cand, -fill[cand], slots))
    remote = np.sort(keep)
    if remote.size == 0:
        return []
    hottest = int(counts[remote].max())
    local = local[((hottest - counts[local]) - cost) > 0]
    local = _keep_top(local, counts[local], remote.size)
    frames = min(free, remote.size)

    graph = build_graph(
        local.tolist(),
        remote.tolist(),
        {int(p): int(counts[p]) for p in np.concatenate([local, remote])},
        cost_params,
        bandwidth,
        free_slots=frames,
        fill_counts={int(p): int(fill[p]) for p in remote},
    )
    matching = max_weight_matching(graph)
    xfer_ps = link.page_transfer_ps(cost_params.page_size)
    applied = []
    for promoted, demoted in matching.swaps:
        victim = demoted if demoted >= 0 else -1
        tenant.planned_migrate(promoted, victim, xfer_ps)
        applied.append((promoted, victim))
    return applied
