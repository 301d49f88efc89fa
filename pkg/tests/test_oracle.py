from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmdsim import _backend
from hmdsim.cost import CostParams
from hmdsim.oracle import SwapGraph, brute_force_matching, build_graph, hungarian, max_weight_matching

SMALL_K = CostParams(bookkeeping_k_time=1.0)
BW = 12.5e9


def test_single_hot_remote_page():
    g = build_graph([0], [1], {0: 0, 1: 10}, SMALL_K, BW)
    assert g.weights[(0, 0)] == 0
    assert g.weights[(0, 1)] == pytest.approx(9.589, abs=1e-3)
    m = max_weight_matching(g)
    assert m.swaps == [(1, 0)]


def test_equal_counts_no_swaps():
    g = build_graph([0, 1], [2, 3], {p: 5 for p in range(4)}, CostParams(), BW)
    assert all(w < 0 for (l, r), w in g.weights.items() if l != r)
    m = max_weight_matching(g)
    assert m.total == 0 and m.swaps == []


def test_empty_remote_only_self_edges():
    g = build_graph([0, 1], [], {0: 1, 1: 2}, CostParams(), BW)
    assert set(g.weights) == {(0, 0), (1, 1)}


def test_missing_count_rejected():
    with pytest.raises(ValueError):
        build_graph([0], [1], {0: 1}, CostParams(), BW)


def _cross(weights):
    g = SwapGraph([0, 1], [0, 1, "a", "b"])
    g.weights.update({(0, 0): 0, (1, 1): 0})
    for i, row in enumerate(weights):
        for j, w in zip("ab", row):
            g.weights[(i, j)] = w
    return g


def test_two_by_two_example():
    g = _cross([[3, 1], [2, 4]])
    assert max_weight_matching(g).total == 7
    assert max_weight_matching(g).pairs == {0: "a", 1: "b"}
    assert brute_force_matching(g).total == 7


def test_all_negative_cross():
    g = _cross([[-3, -1], [-2, -4]])
    assert max_weight_matching(g).total == 0 and max_weight_matching(g).swaps == []
    assert brute_force_matching(g).total == 0


def test_brute_force_limits():
    g = SwapGraph([0], [0], {(0, 0): 0})
    assert brute_force_matching(g).total == 0
    n = 8
    g = build_graph(list(range(n)), list(range(n, 2 * n)), {p: p for p in range(2 * n)}, CostParams(), BW)
    assert brute_force_matching(g).total == pytest.approx(max_weight_matching(g).total)
    g9 = build_graph(list(range(9)), [9], {p: 1 for p in range(10)}, CostParams(), BW)
    with pytest.raises(ValueError):
        brute_force_matching(g9)


def test_free_frames_are_one_way_promotions():
    g = build_graph([], [5, 6], {5: 9, 6: 0}, CostParams(), BW, free_slots=2)
    assert max_weight_matching(g).swaps == [(5, -1)] or max_weight_matching(g).swaps == [(5, -2)]


def test_fill_counts_weigh_free_frames():
    g = build_graph([0], [5], {0: 0, 5: 1}, CostParams(), BW, free_slots=1, fill_counts={5: 50})
    assert g.weights[(-1, 5)] > g.weights[(0, 5)]


def _random_graph(rng, exact):
    n_local = int(rng.integers(1, 7))
    n_remote = int(rng.integers(0, 7))
    free = int(rng.integers(0, 3))
    counts = {p: int(rng.integers(0, 20)) for p in range(n_local + n_remote)}
    return build_graph(list(range(n_local)), list(range(n_local, n_local + n_remote)), counts, CostParams(), BW, free, exact)


@given(st.integers(0, 2**32 - 1))
def test_exact_matches_brute_force(seed):
    g = _random_graph(np.random.default_rng(seed), exact=True)
    assert max_weight_matching(g).total == brute_force_matching(g).total


@given(st.integers(0, 2**32 - 1))
def test_swaps_always_positive(seed):
    g = _random_graph(np.random.default_rng(seed), exact=False)
    m = max_weight_matching(g)
    assert all(g.weights[(d, p)] > 0 for p, d in m.swaps)
    assert len({p for p, _ in m.swaps}) == len(m.swaps)


@pytest.mark.skipif(_backend.hungarian_kernel is None, reason="extension not built")
@given(st.integers(1, 12), st.integers(0, 12), st.integers(0, 2**32 - 1))
def test_kernel_agrees_with_python(rows, extra, seed):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(rows, rows + extra))
    w[rng.random(w.shape) < 0.3] = -np.inf
    w[np.arange(rows), np.arange(rows)] = 0.0  # keep it feasible
    cols_c = _backend.hungarian_kernel(np.ascontiguousarray(w))
    cols_p = hungarian([[None if np.isinf(x) else x for x in row] for row in w.tolist()])
    tot = lambda cols: w[np.arange(rows), cols].sum()  # noqa: E731
    assert tot(cols_c) == pytest.approx(tot(cols_p), abs=1e-9)


def test_generic_hungarian_fraction():
    rows = [[Fraction(1, 3), Fraction(1, 2)], [Fraction(2, 3), Fraction(0)]]
    assert hungarian(rows) == [1, 0]
