import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmdsim.workload import (
    TraceFormatError,
    gen_shifting,
    gen_stationary,
    gen_zipf,
    hot_set,
    load_trace,
    save_trace,
)


def test_stationary_extremes():
    t = gen_stationary(100, 0.1, 1.0, 5000, seed=1)
    assert set(t.pages.tolist()) <= set(hot_set(t).tolist())
    t = gen_stationary(100, 0.1, 0.0, 5000, seed=1)
    assert not set(t.pages.tolist()) & set(hot_set(t).tolist())


def test_stationary_hot_share():
    t = gen_stationary(1000, 0.1, 0.9, 1_000_000, seed=2)
    share = np.isin(t.pages, hot_set(t)).mean()
    assert abs(share - 0.9) <= 0.01


def test_shifting_examples():
    t = gen_shifting(64, 8, 100, 100, seed=1)
    assert t.pages.max() - t.pages.min() < 8
    t = gen_shifting(64, 64, 10, 1000, seed=1)
    assert set(t.pages.tolist()) <= set(range(64))
    t = gen_shifting(64, 8, 100, 200, seed=1)
    assert not set(t.pages[:100].tolist()) & set(t.pages[100:].tolist())


def test_shifting_wraps():
    t = gen_shifting(16, 8, 10, 40, seed=0)
    assert set(t.pages[20:30].tolist()) <= set(range(8))


def test_zipf_examples():
    assert len(gen_zipf(10, 1.0, 0, seed=1)) == 0
    t = gen_zipf(1000, 1.1, 200_000, seed=1)
    freq = np.bincount(t.pages, minlength=1000)
    assert freq[0] > freq[9]


def test_zipf_zero_is_uniform():
    from scipy.stats import chisquare

    t = gen_zipf(50, 0.0, 50_000, seed=4)
    assert chisquare(np.bincount(t.pages, minlength=50)).pvalue > 1e-3


def test_degenerate_parameters():
    with pytest.raises(ValueError):
        gen_stationary(10, 0.0, 0.5, 10, seed=1)
    with pytest.raises(ValueError):
        gen_shifting(10, 11, 5, 10, seed=1)
    with pytest.raises(ValueError):
        gen_zipf(10, -1.0, 10, seed=1)


def test_trace_is_immutable():
    t = gen_zipf(10, 1.0, 10, seed=1)
    with pytest.raises(ValueError):
        t.pages[0] = 3


def test_round_trip(tmp_path):
    t = gen_shifting(64, 8, 100, 500, seed=5, compute_ns_per_access=12.5)
    save_trace(t, tmp_path / "t.txt")
    assert load_trace(tmp_path / "t.txt") == t


def test_empty_trace_round_trip(tmp_path):
    t = gen_zipf(10, 1.0, 0, seed=1)
    save_trace(t, tmp_path / "e.txt")
    back = load_trace(tmp_path / "e.txt")
    assert len(back) == 0 and back == t


def test_out_of_range_id_names_line(tmp_path):
    t = gen_zipf(10, 1.0, 5, seed=1)
    path = tmp_path / "bad.txt"
    save_trace(t, path)
    lines = path.read_text().splitlines()
    lines[-2] = "99"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TraceFormatError, match=f":{len(lines) - 1}:"):
        load_trace(path)


@given(st.sampled_from(["stationary", "shifting", "zipf"]), st.integers(0, 2**31), st.integers(0, 500))
def test_same_seed_same_bytes(kind, seed, length):
    make = {
        "stationary": lambda: gen_stationary(40, 0.2, 0.8, length, seed),
        "shifting": lambda: gen_shifting(40, 8, 17, length, seed),
        "zipf": lambda: gen_zipf(40, 1.2, length, seed),
    }[kind]
    a, b = make(), make()
    assert a.pages.tobytes() == b.pages.tobytes()
    assert ((a.pages >= 0) & (a.pages < 40)).all()
