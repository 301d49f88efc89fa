import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmdsim.cost import CostParams
from hmdsim.link import LinkModel
from hmdsim.memory import Placement, apply_swap, demote, init_memory
from hmdsim.policies import (
    Bandit,
    Decision,
    EwmaThreshold,
    NetworkAdaptive,
    NoMigration,
    Oracle,
    StaticThreshold,
    decide,
    est_demote_rate,
)
from hmdsim.telemetry import FaultReport

COST = CostParams()  # lookahead 1 s: counts equal rates


def _fault(rate, burst=1, ewma=None, pid=3):
    return FaultReport(pid, rate, burst, rate if ewma is None else ewma)


def _mem(free=True):
    m = init_memory(8, 4096, (3 if free else 2) * 4096, Placement.ALL_REMOTE)
    apply_swap(m, 0)
    apply_swap(m, 1)
    return m


def test_static_threshold_example():
    m = _mem()
    assert decide(StaticThreshold(2.0), _fault(3.0), m.pages[3], LinkModel(), m, COST) is Decision.PROMOTE
    assert decide(StaticThreshold(2.0), _fault(2.0), m.pages[3], LinkModel(), m, COST) is Decision.STAY


def test_ewma_uses_smoothed_rate():
    m = _mem()
    policy = EwmaThreshold(0.5, 2.0)
    assert decide(policy, _fault(10.0, ewma=1.0), m.pages[3], LinkModel(), m, COST) is Decision.STAY
    assert decide(policy, _fault(0.1, ewma=3.0), m.pages[3], LinkModel(), m, COST) is Decision.PROMOTE


def test_bandit_needs_both_thresholds():
    m = _mem()
    policy = Bandit(4, 1.0)
    assert decide(policy, _fault(1e6, burst=2), m.pages[3], LinkModel(), m, COST) is Decision.STAY
    assert decide(policy, _fault(0.5, burst=8), m.pages[3], LinkModel(), m, COST) is Decision.STAY
    assert decide(policy, _fault(1.0, burst=4), m.pages[3], LinkModel(), m, COST) is Decision.PROMOTE


def test_no_migration_and_oracle_never_promote_on_faults():
    m = _mem()
    for policy in (NoMigration(), Oracle()):
        assert decide(policy, _fault(1e9), m.pages[3], LinkModel(), m, COST) is Decision.STAY


def test_local_page_faults_stay():
    m = _mem()
    assert decide(StaticThreshold(0.0), _fault(1e9, pid=0), m.pages[0], LinkModel(), m, COST) is Decision.STAY


def test_full_node_without_victim_stays():
    m = init_memory(4, 4096, 0)
    assert decide(StaticThreshold(0.0), _fault(1e9), m.pages[3], LinkModel(), m, COST) is Decision.STAY


def test_full_node_with_victim_promotes():
    m = _mem(free=False)
    assert decide(StaticThreshold(0.0), _fault(1.0), m.pages[3], LinkModel(), m, COST) is Decision.PROMOTE


def test_est_demote_rate_examples():
    m = init_memory(6, 4096, 3 * 4096)
    assert est_demote_rate(m) == 0.0
    apply_swap(m, 4)
    apply_swap(m, 2)
    m.pages[4].ewma_rate = 0.1
    m.pages[2].ewma_rate = 0.5
    assert est_demote_rate(m) == 0.1
    demote(m, 4)
    assert est_demote_rate(m) == 0.5


def test_adaptive_subtracts_victim_rate():
    m = _mem(free=False)
    m.pages[0].ewma_rate = m.pages[1].ewma_rate = 100.0
    policy = NetworkAdaptive()
    assert decide(policy, _fault(100.0), m.pages[3], LinkModel(), m, COST) is Decision.STAY
    assert decide(policy, _fault(101.0), m.pages[3], LinkModel(), m, COST) is Decision.PROMOTE


def test_adaptive_ignores_victim_when_room():
    m = _mem(free=True)
    m.pages[0].ewma_rate = m.pages[1].ewma_rate = 1e9
    assert decide(NetworkAdaptive(), _fault(1.0), m.pages[3], LinkModel(), m, COST) is Decision.PROMOTE


def test_policy_parameter_validation():
    with pytest.raises(ValueError):
        StaticThreshold(-1)
    with pytest.raises(ValueError):
        EwmaThreshold(alpha=0)
    with pytest.raises(ValueError):
        Bandit(1.5, 0)
    with pytest.raises(ValueError):
        Oracle(lookahead_epochs=0)


faults = st.lists(st.tuples(st.floats(0, 1e4), st.floats(0, 1e4)), min_size=1, max_size=40)


@given(faults, st.floats(0, 0.9), st.floats(0, 0.9))
def test_adaptive_promotions_monotone_in_contention(stream, phi_a, phi_b):
    lo, hi = sorted((phi_a, phi_b))

    def promotes(phi):
        count = 0
        for rate, victim_rate in stream:
            m = _mem(free=False)
            m.pages[0].ewma_rate = m.pages[1].ewma_rate = victim_rate
            link = LinkModel(background_fraction=phi)
            count += decide(NetworkAdaptive(), _fault(rate), m.pages[3], link, m, COST) is Decision.PROMOTE
        return count

    assert promotes(hi) <= promotes(lo)


@given(faults, st.floats(0, 1e4), st.booleans())
def test_static_promotes_exactly_above_cutoff(stream, cutoff, room):
    policy = StaticThreshold(cutoff)
    for rate, _ in stream:
        m = _mem(free=room)
        got = decide(policy, _fault(rate), m.pages[3], LinkModel(), m, COST) is Decision.PROMOTE
        assert got == (rate > cutoff)
