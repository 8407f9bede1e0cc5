import numpy as np
import pytest
from scipy import stats

from sqdn.errors import ConfigError
from sqdn.params import ModelParams
from sqdn.simulation import (PolicySpec, ScriptedSource, ServerState, SimConfig, compare_policies, occupancy,
                             seed_ladder, simulate)
from sqdn.state import coordinates


def scripted(n, top, initial, source, d=2, policy=PolicySpec()):
    cfg = SimConfig(ModelParams(0.5, d, top), n_servers=n, horizon=10.0, sample_every=1.0,
                    departure_mode="potential-departure", policy=policy, initial=initial)
    return simulate(cfg, source)


def test_hand_trace_three_servers():
    # I = 3, d = 2. Start: s0=(0,2), s1=(1,3), s2=(3,3).
    # 1 arrival, sample {0,1}: s0->(0,0), s1->(1,1); argmin memory is s0 -> (1,1)
    # 2 departure at s1 -> (0,1)
    # 3 arrival, sample {1,2}: s1->(0,0), s2->(3,3); s1 -> (1,1)
    # 4 departure at s0 -> (0,1)
    # 5 arrival, sample {0,0}: s0->(0,0); s0 -> (1,1)
    # 6 departure at s2 -> (2,3)
    # 7 arrival, sample {0,2}: s0->(1,1), s2->(2,2); s0 and s1 tie at memory 1,
    #   both hold (1,1), the picked one becomes (2,2)
    events = [(0.1, True), (0.1, False), (0.1, True), (0.1, False), (0.1, True), (0.1, False), (0.1, True)]
    src = ScriptedSource(events, samples=[[0, 1], [1, 2], [0, 0], [0, 2]], choices=[0], departures=[1, 0, 2])
    res = scripted(3, 3, ((0, 2), (1, 3), (3, 3)), src)
    final = [(s.q, s.m) for s in res.servers]
    assert final[2] == (2, 2)
    assert sorted(final[:2]) == [(1, 1), (2, 2)]
    c = {k: int(v[-1]) for k, v in res.counters.items() if k != "area"}
    assert c["arrivals"] == 4 and c["departures"] == 3
    assert c["blocked"] == 0 and c["idle_assigned"] == 3
    assert src.events == [] and src.samples == [] and src.choices == []
    # the first sample (t=0) is the initial configuration
    assert res.states[0][0] == 0 and res.n_events == 7


def test_blocked_job_caps_memory():
    src = ScriptedSource([(0.5, True), (0.5, True)], samples=[[0], [0]])
    res = scripted(1, 2, ((1, 2),), src, d=1)
    assert (res.servers[0].q, res.servers[0].m) == (2, 2)
    assert int(res.counters["blocked"][-1]) == 1
    assert int(res.counters["arrivals"][-1]) == 2


def test_potential_departure_at_idle_server_is_void():
    src = ScriptedSource([(0.5, False)], departures=[0])
    res = scripted(2, 3, ((0, 0), (1, 1)), src)
    assert [(s.q, s.m) for s in res.servers] == [(0, 0), (1, 1)]
    assert int(res.counters["departures"][-1]) == 0


def test_timer_tiebreak_prefers_oldest_observation():
    # s0 and s1 both sit at memory 0; arrival 1 re-samples s1, so s0 holds the older
    # observation and must win the tie without consuming a tie-break draw
    pol = PolicySpec(tiebreak="oldest-timer")
    src = ScriptedSource([(0.1, True)], samples=[[1]])
    res = scripted(3, 3, ((0, 0), (0, 0), (1, 1)), src, d=1, policy=pol)
    assert [(s.q, s.m) for s in res.servers] == [(1, 1), (0, 0), (1, 1)]
    assert res.servers[1].timer == 0 and res.servers[0].timer == 1


def test_occupancy_examples():
    occ = occupancy([ServerState(0, 1), ServerState(1, 1)], 2, 3)
    assert occ[0, 1] == 0.5 and occ[1, 1] == 0.5 and occ.memory_prefix[0] == 0
    occ = occupancy([ServerState(0, 0), ServerState(0, 0), ServerState(1, 2), ServerState(2, 2)], 4, 3)
    assert occ[0, 0] == 0.5 and occ[1, 2] == 0.25 and occ[2, 2] == 0.25
    assert occ.tail[1] == 0.5
    occ = occupancy([ServerState(0, 0)] * 5, 5, 3)
    assert occ[0, 0] == 1.0


def test_initial_sample_is_idle_with_zero_counters():
    res = simulate(SimConfig(ModelParams(0.45, 2, 10), n_servers=50, horizon=1.0, seed=3))
    assert res.states[0][0] == 1.0
    assert all(v[0] == 0 for k, v in res.counters.items() if k != "initial_jobs")


@pytest.mark.parametrize("pol", [PolicySpec(), PolicySpec(kind="sqd-classic"), PolicySpec(kind="random"),
                                 PolicySpec(kind="jsq"), PolicySpec(replacement="without"),
                                 PolicySpec(order="assign-then-sample"), PolicySpec(tiebreak="oldest-timer")])
@pytest.mark.parametrize("mode", ["per-busy-server", "potential-departure"])
def test_determinism_conservation_and_ranges(pol, mode):
    cfg = SimConfig(ModelParams(0.9, 2, 4), n_servers=60, horizon=8.0, seed=9, policy=pol, departure_mode=mode)
    a, b = simulate(cfg), simulate(cfg)
    np.testing.assert_array_equal(a.states, b.states)
    for k in a.counters:
        np.testing.assert_array_equal(a.counters[k], b.counters[k])
    rows, cols = coordinates(4)
    jobs = np.rint(a.states @ rows * cfg.n_servers)
    c = a.counters
    np.testing.assert_array_equal(c["arrivals"], c["departures"] + c["blocked"] + jobs)
    assert np.all(rows <= cols)
    assert np.allclose(a.states.sum(axis=1), 1.0)
    assert all(0 <= s.q <= s.m <= 4 for s in a.servers) or not pol.has_memory
    assert all(0 <= s.q <= 4 and 0 <= s.m <= 4 for s in a.servers)


def test_memoryless_policies_report_diagonal():
    cfg = SimConfig(ModelParams(0.7, 2, 5), n_servers=40, horizon=5.0, seed=1, policy=PolicySpec(kind="jsq"))
    res = simulate(cfg)
    rows, cols = coordinates(5)
    assert np.all(res.states[:, rows != cols] == 0)


def test_config_rejections():
    p = ModelParams(0.5, 3, 5)
    with pytest.raises(ConfigError):
        SimConfig(p, n_servers=2, policy=PolicySpec(replacement="without"))
    with pytest.raises(ConfigError):
        PolicySpec(kind="sqd-classic", tiebreak="oldest-timer")
    with pytest.raises(ConfigError):
        SimConfig(p, n_servers=2, initial=((2, 1), (0, 0)))
    with pytest.raises(ConfigError):
        SimConfig(p, departure_mode="batch")


def test_departure_modes_agree():
    base = SimConfig(ModelParams(0.45, 2, 10), n_servers=200, horizon=30.0, warmup=10.0)
    ls = {}
    for mode in ("per-busy-server", "potential-departure"):
        cfg = SimConfig(base.params, n_servers=200, horizon=30.0, warmup=10.0, departure_mode=mode)
        ls[mode] = [simulate(cfg.with_seed(1000 + r)).steady["L_S"] for r in range(20)]
    p = stats.ttest_ind(ls["per-busy-server"], ls["potential-departure"], equal_var=False).pvalue
    assert p > 0.01


def test_single_server_policies_coincide():
    cfg = SimConfig(ModelParams(0.5, 1, 6), n_servers=1, horizon=200.0, seed=4)
    a = simulate(cfg)
    b = simulate(cfg.with_policy(PolicySpec(kind="random")))
    np.testing.assert_array_equal(a.mean_queue(), b.mean_queue())


def test_compare_policies_is_paired_and_ordered():
    cfg = SimConfig(ModelParams(0.45, 2, 10), n_servers=100, horizon=20.0, warmup=5.0, seed=50,
                    departure_mode="potential-departure")
    cmp = compare_policies(cfg, [PolicySpec(), PolicySpec(kind="sqd-classic")], 5)
    assert cmp.seeds == seed_ladder(50, 5) == [50, 51, 52, 53, 54]
    assert [r["policy"] for r in cmp.rows] == ["sqdn-memory", "sqd-classic"]
    mean, lo, hi = cmp.paired("sqdn-memory", "sqd-classic")
    assert lo <= mean <= hi
