import math

import pytest

import dispatchd as dd


def make_day(n_bs=2, seed=7, cfg=None):
    cfg = cfg or dd.Config()
    tasks, solar = dd.synth_trace(n_bs, 1, seed, cfg)
    table = dd.build_state_space(tasks, solar, n_bs + 1, dd.SLOTS_PER_DAY, cfg)
    counts = dd.task_counts(tasks, n_bs + 1, dd.SLOTS_PER_DAY)
    return table, counts


def test_cost_identity():
    rates = dd.CostRates(0.050, 0.102, 0.055)
    for ren, dem in [(0.0, 0.0), (0.3, 0.8), (0.9, 0.2), (0.5, 0.5)]:
        assert dd.piecewise_cost(ren, dem, rates) == pytest.approx(
            dd.generation_cost(ren, dem, rates), abs=1e-15
        )


def test_newsvendor_matches_quantile():
    rates = dd.CostRates(0.050, 0.102, 0.055)
    dist = dd.DemandDistribution.uniform([0.1, 0.4, 0.7, 1.0])
    q = (rates.c_non - rates.c_ren) / (rates.c_non + rates.c_sto)
    assert dd.newsvendor_quantile(dist, rates, 1.36) == pytest.approx(dist.quantile(q))


def test_synth_trace_deterministic():
    cfg = dd.Config()
    t1, s1 = dd.synth_trace(2, 1, 42, cfg)
    t2, s2 = dd.synth_trace(2, 1, 42, cfg)
    assert [(e.bs_id, e.slot, e.size_bytes) for e in t1] == [
        (e.bs_id, e.slot, e.size_bytes) for e in t2
    ]
    assert [x.generation_kwh for x in s1] == [x.generation_kwh for x in s2]


def test_train_and_evaluate_roundtrip():
    table, counts = make_day(n_bs=2, seed=7)
    rates = dd.CostRates(0.050, 0.102, 0.055)
    tc = dd.TrainConfig()
    tc.episodes = 5
    tc.seed = 3
    tc.step_cap = 1
    res = dd.train(table, counts, rates, tc)
    assert len(res.episode_rewards) == 5
    assert res.total_observations == res.total_packets > 0
    ev = dd.evaluate(res, counts, table, rates, tc.step_cap)
    assert len(ev.actions) == table.n_bs * table.n_slots
    assert 0.0 <= ev.accuracy <= 1.0
    assert ev.total_billed_usd > 0.0


def test_baselines_and_hindsight():
    table, _ = make_day(n_bs=2, seed=11)
    rates = dd.CostRates(0.050, 0.102, 0.055)
    ucb = dd.ucb_greedy(table, rates)
    off = dd.offline_optimal_cost(table, rates, 1.36)
    assert ucb.billed_usd > 0.0
    assert off.total_usd <= ucb.billed_usd + 1e-9
    ratio = dd.competitive_ratio(ucb.billed_usd, off.total_usd)
    assert ratio >= 1.0
    grid = dd.no_renewable(table, rates)
    assert grid.ren_kwh == 0.0


def test_probe_scaling():
    p2 = dd.convergence_probe(2, 20000, 5)
    p4 = dd.convergence_probe(4, 20000, 5)
    assert p2.theoretical == pytest.approx(0.25)
    assert p4.theoretical == pytest.approx(0.0625)
    assert p2.empirical > p4.empirical
    assert abs(p2.empirical - p2.theoretical) < 3 * p2.std_error + 1e-9


def test_metrics_helpers():
    assert dd.decision_accuracy([1, 0, 1, 1], [1, 0, 0, 1]) == pytest.approx(0.75)
    assert dd.mae([1.0, 2.0], [1.5, 1.0]) == pytest.approx(0.75)
    assert math.isclose(dd.explained_variance([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]), 1.0)
