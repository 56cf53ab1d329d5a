#include <cmath>

#include "doctest.h"

#include "dispatchd/baselines.hpp"

using namespace dispatchd;

namespace {

StateTable constant_table(int n_bs, double demand, double ren) {
    StateTable t;
    t.n_bs = n_bs;
    t.n_slots = kSlotsPerDay;
    t.records.resize(static_cast<std::size_t>(n_bs) * kSlotsPerDay);
    for (int bs = 0; bs < n_bs; ++bs) {
        for (int sl = 0; sl < kSlotsPerDay; ++sl) {
            auto& r = t.at(bs, sl);
            r.bs_id = bs;
            r.slot = sl;
            r.demand_kwh = demand;
            r.renewable_kwh = ren;
        }
    }
    return t;
}

} // namespace

TEST_CASE("bandit explores each arm before exploiting") {
    BanditState b(2);
    const int first = b.select();
    CHECK(first == 0);
    b.update(first, 0.0);
    CHECK(b.select() == 1);
    b.update(1, 1.0);
    // Both explored; the rewarded arm dominates from here.
    CHECK(b.select() == 1);
}

TEST_CASE("bandit converges on a dominant arm") {
    BanditState b(2);
    for (int i = 0; i < 200; ++i) {
        const int arm = b.select();
        b.update(arm, arm == kActionStore ? 1.0 : 0.0);
    }
    int store_picks = 0;
    for (int i = 0; i < 100; ++i) {
        const int arm = b.select();
        b.update(arm, arm == kActionStore ? 1.0 : 0.0);
        if (arm == kActionStore) ++store_picks;
    }
    CHECK(store_picks > 90);
}

TEST_CASE("ucb dispatch learns an always-surplus day") {
    StateTable day = constant_table(1, 0.2, 0.9);
    MethodRun run = ucb_greedy(day, CostRates{});
    CHECK(run.accuracy > 0.9);  // only the forced exploration slot misses
    CHECK(run.method == "UCB");
}

TEST_CASE("packing: everything fits") {
    PackResult r = pack_slot({1.0, 2.0}, 30.0, PackHeuristic::first_fit);
    CHECK(r.packed_kwh == doctest::Approx(3.0));
    CHECK(r.residual_kwh == doctest::Approx(0.0));
}

TEST_CASE("packing: classic three-item instance") {
    // Items {6,5,4} with three bins of 10 (budget 30): first-fit-decreasing
    // groups {6,4} and {5}; next-fit keeps {6} then {5,4}. Both pack fully,
    // and the decreasing variant never leaves a larger residual.
    PackResult ffd = pack_slot({6.0, 5.0, 4.0}, 30.0, PackHeuristic::first_fit_decreasing);
    PackResult nf = pack_slot({6.0, 5.0, 4.0}, 30.0, PackHeuristic::next_fit);
    CHECK(ffd.residual_kwh == doctest::Approx(0.0));
    CHECK(nf.residual_kwh == doctest::Approx(0.0));
    CHECK(ffd.residual_kwh <= nf.residual_kwh + 1e-12);
    REQUIRE(ffd.bins.size() == 3);
    CHECK(ffd.bins[0].fill_kwh == doctest::Approx(10.0));
    CHECK(ffd.bins[1].fill_kwh == doctest::Approx(5.0));
}

TEST_CASE("packing: oversized items become residual") {
    // Two 6 kWh items against 10 kWh of budget: bins of 5 fit neither.
    PackResult r = pack_slot({6.0, 6.0}, 10.0, PackHeuristic::next_fit);
    CHECK(r.packed_kwh == doctest::Approx(0.0));
    CHECK(r.residual_kwh == doctest::Approx(12.0));
}

TEST_CASE("packing: empty slot") {
    PackResult r = pack_slot({}, 10.0, PackHeuristic::first_fit);
    CHECK(r.packed_kwh == 0.0);
    CHECK(r.residual_kwh == 0.0);
    CHECK(r.bins.empty());
}

TEST_CASE("packing baseline over a day produces a consistent ledger") {
    Config cfg;
    StateTable day = constant_table(1, 0.3, 0.5);
    std::vector<TaskEvent> tasks;
    for (int t = 30; t < 40; ++t) {
        tasks.push_back({0, t, 500000});
        tasks.push_back({0, t, 800000});
    }
    for (auto h : {PackHeuristic::next_fit, PackHeuristic::first_fit,
                   PackHeuristic::first_fit_decreasing}) {
        MethodRun run = packing_baseline(h, day, tasks, cfg, CostRates{});
        CHECK(run.billed_usd > 0.0);
        CHECK(run.ren_kwh >= 0.0);
        CHECK(run.non_kwh >= 0.0);
    }
}

TEST_CASE("grid-only dispatch") {
    CostRates rates;
    StateTable zero = constant_table(2, 0.0, 0.4);
    CHECK(no_renewable(zero, rates).billed_usd == doctest::Approx(0.0));

    StateTable day = constant_table(2, 0.5, 0.4);
    MethodRun grid = no_renewable(day, rates);
    CHECK(grid.billed_usd == doctest::Approx(rates.c_non * 0.5 * 2 * kSlotsPerDay));
    // Grid-only is never cheaper on the purchase column than a policy that
    // uses some renewable energy.
    MethodRun ucb = ucb_greedy(day, rates);
    CHECK(grid.non_kwh >= ucb.non_kwh - 1e-12);
}

TEST_CASE("centralized single-agent learner runs end to end") {
    StateTable day = constant_table(2, 0.4, 0.7);
    TrainConfig cfg;
    cfg.episodes = 15;
    cfg.lstm_units = 8;
    cfg.seed = 5;
    MethodRun run = a2c_centralized(day, day, CostRates{}, cfg);
    CHECK(run.method == "A2C");
    CHECK(run.actions.size() == static_cast<std::size_t>(2 * kSlotsPerDay));
    CHECK(run.accuracy >= 0.0);
    CHECK(run.accuracy <= 1.0);
    CHECK(run.billed_usd > 0.0);
}

TEST_CASE("multi-agent learner runs end to end, including the single-station case") {
    TrainConfig cfg;
    cfg.episodes = 15;
    cfg.lstm_units = 8;
    cfg.seed = 5;
    for (int n_bs : {1, 3}) {
        StateTable day = constant_table(n_bs, 0.4, 0.7);
        MethodRun run = a3c_multiagent(day, day, CostRates{}, cfg);
        CHECK(run.method == "A3C");
        CHECK(run.actions.size() == static_cast<std::size_t>(n_bs * kSlotsPerDay));
        CHECK(run.billed_usd > 0.0);
    }
}
