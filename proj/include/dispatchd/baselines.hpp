#pragma once

#include <string>
#include <vector>

#include "dispatchd/dispatch.hpp"
#include "dispatchd/mamrl.hpp"
#include "dispatchd/trace.hpp"

namespace dispatchd {

// Two-arm UCB1 bandit state for one base station.
struct BanditState {
    std::vector<long long> pulls;
    std::vector<double> mean_reward;
    long long total = 0;
    double c = 1.4142135623730951;  // sqrt(2), standard UCB1

    explicit BanditState(int n_arms = 2) : pulls(n_arms, 0), mean_reward(n_arms, 0.0) {}

    // Arm choice: unexplored arms first (lowest index), then the UCB score.
    int select() const;
    void update(int arm, double reward);
};

struct Bin {
    double capacity_kwh = 0.0;
    double fill_kwh = 0.0;
};

enum class PackHeuristic { next_fit, first_fit, first_fit_decreasing };

struct PackResult {
    double packed_kwh = 0.0;    // renewable-served energy
    double residual_kwh = 0.0;  // unpacked items, billed to non-renewable
    std::vector<Bin> bins;
};

// Packs per-task energy items into equal bins carved from the slot's
// renewable budget (one bin per item, capacity = budget / n_items).
PackResult pack_slot(const std::vector<double>& item_kwh, double budget_kwh,
                     PackHeuristic heuristic);

// Uniform result row shared by every comparison policy.
struct MethodRun {
    std::string method;
    double billed_usd = 0.0;
    double ren_kwh = 0.0;
    double non_kwh = 0.0;
    double sto_kwh = 0.0;
    double accuracy = -1.0;  // -1 when the method has no binary decision
    std::vector<int> actions;  // bs-major when applicable
};

// Online UCB-greedy dispatch over one day.
MethodRun ucb_greedy(const StateTable& day, const CostRates& rates);

// Bin-packing dispatch over one day; needs the raw task events to build the
// per-task energy items.
MethodRun packing_baseline(PackHeuristic heuristic, const StateTable& day,
                           const std::vector<TaskEvent>& day_tasks, const Config& cfg,
                           const CostRates& rates);

// Single-agent centralized A2C: one network over the concatenated
// (B+1)-station state, emitting an independent binary policy per station.
MethodRun a2c_centralized(const StateTable& train_day, const StateTable& test_day,
                          const CostRates& rates, const TrainConfig& cfg);

// Multi-agent centralized-critic A3C: per-station actors, one critic fed the
// joint state plus every actor's policy summary.
MethodRun a3c_multiagent(const StateTable& train_day, const StateTable& test_day,
                         const CostRates& rates, const TrainConfig& cfg);

// Everything bought from the grid.
MethodRun no_renewable(const StateTable& day, const CostRates& rates);

} // namespace dispatchd
