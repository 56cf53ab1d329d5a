#pragma once

#include <utility>
#include <vector>

#include "dispatchd/energy_model.hpp"
#include "dispatchd/trace.hpp"

namespace dispatchd {

// Empirical demand distribution for one (bs, slot): scenario values with
// probabilities, kept sorted by demand so the CDF is a step function.
class DemandDistribution {
public:
    DemandDistribution() = default;
    explicit DemandDistribution(std::vector<std::pair<double, double>> scenarios);

    static DemandDistribution uniform(const std::vector<double>& demands);

    const std::vector<std::pair<double, double>>& scenarios() const { return scenarios_; }

    // Right-continuous step CDF H(x) = P(demand <= x).
    double cdf(double x) const;

    // Smallest support point x with H(x) >= q.
    double quantile(double q) const;

private:
    std::vector<std::pair<double, double>> scenarios_;  // (demand_kwh, probability)
};

struct Recourse {
    double non_kwh = 0.0;
    double sto_kwh = 0.0;
    // Second-stage objective as written in the recourse program
    // (c_non*non - c_sto*sto)...
    double objective_usd = 0.0;
    // ...and the additive accounting used by the ledger (c_non*non + c_sto*sto).
    double accounting_usd = 0.0;
};

struct TwoStageSolution {
    int bs_id = 0;
    int slot = 0;
    double ren_kwh = 0.0;        // first-stage commitment
    double expected_cost = 0.0;  // epigraph value at the optimum
    std::vector<double> chi;     // per-scenario piecewise cost
    std::vector<Recourse> recourse;
};

// Max-of-two-affine-branches form of the per-slot cost; algebraically equal
// to generation_cost for all inputs.
double piecewise_cost(double ren_kwh, double demand_kwh, const CostRates& rates);

// Expectation of piecewise_cost over the demand scenarios.
double expected_cost(double ren_kwh, const DemandDistribution& dist, const CostRates& rates);

// Degenerate (known demand) program: commit min(d, ren_max).
std::pair<double, double> solve_known_demand(double demand_kwh, const CostRates& rates,
                                             double ren_max_kwh);

// Closed-form first-stage solution: the critical-ratio quantile
// (c_non - c_ren)/(c_non + c_sto) of the demand CDF, clipped to capacity.
double newsvendor_quantile(const DemandDistribution& dist, const CostRates& rates,
                           double ren_max_kwh);

// Deterministic-equivalent solve for a batch of per-(bs, slot) distributions.
// The program is separable, so each cell is solved exactly at a breakpoint
// of its convex piecewise-linear objective.
std::vector<TwoStageSolution> solve_scenario_lp(
    const std::vector<std::vector<DemandDistribution>>& dists_per_bs,
    const CostRates& rates, double ren_max_kwh);

// Splits a realized imbalance into purchase/storage quantities.
Recourse second_stage_recourse(double ren_kwh, double demand_kwh, const CostRates& rates);

// Hindsight optimum over a realized state table: per-slot solve_known_demand
// with the realized demand. Returns per-BS totals plus the grand total.
struct OfflineCost {
    std::vector<double> per_bs_usd;
    double total_usd = 0.0;
};
OfflineCost offline_optimal_cost(const StateTable& table, const CostRates& rates,
                                 const std::vector<double>& ren_max_kwh_per_bs);
OfflineCost offline_optimal_cost(const StateTable& table, const CostRates& rates,
                                 double ren_max_kwh);

} // namespace dispatchd
