#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dispatchd/energy_model.hpp"
#include "dispatchd/mamrl.hpp"

namespace dispatchd {

struct LedgerRow {
    std::string method;
    double non_kwh = 0.0;
    double sto_kwh = 0.0;
    double ren_kwh = 0.0;
    double non_cost_usd = 0.0;
    double sto_cost_usd = 0.0;
    double ren_cost_usd = 0.0;
    double total_cost_usd = 0.0;
    double pct_vs_truth = 0.0;  // (total - truth_total) / truth_total * 100
};

struct ProbeResult {
    int n_agents = 0;
    long long samples = 0;
    double empirical = 0.0;    // fraction of positive per-sample estimators
    double theoretical = 0.0;  // (0.5)^n_agents
    double std_error = 0.0;
};

double decision_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

double mae(const std::vector<double>& predicted, const std::vector<double>& actual);

// 1 - Var(y - yhat) / Var(y); NaN sentinel when Var(y) == 0.
double explained_variance(const std::vector<double>& predicted,
                          const std::vector<double>& actual);

double competitive_ratio(double online_cost_usd, double hindsight_cost_usd);

// Ledger row from category kWh totals at the given rates.
LedgerRow ledger_from_amounts(const std::string& method, double non_kwh, double sto_kwh,
                              double ren_kwh, const CostRates& rates, double truth_total_usd);

// Ledger row from an episode log's dispatch columns (renewable used =
// committed generation minus stored surplus).
LedgerRow energy_ledger(const std::string& method, const std::vector<EpisodeRow>& rows,
                        const CostRates& rates, double truth_total_usd);

void write_ledger_csv(const std::string& path, const std::vector<LedgerRow>& rows);

// Monte Carlo gradient-alignment probe: independent uniform binary actions,
// joint reward 1 iff every agent picks action 1; a sample's estimator is
// r*(2a_i - 1), positive exactly when all agents align.
ProbeResult convergence_probe(int n_agents, long long samples, std::uint64_t seed);

} // namespace dispatchd
