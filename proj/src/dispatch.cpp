#include "dispatchd/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dispatchd {

DemandDistribution::DemandDistribution(std::vector<std::pair<double, double>> scenarios)
    : scenarios_(std::move(scenarios)) {
    if (scenarios_.empty()) {
        throw std::invalid_argument("DemandDistribution: no scenarios");
    }
    std::sort(scenarios_.begin(), scenarios_.end());
    double mass = 0.0;
    for (const auto& [d, p] : scenarios_) {
        if (d < 0.0) throw std::invalid_argument("DemandDistribution: negative demand");
        if (p < 0.0) throw std::invalid_argument("DemandDistribution: negative probability");
        mass += p;
    }
    if (std::abs(mass - 1.0) > 1e-12) {
        throw std::invalid_argument("DemandDistribution: probabilities sum to " + std::to_string(mass));
    }
}

DemandDistribution DemandDistribution::uniform(const std::vector<double>& demands) {
    std::vector<std::pair<double, double>> sc;
    sc.reserve(demands.size());
    const double p = 1.0 / static_cast<double>(demands.size());
    for (double d : demands) sc.emplace_back(d, p);
    return DemandDistribution(std::move(sc));
}

double DemandDistribution::cdf(double x) const {
    double mass = 0.0;
    for (const auto& [d, p] : scenarios_) {
        if (d <= x) mass += p;
        else break;
    }
    return mass;
}

double DemandDistribution::quantile(double q) const {
    double mass = 0.0;
    for (const auto& [d, p] : scenarios_) {
        mass += p;
        if (mass >= q - 1e-15) return d;
    }
    return scenarios_.back().first;
}

double piecewise_cost(double ren_kwh, double demand_kwh, const CostRates& rates) {
    // Two affine branches crossing exactly at ren == demand.
    const double deficit_branch = (rates.c_ren - rates.c_non) * ren_kwh + rates.c_non * demand_kwh;
    const double surplus_branch = (rates.c_ren + rates.c_sto) * ren_kwh - rates.c_sto * demand_kwh;
    return std::max(deficit_branch, surplus_branch);
}

double expected_cost(double ren_kwh, const DemandDistribution& dist, const CostRates& rates) {
    double total = 0.0;
    for (const auto& [d, p] : dist.scenarios()) {
        total += p * piecewise_cost(ren_kwh, d, rates);
    }
    return total;
}

std::pair<double, double> solve_known_demand(double demand_kwh, const CostRates& rates,
                                             double ren_max_kwh) {
    if (demand_kwh < 0.0) throw std::invalid_argument("solve_known_demand: negative demand");
    if (ren_max_kwh < 0.0) throw std::invalid_argument("solve_known_demand: negative capacity");
    const double ren = std::min(demand_kwh, ren_max_kwh);
    return {ren, piecewise_cost(ren, demand_kwh, rates)};
}

double newsvendor_quantile(const DemandDistribution& dist, const CostRates& rates,
                           double ren_max_kwh) {
    if (rates.c_non <= rates.c_ren) {
        // Grid power is no dearer than renewable: committing nothing is optimal.
        return 0.0;
    }
    const double critical = (rates.c_non - rates.c_ren) / (rates.c_non + rates.c_sto);
    const double x = dist.quantile(critical);
    return std::clamp(x, 0.0, ren_max_kwh);
}

Recourse second_stage_recourse(double ren_kwh, double demand_kwh, const CostRates& rates) {
    Recourse r;
    if (demand_kwh > ren_kwh) {
        r.non_kwh = std::min(demand_kwh - ren_kwh, demand_kwh);
    } else {
        r.sto_kwh = ren_kwh - demand_kwh;
    }
    r.objective_usd = rates.c_non * r.non_kwh - rates.c_sto * r.sto_kwh;
    r.accounting_usd = rates.c_non * r.non_kwh + rates.c_sto * r.sto_kwh;
    return r;
}

std::vector<TwoStageSolution> solve_scenario_lp(
    const std::vector<std::vector<DemandDistribution>>& dists_per_bs,
    const CostRates& rates, double ren_max_kwh) {
    if (ren_max_kwh < 0.0) {
        throw std::invalid_argument("solve_scenario_lp: infeasible capacity");
    }
    std::vector<TwoStageSolution> out;
    for (std::size_t bs = 0; bs < dists_per_bs.size(); ++bs) {
        for (std::size_t slot = 0; slot < dists_per_bs[bs].size(); ++slot) {
            const DemandDistribution& dist = dists_per_bs[bs][slot];
            // The objective is convex piecewise-linear in the commitment, so
            // the optimum sits on a breakpoint: a scenario demand or a bound.
            std::vector<double> candidates{0.0, ren_max_kwh};
            for (const auto& [d, p] : dist.scenarios()) {
                if (d <= ren_max_kwh) candidates.push_back(d);
            }
            double best_ren = 0.0;
            double best_cost = expected_cost(0.0, dist, rates);
            for (double c : candidates) {
                const double v = expected_cost(c, dist, rates);
                if (v < best_cost - 1e-15 ||
                    (std::abs(v - best_cost) <= 1e-15 && c < best_ren)) {
                    best_cost = v;
                    best_ren = c;
                }
            }
            TwoStageSolution sol;
            sol.bs_id = static_cast<int>(bs);
            sol.slot = static_cast<int>(slot);
            sol.ren_kwh = best_ren;
            sol.expected_cost = best_cost;
            for (const auto& [d, p] : dist.scenarios()) {
                sol.chi.push_back(piecewise_cost(best_ren, d, rates));
                sol.recourse.push_back(second_stage_recourse(best_ren, d, rates));
            }
            out.push_back(std::move(sol));
        }
    }
    return out;
}

OfflineCost offline_optimal_cost(const StateTable& table, const CostRates& rates,
                                 const std::vector<double>& ren_max_kwh_per_bs) {
    OfflineCost oc;
    oc.per_bs_usd.assign(table.n_bs, 0.0);
    for (int bs = 0; bs < table.n_bs; ++bs) {
        const double cap = ren_max_kwh_per_bs[bs];
        for (int sl = 0; sl < table.n_slots; ++sl) {
            oc.per_bs_usd[bs] += solve_known_demand(table.at(bs, sl).demand_kwh, rates, cap).second;
        }
        oc.total_usd += oc.per_bs_usd[bs];
    }
    return oc;
}

OfflineCost offline_optimal_cost(const StateTable& table, const CostRates& rates,
                                 double ren_max_kwh) {
    return offline_optimal_cost(table, rates,
                                std::vector<double>(table.n_bs, ren_max_kwh));
}

} // namespace dispatchd
