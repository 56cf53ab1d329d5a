#include "dispatchd/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "dispatchd/csv.hpp"

namespace dispatchd {

double decision_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw std::invalid_argument("decision_accuracy: length mismatch");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == truth[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double mae(const std::vector<double>& predicted, const std::vector<double>& actual) {
    if (predicted.size() != actual.size() || predicted.empty()) {
        throw std::invalid_argument("mae: length mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        total += std::abs(predicted[i] - actual[i]);
    }
    return total / static_cast<double>(predicted.size());
}

double explained_variance(const std::vector<double>& predicted,
                          const std::vector<double>& actual) {
    if (predicted.size() != actual.size() || predicted.empty()) {
        throw std::invalid_argument("explained_variance: length mismatch");
    }
    const double n = static_cast<double>(actual.size());
    double mean_y = 0.0, mean_r = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        mean_y += actual[i];
        mean_r += actual[i] - predicted[i];
    }
    mean_y /= n;
    mean_r /= n;
    double var_y = 0.0, var_r = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        var_y += (actual[i] - mean_y) * (actual[i] - mean_y);
        const double r = actual[i] - predicted[i];
        var_r += (r - mean_r) * (r - mean_r);
    }
    if (var_y == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return 1.0 - var_r / var_y;
}

double competitive_ratio(double online_cost_usd, double hindsight_cost_usd) {
    if (hindsight_cost_usd <= 0.0) {
        return online_cost_usd > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    return online_cost_usd / hindsight_cost_usd;
}

LedgerRow ledger_from_amounts(const std::string& method, double non_kwh, double sto_kwh,
                              double ren_kwh, const CostRates& rates, double truth_total_usd) {
    LedgerRow row;
    row.method = method;
    row.non_kwh = non_kwh;
    row.sto_kwh = sto_kwh;
    row.ren_kwh = ren_kwh;
    row.non_cost_usd = non_kwh * rates.c_non;
    row.sto_cost_usd = sto_kwh * rates.c_sto;
    row.ren_cost_usd = ren_kwh * rates.c_ren;
    row.total_cost_usd = row.non_cost_usd + row.sto_cost_usd + row.ren_cost_usd;
    if (truth_total_usd > 0.0) {
        row.pct_vs_truth = (row.total_cost_usd - truth_total_usd) / truth_total_usd * 100.0;
    }
    return row;
}

LedgerRow energy_ledger(const std::string& method, const std::vector<EpisodeRow>& rows,
                        const CostRates& rates, double truth_total_usd) {
    double non = 0.0, sto = 0.0, ren_used = 0.0;
    for (const auto& r : rows) {
        non += r.non_kwh;
        sto += r.sto_kwh;
        ren_used += r.ren_kwh - r.sto_kwh;
    }
    return ledger_from_amounts(method, non, sto, ren_used, rates, truth_total_usd);
}

void write_ledger_csv(const std::string& path, const std::vector<LedgerRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "method,non_kwh,sto_kwh,ren_kwh,non_cost_usd,sto_cost_usd,ren_cost_usd,"
           "total_cost_usd,pct_vs_truth\n";
    char buf[64];
    auto fmt2 = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
    };
    for (const auto& r : rows) {
        out << r.method << ',' << fmt2(r.non_kwh) << ',' << fmt2(r.sto_kwh) << ','
            << fmt2(r.ren_kwh) << ',' << fmt2(r.non_cost_usd) << ',' << fmt2(r.sto_cost_usd)
            << ',' << fmt2(r.ren_cost_usd) << ',' << fmt2(r.total_cost_usd) << ','
            << fmt2(r.pct_vs_truth) << '\n';
    }
}

ProbeResult convergence_probe(int n_agents, long long samples, std::uint64_t seed) {
    if (n_agents < 1 || samples < 1) {
        throw std::invalid_argument("convergence_probe: need n_agents >= 1 and samples >= 1");
    }
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    long long positive = 0;
    for (long long s = 0; s < samples; ++s) {
        int all_one = 1;
        int a0 = 0;
        for (int i = 0; i < n_agents; ++i) {
            const int a = coin(rng) ? 1 : 0;
            if (i == 0) a0 = a;
            all_one &= a;
        }
        const int r = all_one;
        if (r * (2 * a0 - 1) > 0) ++positive;
    }
    ProbeResult res;
    res.n_agents = n_agents;
    res.samples = samples;
    res.empirical = static_cast<double>(positive) / static_cast<double>(samples);
    res.theoretical = std::pow(0.5, n_agents);
    // Binomial standard error at the theoretical rate, so the 3-sigma band
    // stays meaningful even when the empirical count is degenerate.
    res.std_error = std::sqrt(res.theoretical * (1.0 - res.theoretical) /
                              static_cast<double>(samples));
    return res;
}

} // namespace dispatchd
