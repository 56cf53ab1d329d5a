#include "dispatchd/energy_model.hpp"

#include <cmath>
#include <stdexcept>

namespace dispatchd {

double server_utilization(const LoadSnapshot& load, const ServerSpec& spec) {
    if (spec.k_servers < 1) {
        throw std::invalid_argument("server_utilization: need at least one server");
    }
    bool any = false;
    double assigned = 0.0;
    for (std::size_t j = 0; j < load.n_tasks; ++j) {
        for (int k = 0; k < spec.k_servers; ++k) {
            if (load.assignments[j * spec.k_servers + k]) {
                assigned += 1.0;
                any = true;
            }
        }
    }
    if (!any) return 0.0;
    if (load.service_rate <= 0.0) {
        throw std::invalid_argument("server_utilization: service rate must be positive");
    }
    return assigned * load.arrival_rate / (load.service_rate * spec.k_servers);
}

double mec_energy_w(double rho, const ServerSpec& spec) {
    if (rho <= 0.0) return spec.idle_w;
    double f3 = spec.freq_hz * spec.freq_hz * spec.freq_hz;
    double dynamic = 0.0;
    for (int k = 0; k < spec.k_servers; ++k) {
        for (int l = 0; l < spec.cores; ++l) {
            dynamic += spec.switch_cap_farad * rho * f3 * spec.scale(k, l);
        }
    }
    return dynamic + spec.static_w;
}

double downlink_rate_bps(const RadioConfig& radio, double channel_gain, double interference_w) {
    double denom = radio.noise_var_w + interference_w;
    if (denom <= 0.0) {
        throw std::invalid_argument("downlink_rate_bps: noise + interference must be positive");
    }
    return radio.bandwidth_hz * std::log2(1.0 + radio.tx_power_w * channel_gain / denom);
}

double net_energy_j(const RadioConfig& radio,
                    const std::vector<double>& sizes_bits,
                    const std::vector<double>& rates_bps) {
    if (sizes_bits.size() != rates_bps.size()) {
        throw std::invalid_argument("net_energy_j: size/rate length mismatch");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < sizes_bits.size(); ++j) {
        if (rates_bps[j] <= 0.0) {
            throw std::runtime_error("net_energy_j: zero rate with pending data (unreachable demand)");
        }
        total += radio.coeff * radio.tx_power_w * sizes_bits[j] / rates_bps[j] + radio.static_w;
    }
    return total;
}

double total_demand_kwh(double mec_w, double net_j, double slot_hours) {
    return mec_w * slot_hours / 1000.0 + net_j / 3.6e6;
}

double nonrenewable_cost(double demand_kwh, double renewable_kwh, double c_non) {
    return demand_kwh > renewable_kwh ? c_non * (demand_kwh - renewable_kwh) : 0.0;
}

double storage_cost(double demand_kwh, double renewable_kwh, double c_sto) {
    return demand_kwh < renewable_kwh ? c_sto * (renewable_kwh - demand_kwh) : 0.0;
}

double generation_cost(double renewable_kwh, double demand_kwh, const CostRates& rates) {
    if (renewable_kwh < 0.0) {
        throw std::invalid_argument("generation_cost: renewable commitment must be non-negative");
    }
    return rates.c_ren * renewable_kwh +
           nonrenewable_cost(demand_kwh, renewable_kwh, rates.c_non) +
           storage_cost(demand_kwh, renewable_kwh, rates.c_sto);
}

} // namespace dispatchd
