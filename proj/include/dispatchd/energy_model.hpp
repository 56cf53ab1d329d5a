#pragma once

#include <cstddef>
#include <vector>

namespace dispatchd {

// MEC server bank attached to one base station.
struct ServerSpec {
    int k_servers = 2;              // K
    int cores = 2;                  // L per server
    double freq_hz = 2.5e9;         // f, homogeneous across servers
    double switch_cap_farad = 5e-27; // tau, effective switching capacitance
    // Per-core scaling factor, flattened (server-major, length K*L). Empty
    // means 1.0 everywhere.
    std::vector<double> core_scale;
    double static_w = 100.0;        // active static draw at the evaluated slot
    double idle_w = 450.0;          // draw when no task is resident
    double service_capacity_bps = 200000.0; // u, per-server service capacity

    double scale(int server, int core) const {
        if (core_scale.empty()) return 1.0;
        return core_scale[static_cast<std::size_t>(server) * cores + core];
    }
};

// Downlink radio parameters for one base station.
struct RadioConfig {
    double bandwidth_hz = 180000.0;  // W, one LTE PRB-sized carrier
    double tx_power_w = 0.5;         // P
    double channel_gain = 4.4e-10;   // g, slot-average gain toward served users
    double noise_var_w = 1e-13;      // sigma^2
    double coeff = 2.8;              // delta, transfer-energy coefficient
    double static_w = 2.0;           // per-task static network energy, joules
};

// Per-slot traffic snapshot used by the utilization formula. The arrival
// rate is the reciprocal of the mean task size and the service rate the
// reciprocal of the summed service capacity, implemented exactly as the
// model defines them (the unit inversion is intentional and documented).
struct LoadSnapshot {
    double arrival_rate = 0.0;   // lambda = 1 / mean_size_bits
    double service_rate = 0.0;   // mu = 1 / (K * u)
    // assignments[j*K + k] is 1 when task j runs on server k.
    std::vector<int> assignments;
    std::size_t n_tasks = 0;
    double mean_size_bits = 0.0;
};

// Generation-side unit prices, dollars per kWh.
struct CostRates {
    double c_ren = 0.050;
    double c_non = 0.102;
    double c_sto = 0.055;
};

// Average utilization over the server bank; 0 when nothing is assigned.
double server_utilization(const LoadSnapshot& load, const ServerSpec& spec);

// Instantaneous MEC power draw in watts at utilization rho.
double mec_energy_w(double rho, const ServerSpec& spec);

// Shannon-style downlink rate in bits/s; interference is supplied by the
// caller (sum of cross-BS received powers).
double downlink_rate_bps(const RadioConfig& radio, double channel_gain, double interference_w);

// Network-side energy in joules for a batch of task transfers:
// sum_j (delta * P * S_j / R_j + eta_net_static).
double net_energy_j(const RadioConfig& radio,
                    const std::vector<double>& sizes_bits,
                    const std::vector<double>& rates_bps);

// Converts a slot's MEC power draw plus network joules into kWh.
double total_demand_kwh(double mec_w, double net_j, double slot_hours);

// Cost of grid purchase when demand exceeds renewable supply.
double nonrenewable_cost(double demand_kwh, double renewable_kwh, double c_non);

// Cost of storing the surplus when renewable supply exceeds demand.
double storage_cost(double demand_kwh, double renewable_kwh, double c_sto);

// Total per-slot generation cost for committing `renewable_kwh`:
// c_ren*ren + c_non*[d-ren]+ + c_sto*[ren-d]+.
double generation_cost(double renewable_kwh, double demand_kwh, const CostRates& rates);

} // namespace dispatchd
