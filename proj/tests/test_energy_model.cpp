#include <cmath>
#include <random>

#include "doctest.h"

#include "dispatchd/energy_model.hpp"

using namespace dispatchd;

TEST_CASE("server utilization: one task on one server") {
    ServerSpec spec;
    spec.k_servers = 2;
    LoadSnapshot load;
    load.n_tasks = 1;
    load.arrival_rate = 100.0;
    load.service_rate = 50.0;
    load.assignments = {1, 0};
    CHECK(server_utilization(load, spec) == doctest::Approx(1.0));
}

TEST_CASE("server utilization: two tasks on a single server bank") {
    ServerSpec spec;
    spec.k_servers = 1;
    LoadSnapshot load;
    load.n_tasks = 2;
    load.arrival_rate = 10.0;
    load.service_rate = 100.0;
    load.assignments = {1, 1};
    CHECK(server_utilization(load, spec) == doctest::Approx(0.2));
}

TEST_CASE("server utilization: nothing assigned means zero load") {
    ServerSpec spec;
    LoadSnapshot load;
    load.n_tasks = 2;
    load.arrival_rate = 10.0;
    load.service_rate = 100.0;
    load.assignments = {0, 0, 0, 0};
    CHECK(server_utilization(load, spec) == 0.0);
}

TEST_CASE("mec power: dynamic cube-law term plus static draw") {
    ServerSpec spec;
    spec.k_servers = 1;
    spec.cores = 1;
    spec.switch_cap_farad = 5e-27;
    spec.freq_hz = 2.5e9;
    spec.static_w = 10.0;
    CHECK(mec_energy_w(0.5, spec) == doctest::Approx(49.0625));

    // Doubling the per-core scale factor doubles the dynamic term only.
    ServerSpec doubled = spec;
    doubled.core_scale = {2.0};
    CHECK(mec_energy_w(0.5, doubled) == doctest::Approx(2.0 * 39.0625 + 10.0));
}

TEST_CASE("mec power: idle draw when no load") {
    ServerSpec spec;
    spec.idle_w = 450.0;
    CHECK(mec_energy_w(0.0, spec) == doctest::Approx(450.0));
}

TEST_CASE("downlink rate: unit SNR gives one bit per hertz") {
    RadioConfig radio;
    radio.bandwidth_hz = 180000.0;
    radio.tx_power_w = 0.5;
    radio.noise_var_w = 1e-13;
    // P*g == sigma^2 with no interference -> log2(2) = 1.
    CHECK(downlink_rate_bps(radio, 2e-13, 0.0) == doctest::Approx(180000.0));
    CHECK(downlink_rate_bps(radio, 0.0, 0.0) == doctest::Approx(0.0));
    radio.bandwidth_hz *= 2.0;
    CHECK(downlink_rate_bps(radio, 2e-13, 0.0) == doctest::Approx(360000.0));
}

TEST_CASE("network transfer energy") {
    RadioConfig radio;
    radio.coeff = 2.8;
    radio.tx_power_w = 0.5;
    radio.static_w = 1.0;
    CHECK(net_energy_j(radio, {1e6}, {1e6}) == doctest::Approx(2.4));
    CHECK(net_energy_j(radio, {}, {}) == doctest::Approx(0.0));
    CHECK(net_energy_j(radio, {1e6, 1e6}, {1e6, 1e6}) == doctest::Approx(4.8));
    CHECK_THROWS(net_energy_j(radio, {1e6}, {0.0}));
}

TEST_CASE("demand conversion to kWh") {
    CHECK(total_demand_kwh(0.0, 0.0, 0.25) == doctest::Approx(0.0));
    CHECK(total_demand_kwh(1000.0, 0.0, 0.25) == doctest::Approx(0.25));
    CHECK(total_demand_kwh(0.0, 3.6e6, 0.25) == doctest::Approx(1.0));
}

TEST_CASE("grid purchase cost on deficit") {
    CHECK(nonrenewable_cost(10.0, 4.0, 0.102) == doctest::Approx(0.612));
    CHECK(nonrenewable_cost(10.0, 10.0, 0.102) == doctest::Approx(0.0));
    CHECK(nonrenewable_cost(10.0, 12.0, 0.102) == doctest::Approx(0.0));
}

TEST_CASE("storage cost on surplus") {
    CHECK(storage_cost(10.0, 12.0, 0.055) == doctest::Approx(0.11));
    CHECK(storage_cost(10.0, 10.0, 0.055) == doctest::Approx(0.0));
    CHECK(storage_cost(10.0, 4.0, 0.055) == doctest::Approx(0.0));
}

TEST_CASE("total generation cost") {
    CostRates rates;
    CHECK(generation_cost(12.0, 10.0, rates) == doctest::Approx(0.71));
    CHECK(generation_cost(0.0, 10.0, rates) == doctest::Approx(1.02));
    CHECK(generation_cost(7.0, 7.0, rates) == doctest::Approx(rates.c_ren * 7.0));
    CHECK_THROWS(generation_cost(-1.0, 10.0, rates));
}
