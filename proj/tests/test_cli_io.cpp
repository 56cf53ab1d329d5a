#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "dispatchd/csv.hpp"
#include "dispatchd/trace.hpp"

using namespace dispatchd;
namespace fs = std::filesystem;

TEST_CASE("corrupted state CSV reports the offending line") {
    const std::string p = (fs::temp_directory_path() / "state_bad.csv").string();
    {
        std::ofstream out(p);
        out << "bs_id,slot,demand_kwh,renewable_kwh,storage_cost_usd,nonrenewable_cost_usd\n";
        out << "0,0,0.5,0.1,0,0.04\n";
        out << "0,1,oops,0.1,0,0.04\n";
    }
    try {
        load_state_csv(p);
        FAIL("expected parse_error");
    } catch (const csv::parse_error& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
}

TEST_CASE("state CSV rejects negative energy") {
    const std::string p = (fs::temp_directory_path() / "state_neg.csv").string();
    {
        std::ofstream out(p);
        out << "bs_id,slot,demand_kwh,renewable_kwh,storage_cost_usd,nonrenewable_cost_usd\n";
        out << "0,0,-0.5,0.1,0,0.04\n";
    }
    CHECK_THROWS_AS(load_state_csv(p), csv::parse_error);
}

TEST_CASE("state CSV tolerates sparse coverage by zero-filling") {
    const std::string p = (fs::temp_directory_path() / "state_sparse.csv").string();
    {
        std::ofstream out(p);
        out << "bs_id,slot,demand_kwh,renewable_kwh,storage_cost_usd,nonrenewable_cost_usd\n";
        out << "1,3,0.5,0.1,0,0.04\n";
    }
    StateTable t = load_state_csv(p);
    CHECK(t.n_bs == 2);
    CHECK(t.n_slots == 4);
    CHECK(t.at(0, 0).demand_kwh == 0.0);
    CHECK(t.at(1, 3).demand_kwh == doctest::Approx(0.5));
}
