#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "dispatchd/metrics.hpp"

using namespace dispatchd;

TEST_CASE("decision accuracy") {
    CHECK(decision_accuracy({1, 0, 1}, {1, 0, 1}) == doctest::Approx(1.0));
    CHECK(decision_accuracy({1, 0, 1}, {0, 1, 0}) == doctest::Approx(0.0));
    CHECK(decision_accuracy({1, 0}, {1, 1}) == doctest::Approx(0.5));
    CHECK_THROWS(decision_accuracy({1}, {1, 0}));
}

TEST_CASE("mean absolute error") {
    CHECK(mae({1.0, 2.0}, {1.0, 2.0}) == doctest::Approx(0.0));
    CHECK(mae({3.0, 4.0}, {1.0, 2.0}) == doctest::Approx(2.0));
}

TEST_CASE("explained variance") {
    std::vector<double> y{1.0, 2.0, 3.0, 4.0};
    CHECK(explained_variance(y, y) == doctest::Approx(1.0));
    std::vector<double> mean(y.size(), 2.5);
    CHECK(explained_variance(mean, y) == doctest::Approx(0.0));
    std::vector<double> shifted{2.0, 3.0, 4.0, 5.0};
    CHECK(explained_variance(shifted, y) == doctest::Approx(1.0));
    std::vector<double> flat{3.0, 3.0, 3.0};
    CHECK(std::isnan(explained_variance(flat, flat)));
}

TEST_CASE("competitive ratio") {
    CHECK(competitive_ratio(10.0, 10.0) == doctest::Approx(1.0));
    CHECK(competitive_ratio(15.0, 10.0) == doctest::Approx(1.5));
    CHECK(competitive_ratio(9.0, 10.0) < 1.0);  // would flag a hindsight violation upstream
    CHECK(std::isinf(competitive_ratio(1.0, 0.0)));
    CHECK(competitive_ratio(0.0, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("ledger rows from amounts and from episode logs") {
    CostRates rates;
    LedgerRow row = ledger_from_amounts("X", 10.0, 2.0, 8.0, rates, 1.0);
    CHECK(row.non_cost_usd == doctest::Approx(1.02));
    CHECK(row.sto_cost_usd == doctest::Approx(0.11));
    CHECK(row.ren_cost_usd == doctest::Approx(0.40));
    CHECK(row.total_cost_usd == doctest::Approx(1.53));
    CHECK(row.pct_vs_truth == doctest::Approx(53.0));

    LedgerRow zero = energy_ledger("Z", {}, rates, 0.0);
    CHECK(zero.total_cost_usd == doctest::Approx(0.0));
    CHECK(zero.non_kwh == 0.0);

    EpisodeRow er;
    er.ren_kwh = 1.0;
    er.sto_kwh = 0.25;
    er.non_kwh = 0.5;
    LedgerRow one = energy_ledger("Y", {er}, rates, 0.0);
    CHECK(one.ren_kwh == doctest::Approx(0.75));  // stored surplus is not consumed
    CHECK(one.non_kwh == doctest::Approx(0.5));
}

TEST_CASE("ledger CSV uses two-decimal money formatting") {
    namespace fs = std::filesystem;
    CostRates rates;
    const std::string p = (fs::temp_directory_path() / "ledger.csv").string();
    write_ledger_csv(p, {ledger_from_amounts("GroundTruth", 30.15, 8.87, 8.67, rates, 0.0)});
    std::ifstream in(p);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header ==
          "method,non_kwh,sto_kwh,ren_kwh,non_cost_usd,sto_cost_usd,ren_cost_usd,"
          "total_cost_usd,pct_vs_truth");
    CHECK(row.find("GroundTruth,30.15,8.87,8.67,3.08,0.49,0.43,") == 0);
}

TEST_CASE("alignment probe tracks the joint-coincidence probability") {
    ProbeResult r = convergence_probe(3, 100000, 11);
    CHECK(r.theoretical == doctest::Approx(0.125));
    CHECK(std::abs(r.empirical - r.theoretical) <= 3.0 * r.std_error);

    double prev = 1.0;
    for (int b = 1; b <= 4; ++b) {
        ProbeResult p = convergence_probe(b, 50000, 7 + b);
        CHECK(p.theoretical < prev);
        prev = p.theoretical;
    }
    CHECK_THROWS(convergence_probe(0, 10, 1));
}
