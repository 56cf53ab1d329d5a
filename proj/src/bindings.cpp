#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dispatchd/baselines.hpp"
#include "dispatchd/config.hpp"
#include "dispatchd/dispatch.hpp"
#include "dispatchd/energy_model.hpp"
#include "dispatchd/mamrl.hpp"
#include "dispatchd/metrics.hpp"
#include "dispatchd/trace.hpp"

namespace py = pybind11;
using namespace dispatchd;

PYBIND11_MODULE(_dispatchd, m) {
    m.doc() = "Energy-dispatch simulator core";

    m.attr("SLOTS_PER_DAY") = kSlotsPerDay;
    m.attr("SLOT_HOURS") = kSlotHours;
    m.attr("ACTION_NON_RENEWABLE") = kActionNonRenewable;
    m.attr("ACTION_STORE") = kActionStore;

    py::register_exception<numeric_error>(m, "NumericError");

    // ---- config -----------------------------------------------------------
    py::class_<Config>(m, "Config")
        .def(py::init<>())
        .def_static("load", &Config::load, py::arg("path"))
        .def_static("parse", &Config::parse, py::arg("text"), py::arg("origin") = "<inline>")
        .def("set", &Config::set)
        .def("has", &Config::has)
        .def("get_str", &Config::get_str)
        .def("get_double", &Config::get_double)
        .def("get_int", &Config::get_int)
        .def("merge_from", &Config::merge_from)
        .def("dump", &Config::dump);

    py::class_<CostRates>(m, "CostRates")
        .def(py::init<>())
        .def(py::init([](double c_ren, double c_non, double c_sto) {
                 return CostRates{c_ren, c_non, c_sto};
             }),
             py::arg("c_ren"), py::arg("c_non"), py::arg("c_sto"))
        .def_readwrite("c_ren", &CostRates::c_ren)
        .def_readwrite("c_non", &CostRates::c_non)
        .def_readwrite("c_sto", &CostRates::c_sto);

    m.def("resolve_cost_rates", &resolve_cost_rates);

    // ---- energy model -----------------------------------------------------
    m.def("generation_cost", &generation_cost, py::arg("renewable_kwh"), py::arg("demand_kwh"),
          py::arg("rates"));
    m.def("nonrenewable_cost", &nonrenewable_cost);
    m.def("storage_cost", &storage_cost);
    m.def("total_demand_kwh", &total_demand_kwh);

    // ---- traces / state space ---------------------------------------------
    py::class_<TaskEvent>(m, "TaskEvent")
        .def(py::init<>())
        .def_readwrite("bs_id", &TaskEvent::bs_id)
        .def_readwrite("slot", &TaskEvent::slot)
        .def_readwrite("size_bytes", &TaskEvent::size_bytes);

    py::class_<SolarSample>(m, "SolarSample")
        .def(py::init<>())
        .def_readwrite("bs_id", &SolarSample::bs_id)
        .def_readwrite("slot", &SolarSample::slot)
        .def_readwrite("generation_kwh", &SolarSample::generation_kwh);

    py::class_<SlotRecord>(m, "SlotRecord")
        .def(py::init<>())
        .def_readwrite("bs_id", &SlotRecord::bs_id)
        .def_readwrite("slot", &SlotRecord::slot)
        .def_readwrite("demand_kwh", &SlotRecord::demand_kwh)
        .def_readwrite("renewable_kwh", &SlotRecord::renewable_kwh)
        .def_readwrite("storage_cost_usd", &SlotRecord::storage_cost_usd)
        .def_readwrite("nonrenewable_cost_usd", &SlotRecord::nonrenewable_cost_usd);

    py::class_<StateTable>(m, "StateTable")
        .def(py::init<>())
        .def_readonly("n_bs", &StateTable::n_bs)
        .def_readonly("n_slots", &StateTable::n_slots)
        .def("n_days", &StateTable::n_days)
        .def("at",
             [](const StateTable& t, int bs, int slot) {
                 if (bs < 0 || bs >= t.n_bs || slot < 0 || slot >= t.n_slots)
                     throw py::index_error("(bs, slot) out of range");
                 return t.at(bs, slot);
             })
        .def_readonly("records", &StateTable::records);

    m.def("synth_trace", &synth_trace, py::arg("n_sbs"), py::arg("n_days"), py::arg("seed"),
          py::arg("profile"));
    m.def("build_state_space", &build_state_space, py::arg("tasks"), py::arg("solar"),
          py::arg("n_bs"), py::arg("n_slots"), py::arg("cfg"));
    m.def("task_counts", &task_counts);
    m.def("slice_day", &slice_day);
    m.def("diurnal_shape", &diurnal_shape);
    m.def("load_state_csv", &load_state_csv);
    m.def("write_state_csv", &write_state_csv);
    m.def("load_task_trace", &load_task_trace);
    m.def("load_solar_trace", &load_solar_trace);
    m.def("write_task_trace", &write_task_trace);
    m.def("write_solar_trace", &write_solar_trace);

    py::enum_<Regime>(m, "Regime")
        .value("deterministic", Regime::deterministic)
        .value("asymmetric", Regime::asymmetric)
        .value("stochastic", Regime::stochastic);

    py::class_<RegimeSpec>(m, "RegimeSpec")
        .def(py::init<>())
        .def_readwrite("kind", &RegimeSpec::kind)
        .def_readwrite("train_day", &RegimeSpec::train_day)
        .def_readwrite("test_day", &RegimeSpec::test_day);

    m.def("parse_regime", &parse_regime);
    m.def("regime_name", &regime_name);
    m.def("split_regime", &split_regime);

    // ---- two-stage program ------------------------------------------------
    py::class_<DemandDistribution>(m, "DemandDistribution")
        .def(py::init<std::vector<std::pair<double, double>>>(), py::arg("scenarios"))
        .def_static("uniform", &DemandDistribution::uniform)
        .def("cdf", &DemandDistribution::cdf)
        .def("quantile", &DemandDistribution::quantile)
        .def("scenarios", &DemandDistribution::scenarios);

    py::class_<Recourse>(m, "Recourse")
        .def_readonly("non_kwh", &Recourse::non_kwh)
        .def_readonly("sto_kwh", &Recourse::sto_kwh)
        .def_readonly("objective_usd", &Recourse::objective_usd)
        .def_readonly("accounting_usd", &Recourse::accounting_usd);

    py::class_<TwoStageSolution>(m, "TwoStageSolution")
        .def_readonly("bs_id", &TwoStageSolution::bs_id)
        .def_readonly("slot", &TwoStageSolution::slot)
        .def_readonly("ren_kwh", &TwoStageSolution::ren_kwh)
        .def_readonly("expected_cost", &TwoStageSolution::expected_cost)
        .def_readonly("chi", &TwoStageSolution::chi)
        .def_readonly("recourse", &TwoStageSolution::recourse);

    m.def("piecewise_cost", &piecewise_cost);
    m.def("expected_cost", &expected_cost);
    m.def("solve_known_demand", &solve_known_demand);
    m.def("newsvendor_quantile", &newsvendor_quantile);
    m.def("solve_scenario_lp", &solve_scenario_lp);
    m.def("second_stage_recourse", &second_stage_recourse);

    py::class_<OfflineCost>(m, "OfflineCost")
        .def_readonly("per_bs_usd", &OfflineCost::per_bs_usd)
        .def_readonly("total_usd", &OfflineCost::total_usd);
    m.def("offline_optimal_cost",
          py::overload_cast<const StateTable&, const CostRates&, double>(&offline_optimal_cost));

    // ---- learning ---------------------------------------------------------
    m.def("reward", &reward);
    m.def("ground_truth_action", &ground_truth_action);
    m.def("env_reward", &env_reward);
    m.def("billed_cost", &billed_cost);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("episodes", &TrainConfig::episodes)
        .def_readwrite("gamma", &TrainConfig::gamma)
        .def_readwrite("beta", &TrainConfig::beta)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("lstm_units", &TrainConfig::lstm_units)
        .def_readwrite("step_cap", &TrainConfig::step_cap)
        .def_readwrite("slots_per_day", &TrainConfig::slots_per_day)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("workers", &TrainConfig::workers);

    py::class_<EpisodeRow>(m, "EpisodeRow")
        .def_readonly("episode", &EpisodeRow::episode)
        .def_readonly("bs_id", &EpisodeRow::bs_id)
        .def_readonly("slot", &EpisodeRow::slot)
        .def_readonly("action", &EpisodeRow::action)
        .def_readonly("reward", &EpisodeRow::reward)
        .def_readonly("value", &EpisodeRow::value)
        .def_readonly("advantage", &EpisodeRow::advantage)
        .def_readonly("ren_kwh", &EpisodeRow::ren_kwh)
        .def_readonly("non_kwh", &EpisodeRow::non_kwh)
        .def_readonly("sto_kwh", &EpisodeRow::sto_kwh);

    // The trained model is opaque from python; it carries the agents and
    // meta-network and is consumed by evaluate().
    py::class_<TrainResult>(m, "TrainResult")
        .def_property_readonly(
            "episode_rewards",
            [](const TrainResult& r) { return r.log.episode_rewards; })
        .def_property_readonly("policy_losses",
                               [](const TrainResult& r) { return r.log.policy_losses; })
        .def_property_readonly("value_losses",
                               [](const TrainResult& r) { return r.log.value_losses; })
        .def_property_readonly("rows", [](const TrainResult& r) { return r.log.rows; })
        .def_property_readonly("total_observations",
                               [](const TrainResult& r) { return r.protocol.total_observations; })
        .def_property_readonly("total_packets",
                               [](const TrainResult& r) { return r.protocol.total_packets; });

    py::class_<EvalResult>(m, "EvalResult")
        .def_readonly("actions", &EvalResult::actions)
        .def_readonly("rows", &EvalResult::rows)
        .def_readonly("total_billed_usd", &EvalResult::total_billed_usd)
        .def_readonly("ren_kwh", &EvalResult::ren_kwh)
        .def_readonly("non_kwh", &EvalResult::non_kwh)
        .def_readonly("sto_kwh", &EvalResult::sto_kwh)
        .def_readonly("accuracy", &EvalResult::accuracy)
        .def_readonly("mean_episode_reward", &EvalResult::mean_episode_reward);

    m.def(
        "train",
        [](const StateTable& day, const std::vector<int>& counts, const CostRates& rates,
           const TrainConfig& cfg) {
            py::gil_scoped_release nogil;
            return train(day, counts, rates, cfg);
        },
        py::arg("day"), py::arg("counts"), py::arg("rates"), py::arg("cfg"));

    m.def(
        "evaluate",
        [](TrainResult& model, const std::vector<int>& counts, const StateTable& day,
           const CostRates& rates, int step_cap) {
            py::gil_scoped_release nogil;
            return evaluate(model.agents, &model.meta, counts, day, rates, step_cap);
        },
        py::arg("model"), py::arg("counts"), py::arg("day"), py::arg("rates"),
        py::arg("step_cap") = 32);

    // ---- baselines --------------------------------------------------------
    py::class_<MethodRun>(m, "MethodRun")
        .def_readonly("method", &MethodRun::method)
        .def_readonly("billed_usd", &MethodRun::billed_usd)
        .def_readonly("ren_kwh", &MethodRun::ren_kwh)
        .def_readonly("non_kwh", &MethodRun::non_kwh)
        .def_readonly("sto_kwh", &MethodRun::sto_kwh)
        .def_readonly("accuracy", &MethodRun::accuracy)
        .def_readonly("actions", &MethodRun::actions);

    py::enum_<PackHeuristic>(m, "PackHeuristic")
        .value("next_fit", PackHeuristic::next_fit)
        .value("first_fit", PackHeuristic::first_fit)
        .value("first_fit_decreasing", PackHeuristic::first_fit_decreasing);

    m.def("ucb_greedy", &ucb_greedy);
    m.def("packing_baseline", &packing_baseline);
    m.def("no_renewable", &no_renewable);
    m.def("a2c_centralized", [](const StateTable& train_day, const StateTable& test_day,
                                const CostRates& rates, const TrainConfig& cfg) {
        py::gil_scoped_release nogil;
        return a2c_centralized(train_day, test_day, rates, cfg);
    });
    m.def("a3c_multiagent", [](const StateTable& train_day, const StateTable& test_day,
                               const CostRates& rates, const TrainConfig& cfg) {
        py::gil_scoped_release nogil;
        return a3c_multiagent(train_day, test_day, rates, cfg);
    });

    // ---- metrics ----------------------------------------------------------
    m.def("decision_accuracy", &decision_accuracy);
    m.def("mae", &mae);
    m.def("explained_variance", &explained_variance);
    m.def("competitive_ratio", &competitive_ratio);

    py::class_<ProbeResult>(m, "ProbeResult")
        .def_readonly("n_agents", &ProbeResult::n_agents)
        .def_readonly("samples", &ProbeResult::samples)
        .def_readonly("empirical", &ProbeResult::empirical)
        .def_readonly("theoretical", &ProbeResult::theoretical)
        .def_readonly("std_error", &ProbeResult::std_error);

    m.def("convergence_probe", &convergence_probe, py::arg("n_agents"), py::arg("samples"),
          py::arg("seed"));
}
