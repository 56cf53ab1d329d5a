#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dispatchd/baselines.hpp"
#include "dispatchd/config.hpp"
#include "dispatchd/csv.hpp"
#include "dispatchd/dispatch.hpp"
#include "dispatchd/mamrl.hpp"
#include "dispatchd/metrics.hpp"
#include "dispatchd/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dispatchd;

namespace {

constexpr const char* kToolVersion = "dispatchd 1.0.0";

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) { g_interrupted.store(true); }

struct CommonOpts {
    std::vector<std::string> config_files;
    std::vector<std::string> defines;  // key=value overrides from the flag line
};

Config make_config(const CommonOpts& common) {
    Config cfg;
    for (const auto& path : common.config_files) {
        cfg.merge_from(Config::load(path));
    }
    for (const auto& kv : common.defines) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("--set expects key=value, got '" + kv + "'");
        }
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

void echo_config(const fs::path& dir, const Config& cfg) {
    fs::create_directories(dir);
    std::ofstream out(dir / "effective_config.txt");
    out << "# " << kToolVersion << "\n" << cfg.dump();
}

RegimeSpec regime_from(const Config& cfg) {
    RegimeSpec spec;
    spec.kind = parse_regime(cfg.get_str("regime", "deterministic"));
    spec.train_day = static_cast<int>(cfg.get_int("train_day", 0));
    spec.test_day = static_cast<int>(cfg.get_int("test_day",
                                                 spec.kind == Regime::deterministic ? 0 : 1));
    return spec;
}

std::vector<TaskEvent> load_task_files(const std::vector<std::string>& paths) {
    std::vector<TaskEvent> all;
    for (const auto& p : paths) {
        auto part = load_task_trace(p);
        all.insert(all.end(), part.begin(), part.end());
    }
    return all;
}

std::vector<SolarSample> load_solar_files(const std::vector<std::string>& paths) {
    std::vector<SolarSample> all;
    for (const auto& p : paths) {
        auto part = load_solar_trace(p);
        all.insert(all.end(), part.begin(), part.end());
    }
    return all;
}

std::vector<double> ren_max_per_bs(const Config& cfg, int n_bs) {
    std::vector<double> caps;
    for (int bs = 0; bs < n_bs; ++bs) caps.push_back(resolve_bs_config(cfg, bs).ren_max_kwh);
    return caps;
}

// ---- synth ---------------------------------------------------------------

int cmd_synth(int sbs, int days, std::uint64_t seed, const std::string& out_dir,
              const Config& cfg) {
    auto [tasks, solar] = synth_trace(sbs, days, seed, cfg);
    fs::create_directories(out_dir);
    for (int d = 0; d < days; ++d) {
        std::vector<TaskEvent> dt;
        std::vector<SolarSample> ds;
        for (const auto& e : tasks) {
            if (e.slot / kSlotsPerDay == d) dt.push_back(e);
        }
        for (const auto& s : solar) {
            if (s.slot / kSlotsPerDay == d) ds.push_back(s);
        }
        write_task_trace((fs::path(out_dir) / ("tasks_day" + std::to_string(d) + ".csv")).string(), dt);
        write_solar_trace((fs::path(out_dir) / ("solar_day" + std::to_string(d) + ".csv")).string(), ds);
    }
    echo_config(out_dir, cfg);
    std::cout << "synth: wrote " << days << " day trace pair(s) for " << sbs
              << " SBS(s) to " << out_dir << "\n";
    return 0;
}

// ---- build-state ---------------------------------------------------------

int cmd_build_state(const std::vector<std::string>& task_files,
                    const std::vector<std::string>& solar_files,
                    const std::string& out_file, const Config& cfg) {
    auto tasks = load_task_files(task_files);
    auto solar = load_solar_files(solar_files);
    int max_bs = -1, max_slot = -1;
    for (const auto& e : tasks) {
        max_bs = std::max(max_bs, e.bs_id);
        max_slot = std::max(max_slot, e.slot);
    }
    for (const auto& s : solar) {
        max_bs = std::max(max_bs, s.bs_id);
        max_slot = std::max(max_slot, s.slot);
    }
    if (max_bs < 0) throw std::runtime_error("build-state: traces are empty");
    const int n_bs = static_cast<int>(cfg.get_int("n_bs", max_bs + 1));
    const int n_slots = ((max_slot / kSlotsPerDay) + 1) * kSlotsPerDay;
    StateTable table = build_state_space(tasks, solar, n_bs, n_slots, cfg);
    write_state_csv(out_file, table);
    echo_config(fs::path(out_file).parent_path().empty() ? "." : fs::path(out_file).parent_path(),
                cfg);
    std::cout << "build-state: " << n_bs << " BS x " << n_slots << " slots -> " << out_file
              << "\n";
    return 0;
}

// ---- oracle --------------------------------------------------------------

int cmd_oracle(const std::string& state_file, const std::string& out_file, const Config& cfg) {
    StateTable table = load_state_csv(state_file);
    const CostRates rates = resolve_cost_rates(cfg);
    std::ofstream out(out_file);
    if (!out) throw std::runtime_error("cannot write " + out_file);
    out << "bs_id,slot,ren_kwh,non_kwh,sto_kwh,cost_usd\n";
    for (int bs = 0; bs < table.n_bs; ++bs) {
        const double cap = resolve_bs_config(cfg, bs).ren_max_kwh;
        for (int t = 0; t < table.n_slots; ++t) {
            const auto& rec = table.at(bs, t);
            const auto [ren, cost] = solve_known_demand(rec.demand_kwh, rates, cap);
            const Recourse rc = second_stage_recourse(ren, rec.demand_kwh, rates);
            out << bs << ',' << t << ',' << csv::format_double(ren) << ','
                << csv::format_double(rc.non_kwh) << ',' << csv::format_double(rc.sto_kwh)
                << ',' << csv::format_double(cost) << '\n';
        }
    }
    std::cout << "oracle: solved " << table.n_bs * table.n_slots << " slot problems -> "
              << out_file << "\n";
    return 0;
}

// ---- train ---------------------------------------------------------------

void save_run_checkpoint(const fs::path& path, const TrainResult& result) {
    std::vector<std::pair<std::string, const AgentNet*>> nets;
    for (const auto& a : result.agents) {
        nets.emplace_back("agent" + std::to_string(a.bs_id), &a.net);
    }
    nets.emplace_back("meta", &result.meta.net);
    save_checkpoint(path.string(), nets);
}

int cmd_train(const std::string& state_file, const std::vector<std::string>& task_files,
              const std::string& out_dir, const Config& cfg) {
    StateTable table = load_state_csv(state_file);
    const CostRates rates = resolve_cost_rates(cfg);
    const RegimeSpec spec = regime_from(cfg);
    auto [train_day, test_day] = split_regime(table, spec, rates);

    TrainConfig tc = train_config_from(cfg);
    tc.stop_flag = &g_interrupted;
    fs::create_directories(fs::path(out_dir) / "checkpoints");
    fs::create_directories(fs::path(out_dir) / "logs");
    fs::create_directories(fs::path(out_dir) / "reports");
    tc.diagnostic_checkpoint = (fs::path(out_dir) / "checkpoints" / "diagnostic.ckpt").string();

    std::vector<int> counts;
    if (!task_files.empty()) {
        auto tasks = load_task_files(task_files);
        auto all = task_counts(tasks, table.n_bs, table.n_slots);
        // Keep the train day's columns only.
        counts.assign(static_cast<std::size_t>(table.n_bs) * kSlotsPerDay, 0);
        for (int bs = 0; bs < table.n_bs; ++bs) {
            for (int t = 0; t < kSlotsPerDay; ++t) {
                counts[static_cast<std::size_t>(bs) * kSlotsPerDay + t] =
                    all[static_cast<std::size_t>(bs) * table.n_slots +
                        spec.train_day * kSlotsPerDay + t];
            }
        }
    }

    TrainResult result = train(train_day, counts, rates, tc);
    save_run_checkpoint(fs::path(out_dir) / "checkpoints" / "model.ckpt", result);
    write_episode_log((fs::path(out_dir) / "logs" / "episode_log.csv").string(), result.log);
    {
        std::ofstream rl(fs::path(out_dir) / "logs" / "episode_rewards.csv");
        rl << "episode,mean_reward,policy_loss,value_loss\n";
        for (std::size_t e = 0; e < result.log.episode_rewards.size(); ++e) {
            rl << e << ',' << csv::format_double(result.log.episode_rewards[e]) << ','
               << csv::format_double(result.log.policy_losses[e]) << ','
               << csv::format_double(result.log.value_losses[e]) << '\n';
        }
    }
    echo_config(out_dir, cfg);
    const bool interrupted = g_interrupted.load();
    std::cout << "train: " << result.log.episode_rewards.size() << " episode(s)"
              << (interrupted ? " (interrupted, checkpoint flushed)" : "") << ", checkpoint at "
              << (fs::path(out_dir) / "checkpoints" / "model.ckpt").string() << "\n";
    if (!result.log.episode_rewards.empty()) {
        std::cout << "train: final mean episode reward "
                  << result.log.episode_rewards.back() << "\n";
    }
    return 0;
}

// ---- eval / report helpers ------------------------------------------------

// A trained model: the per-BS local agents plus the meta-agent whose packets
// drive the exchange protocol during evaluation.
struct LoadedModel {
    std::vector<LocalAgent> agents;
    MetaAgent meta;
};

LoadedModel model_from_checkpoint(const std::string& ckpt, int n_bs, const Config& cfg) {
    const int units = static_cast<int>(cfg.get_int("lstm_units", 48));
    LoadedModel m;
    std::vector<std::pair<std::string, AgentNet*>> nets;
    for (int i = 0; i < n_bs; ++i) {
        LocalAgent a;
        a.bs_id = i;
        a.net = AgentNet(kLocalInputDim, units, 2);
        a.state = LstmState(units);
        a.gamma = cfg.get_double("gamma", 0.9);
        m.agents.push_back(std::move(a));
    }
    for (auto& a : m.agents) {
        nets.emplace_back("agent" + std::to_string(a.bs_id), &a.net);
    }
    m.meta.net = AgentNet(kObservationDim, units, 2);
    m.meta.states.assign(n_bs, LstmState(units));
    m.meta.beta = cfg.get_double("beta", m.meta.beta);
    m.meta.gamma = cfg.get_double("gamma", m.meta.gamma);
    nets.emplace_back("meta", &m.meta.net);
    load_checkpoint(ckpt, nets);
    return m;
}

// Per-(bs, slot) task counts for the test day, driving the evaluation step
// loop exactly as in training. Empty when no task traces were given.
std::vector<int> test_day_counts(const std::vector<std::string>& task_files, int n_bs,
                                 int n_slots, int test_day) {
    if (task_files.empty()) return {};
    auto tasks = load_task_files(task_files);
    auto all = task_counts(tasks, n_bs, n_slots);
    std::vector<int> counts(static_cast<std::size_t>(n_bs) * kSlotsPerDay, 0);
    for (int bs = 0; bs < n_bs; ++bs) {
        for (int t = 0; t < kSlotsPerDay; ++t) {
            counts[static_cast<std::size_t>(bs) * kSlotsPerDay + t] =
                all[static_cast<std::size_t>(bs) * n_slots + test_day * kSlotsPerDay + t];
        }
    }
    return counts;
}

json eval_metrics_json(const EvalResult& er, const StateTable& test_day, const CostRates& rates,
                       const Config& cfg) {
    const OfflineCost hindsight =
        offline_optimal_cost(test_day, rates, ren_max_per_bs(cfg, test_day.n_bs));
    // Deficit prediction series: the policy predicts zero purchase when it
    // schedules storage; the actual is the realized deficit.
    std::vector<double> actual, predicted;
    for (int bs = 0; bs < test_day.n_bs; ++bs) {
        for (int t = 0; t < test_day.n_slots; ++t) {
            const auto& rec = test_day.at(bs, t);
            const double deficit = std::max(rec.demand_kwh - rec.renewable_kwh, 0.0);
            actual.push_back(deficit);
            const int action = er.actions[static_cast<std::size_t>(bs) * test_day.n_slots + t];
            predicted.push_back(action == kActionNonRenewable ? deficit : 0.0);
        }
    }
    json j;
    j["accuracy"] = er.accuracy;
    j["mae_kwh"] = mae(predicted, actual);
    j["explained_variance"] = explained_variance(predicted, actual);
    j["billed_cost_usd"] = er.total_billed_usd;
    j["hindsight_cost_usd"] = hindsight.total_usd;
    j["competitive_ratio"] = competitive_ratio(er.total_billed_usd, hindsight.total_usd);
    j["mean_episode_reward"] = er.mean_episode_reward;
    return j;
}

int cmd_eval(const std::string& state_file, const std::string& ckpt,
             const std::vector<std::string>& task_files, const std::string& out_dir,
             const Config& cfg) {
    StateTable table = load_state_csv(state_file);
    const CostRates rates = resolve_cost_rates(cfg);
    const RegimeSpec spec = regime_from(cfg);
    auto [train_day, test_day] = split_regime(table, spec, rates);
    auto counts = test_day_counts(task_files, table.n_bs, table.n_slots, spec.test_day);
    LoadedModel model = model_from_checkpoint(ckpt, table.n_bs, cfg);
    const int step_cap = static_cast<int>(cfg.get_int("step_cap", 32));
    EvalResult er = evaluate(model.agents, &model.meta, counts, test_day, rates, step_cap);
    fs::create_directories(fs::path(out_dir) / "reports");
    {
        EpisodeLog log;
        log.rows = er.rows;
        write_episode_log((fs::path(out_dir) / "reports" / "eval_rows.csv").string(), log);
    }
    json j = eval_metrics_json(er, test_day, rates, cfg);
    j["regime"] = regime_name(spec.kind);
    std::ofstream out(fs::path(out_dir) / "reports" / "eval_metrics.json");
    out << j.dump(2) << "\n";
    echo_config(out_dir, cfg);
    std::cout << "eval: regime " << regime_name(spec.kind) << " accuracy " << er.accuracy
              << " ratio " << j["competitive_ratio"].get<double>() << "\n";
    return 0;
}

// ---- compare --------------------------------------------------------------

int cmd_compare(const std::string& state_file, const std::string& ckpt,
                const std::vector<std::string>& task_files, const std::string& out_dir,
                const Config& cfg) {
    StateTable table = load_state_csv(state_file);
    const CostRates rates = resolve_cost_rates(cfg);
    const RegimeSpec spec = regime_from(cfg);
    auto [train_day, test_day] = split_regime(table, spec, rates);
    const auto caps = ren_max_per_bs(cfg, table.n_bs);
    const OfflineCost hindsight = offline_optimal_cost(test_day, rates, caps);

    std::vector<LedgerRow> rows;
    {
        // Hindsight ground truth amounts.
        double non = 0.0, ren = 0.0;
        for (int bs = 0; bs < test_day.n_bs; ++bs) {
            for (int t = 0; t < test_day.n_slots; ++t) {
                const double d = test_day.at(bs, t).demand_kwh;
                ren += std::min(d, caps[bs]);
                non += std::max(d - caps[bs], 0.0);
            }
        }
        rows.push_back(ledger_from_amounts("GroundTruth", non, 0.0, ren, rates,
                                           hindsight.total_usd));
    }
    if (!ckpt.empty()) {
        auto counts = test_day_counts(task_files, table.n_bs, table.n_slots, spec.test_day);
        LoadedModel model = model_from_checkpoint(ckpt, table.n_bs, cfg);
        const int step_cap = static_cast<int>(cfg.get_int("step_cap", 32));
        EvalResult er = evaluate(model.agents, &model.meta, counts, test_day, rates, step_cap);
        rows.push_back(ledger_from_amounts("MAMRL", er.non_kwh, er.sto_kwh, er.ren_kwh, rates,
                                           hindsight.total_usd));
    }
    TrainConfig tc = train_config_from(cfg);
    tc.episodes = static_cast<int>(cfg.get_int("baseline_episodes", 60));
    auto push = [&](const MethodRun& run) {
        rows.push_back(ledger_from_amounts(run.method, run.non_kwh, run.sto_kwh, run.ren_kwh,
                                           rates, hindsight.total_usd));
    };
    push(a2c_centralized(train_day, test_day, rates, tc));
    push(a3c_multiagent(train_day, test_day, rates, tc));
    push(ucb_greedy(test_day, rates));
    if (!task_files.empty()) {
        auto tasks = load_task_files(task_files);
        std::vector<TaskEvent> day_tasks;
        for (const auto& e : tasks) {
            if (e.slot / kSlotsPerDay == spec.test_day) {
                TaskEvent r = e;
                r.slot = e.slot % kSlotsPerDay;
                day_tasks.push_back(r);
            }
        }
        push(packing_baseline(PackHeuristic::next_fit, test_day, day_tasks, cfg, rates));
        push(packing_baseline(PackHeuristic::first_fit, test_day, day_tasks, cfg, rates));
        push(packing_baseline(PackHeuristic::first_fit_decreasing, test_day, day_tasks, cfg,
                              rates));
    }
    push(no_renewable(test_day, rates));

    fs::create_directories(fs::path(out_dir) / "reports");
    write_ledger_csv((fs::path(out_dir) / "reports" / "compare.csv").string(), rows);
    echo_config(out_dir, cfg);
    std::cout << "compare: " << rows.size() << " method(s) -> "
              << (fs::path(out_dir) / "reports" / "compare.csv").string() << "\n";
    return 0;
}

// ---- report ---------------------------------------------------------------

int cmd_report(const std::string& state_file, const std::string& ckpt,
               const std::vector<std::string>& task_files, const std::string& out_dir,
               const std::string& format, const Config& cfg) {
    StateTable table = load_state_csv(state_file);
    const CostRates rates = resolve_cost_rates(cfg);
    const int step_cap = static_cast<int>(cfg.get_int("step_cap", 32));
    json j;
    j["tool"] = kToolVersion;
    std::vector<std::array<std::string, 6>> csv_rows;
    for (Regime kind : {Regime::deterministic, Regime::asymmetric, Regime::stochastic}) {
        RegimeSpec spec = regime_from(cfg);
        spec.kind = kind;
        if (kind != Regime::deterministic && spec.test_day == spec.train_day) {
            spec.test_day = std::min(spec.train_day + 1, table.n_days() - 1);
        }
        auto [train_day, test_day] = split_regime(table, spec, rates);
        json per_method;
        auto counts = test_day_counts(task_files, table.n_bs, table.n_slots, spec.test_day);
        LoadedModel model = model_from_checkpoint(ckpt, table.n_bs, cfg);
        EvalResult er = evaluate(model.agents, &model.meta, counts, test_day, rates, step_cap);
        per_method["MAMRL"] = eval_metrics_json(er, test_day, rates, cfg);

        const MethodRun ucb = ucb_greedy(test_day, rates);
        EvalResult ucb_er;
        ucb_er.actions = ucb.actions;
        ucb_er.accuracy = ucb.accuracy;
        ucb_er.total_billed_usd = ucb.billed_usd;
        per_method["UCB"] = eval_metrics_json(ucb_er, test_day, rates, cfg);
        j["regimes"][regime_name(kind)] = per_method;
        for (const char* m : {"MAMRL", "UCB"}) {
            const json& mm = per_method[m];
            csv_rows.push_back({regime_name(kind), m,
                                csv::format_double(mm["accuracy"].get<double>()),
                                csv::format_double(mm["mae_kwh"].get<double>()),
                                csv::format_double(mm["explained_variance"].get<double>()),
                                csv::format_double(mm["competitive_ratio"].get<double>())});
        }
    }
    fs::create_directories(fs::path(out_dir) / "reports");
    if (format == "json") {
        std::ofstream out(fs::path(out_dir) / "reports" / "metrics.json");
        out << j.dump(2) << "\n";
    } else {
        std::ofstream out(fs::path(out_dir) / "reports" / "metrics.csv");
        out << "regime,method,accuracy,mae_kwh,explained_variance,competitive_ratio\n";
        for (const auto& r : csv_rows) {
            out << r[0] << ',' << r[1] << ',' << r[2] << ',' << r[3] << ',' << r[4] << ','
                << r[5] << '\n';
        }
    }
    echo_config(out_dir, cfg);
    std::cout << "report: metrics written to " << out_dir << "/reports\n";
    return 0;
}

// ---- probe ----------------------------------------------------------------

int cmd_probe(int agents, long long samples, std::uint64_t seed) {
    const ProbeResult r = convergence_probe(agents, samples, seed);
    std::cout << "agents=" << r.n_agents << " samples=" << r.samples
              << " empirical=" << csv::format_double(r.empirical)
              << " theoretical=" << csv::format_double(r.theoretical)
              << " std_error=" << csv::format_double(r.std_error) << "\n";
    return 0;
}

// ---- smoke ----------------------------------------------------------------

int cmd_smoke(const std::string& dir, std::uint64_t seed, Config cfg) {
    const fs::path root(dir);
    fs::create_directories(root);
    cfg.set("seed", std::to_string(seed));
    cfg.set("episodes", cfg.get_str("episodes", "10"));
    cfg.set("regime", cfg.get_str("regime", "stochastic"));
    cfg.set("test_day", cfg.get_str("test_day", "1"));

    auto stage = [](const char* name, int rc) {
        if (rc != 0) throw std::runtime_error(std::string("pipeline stage failed: ") + name);
    };
    stage("synth", cmd_synth(3, 3, seed, (root / "traces").string(), cfg));
    std::vector<std::string> task_files, solar_files;
    for (int d = 0; d < 3; ++d) {
        task_files.push_back((root / "traces" / ("tasks_day" + std::to_string(d) + ".csv")).string());
        solar_files.push_back((root / "traces" / ("solar_day" + std::to_string(d) + ".csv")).string());
    }
    const std::string state = (root / "state.csv").string();
    stage("build-state", cmd_build_state(task_files, solar_files, state, cfg));
    stage("oracle", cmd_oracle(state, (root / "solution.csv").string(), cfg));
    stage("train", cmd_train(state, task_files, (root / "run").string(), cfg));
    const std::string ckpt = (root / "run" / "checkpoints" / "model.ckpt").string();
    stage("eval", cmd_eval(state, ckpt, task_files, (root / "run").string(), cfg));
    stage("compare", cmd_compare(state, ckpt, task_files, (root / "run").string(), cfg));
    stage("report", cmd_report(state, ckpt, task_files, (root / "run").string(), "json", cfg));
    std::cout << "smoke: all stages completed in " << dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, handle_sigint);
    CLI::App app{"Self-powered MEC energy-dispatch simulator and learning engine"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--config", common.config_files, "Config file(s), key=value format")
        ->expected(-1);
    app.add_option("--set", common.defines, "Inline config override key=value")->expected(-1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate seeded synthetic traces");
    int sy_sbs = 9, sy_days = 1;
    std::uint64_t sy_seed = 42;
    std::string sy_out = "traces";
    synth->add_option("--sbs", sy_sbs, "Number of small base stations");
    synth->add_option("--days", sy_days, "Number of days");
    synth->add_option("--seed", sy_seed, "RNG seed");
    synth->add_option("--out", sy_out, "Output directory");

    // build-state
    auto* bstate = app.add_subcommand("build-state", "Run state-space generation");
    std::vector<std::string> bs_tasks, bs_solar;
    std::string bs_out = "state.csv";
    bstate->add_option("--tasks", bs_tasks, "Task CSV file(s)")->expected(-1);
    bstate->add_option("--solar", bs_solar, "Solar CSV file(s)")->expected(-1);
    bstate->add_option("--out", bs_out, "Output state CSV");

    // oracle
    auto* oracle = app.add_subcommand("oracle", "Solve the hindsight dispatch per slot");
    std::string or_state = "state.csv", or_out = "solution.csv";
    oracle->add_option("--state", or_state, "State CSV");
    oracle->add_option("--out", or_out, "Solution CSV");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the MAMRL agents");
    std::string tr_state = "state.csv", tr_out = "run";
    std::vector<std::string> tr_tasks;
    train_cmd->add_option("--state", tr_state, "State CSV");
    train_cmd->add_option("--tasks", tr_tasks, "Task CSV file(s) for the step loop")->expected(-1);
    train_cmd->add_option("--out", tr_out, "Run directory");
    long long tr_episodes = -1, tr_seed = -1, tr_workers = -1;
    std::string tr_regime;
    train_cmd->add_option("--episodes", tr_episodes, "Episode count override");
    train_cmd->add_option("--seed", tr_seed, "Seed override");
    train_cmd->add_option("--workers", tr_workers, "Worker thread count");
    train_cmd->add_option("--regime", tr_regime, "deterministic|asymmetric|stochastic");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained checkpoint");
    std::string ev_state = "state.csv", ev_ckpt, ev_out = "run";
    std::string ev_regime;
    std::vector<std::string> ev_tasks;
    eval_cmd->add_option("--state", ev_state, "State CSV");
    eval_cmd->add_option("--tasks", ev_tasks, "Task trace CSV(s) for the step loop")
        ->expected(-1);
    eval_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint path")->required();
    eval_cmd->add_option("--out", ev_out, "Run directory");
    eval_cmd->add_option("--regime", ev_regime, "deterministic|asymmetric|stochastic");

    // compare
    auto* comp = app.add_subcommand("compare", "Run every baseline and emit the cost ledger");
    std::string cp_state = "state.csv", cp_ckpt, cp_out = "run";
    std::vector<std::string> cp_tasks;
    std::string cp_regime;
    comp->add_option("--state", cp_state, "State CSV");
    comp->add_option("--checkpoint", cp_ckpt, "Checkpoint path (optional)");
    comp->add_option("--tasks", cp_tasks, "Task CSV file(s) for packing baselines")->expected(-1);
    comp->add_option("--out", cp_out, "Run directory");
    comp->add_option("--regime", cp_regime, "deterministic|asymmetric|stochastic");

    // report
    auto* rep = app.add_subcommand("report", "Emit metrics for all three regimes");
    std::string rp_state = "state.csv", rp_ckpt, rp_out = "run", rp_format = "json";
    std::vector<std::string> rp_tasks;
    rep->add_option("--state", rp_state, "State CSV");
    rep->add_option("--tasks", rp_tasks, "Task trace CSV(s) for the step loop")->expected(-1);
    rep->add_option("--checkpoint", rp_ckpt, "Checkpoint path")->required();
    rep->add_option("--out", rp_out, "Run directory");
    rep->add_option("--format", rp_format, "json|csv")->check(CLI::IsMember({"json", "csv"}));

    // probe-convergence
    auto* probe = app.add_subcommand("probe-convergence", "Gradient-alignment Monte Carlo probe");
    int pr_agents = 2;
    long long pr_samples = 100000;
    std::uint64_t pr_seed = 7;
    probe->add_option("--agents", pr_agents, "Number of agents");
    probe->add_option("--samples", pr_samples, "Monte Carlo samples");
    probe->add_option("--seed", pr_seed, "RNG seed");

    // smoke
    auto* smoke = app.add_subcommand("smoke", "End-to-end pipeline smoke run");
    std::string sm_dir = "smoke_run";
    std::uint64_t sm_seed = 42;
    smoke->add_option("--dir", sm_dir, "Working directory");
    smoke->add_option("--seed", sm_seed, "RNG seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        Config cfg = make_config(common);
        if (synth->parsed()) return cmd_synth(sy_sbs, sy_days, sy_seed, sy_out, cfg);
        if (bstate->parsed()) return cmd_build_state(bs_tasks, bs_solar, bs_out, cfg);
        if (oracle->parsed()) return cmd_oracle(or_state, or_out, cfg);
        if (train_cmd->parsed()) {
            if (tr_episodes >= 0) cfg.set("episodes", std::to_string(tr_episodes));
            if (tr_seed >= 0) cfg.set("seed", std::to_string(tr_seed));
            if (tr_workers >= 0) cfg.set("workers", std::to_string(tr_workers));
            if (!tr_regime.empty()) cfg.set("regime", tr_regime);
            return cmd_train(tr_state, tr_tasks, tr_out, cfg);
        }
        if (eval_cmd->parsed()) {
            if (!ev_regime.empty()) cfg.set("regime", ev_regime);
            return cmd_eval(ev_state, ev_ckpt, ev_tasks, ev_out, cfg);
        }
        if (comp->parsed()) {
            if (!cp_regime.empty()) cfg.set("regime", cp_regime);
            return cmd_compare(cp_state, cp_ckpt, cp_tasks, cp_out, cfg);
        }
        if (rep->parsed()) return cmd_report(rp_state, rp_ckpt, rp_tasks, rp_out, rp_format, cfg);
        if (probe->parsed()) return cmd_probe(pr_agents, pr_samples, pr_seed);
        if (smoke->parsed()) return cmd_smoke(sm_dir, sm_seed, cfg);
    } catch (const numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
