#include "dispatchd/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "dispatchd/csv.hpp"

namespace dispatchd {

namespace {

std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer; decorrelates the per-(bs, day) substreams.
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

Regime parse_regime(const std::string& name) {
    if (name == "deterministic") return Regime::deterministic;
    if (name == "asymmetric") return Regime::asymmetric;
    if (name == "stochastic") return Regime::stochastic;
    throw std::runtime_error("unknown regime '" + name + "'");
}

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::deterministic: return "deterministic";
        case Regime::asymmetric: return "asymmetric";
        case Regime::stochastic: return "stochastic";
    }
    return "?";
}

// ---- trace I/O ------------------------------------------------------------

std::vector<TaskEvent> load_task_trace(const std::string& path) {
    auto t = csv::read_file(path, {"bs_id", "slot", "size_bytes"});
    std::vector<TaskEvent> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::size_t line = r + 2;
        TaskEvent e;
        e.bs_id = static_cast<int>(csv::parse_int(path, line, t.rows[r][0]));
        e.slot = static_cast<int>(csv::parse_int(path, line, t.rows[r][1]));
        e.size_bytes = csv::parse_int(path, line, t.rows[r][2]);
        if (e.size_bytes < 1) throw csv::parse_error(path, line, "size_bytes must be >= 1");
        if (e.bs_id < 0) throw csv::parse_error(path, line, "bs_id must be >= 0");
        if (e.slot < 0) throw csv::parse_error(path, line, "slot must be >= 0");
        out.push_back(e);
    }
    std::stable_sort(out.begin(), out.end(), [](const TaskEvent& a, const TaskEvent& b) {
        return a.slot != b.slot ? a.slot < b.slot : a.bs_id < b.bs_id;
    });
    return out;
}

std::vector<SolarSample> load_solar_trace(const std::string& path) {
    auto t = csv::read_file(path, {"bs_id", "slot", "generation_kwh"});
    std::vector<SolarSample> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::size_t line = r + 2;
        SolarSample s;
        s.bs_id = static_cast<int>(csv::parse_int(path, line, t.rows[r][0]));
        s.slot = static_cast<int>(csv::parse_int(path, line, t.rows[r][1]));
        s.generation_kwh = csv::parse_double(path, line, t.rows[r][2]);
        if (s.generation_kwh < 0.0) throw csv::parse_error(path, line, "generation_kwh must be >= 0");
        out.push_back(s);
    }
    return out;
}

void write_task_trace(const std::string& path, const std::vector<TaskEvent>& events) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "bs_id,slot,size_bytes\n";
    for (const auto& e : events) {
        out << e.bs_id << ',' << e.slot << ',' << e.size_bytes << '\n';
    }
}

void write_solar_trace(const std::string& path, const std::vector<SolarSample>& samples) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "bs_id,slot,generation_kwh\n";
    for (const auto& s : samples) {
        out << s.bs_id << ',' << s.slot << ',' << csv::format_double(s.generation_kwh) << '\n';
    }
}

StateTable load_state_csv(const std::string& path) {
    auto t = csv::read_file(path, {"bs_id", "slot", "demand_kwh", "renewable_kwh",
                                   "storage_cost_usd", "nonrenewable_cost_usd"});
    int max_bs = -1, max_slot = -1;
    std::vector<SlotRecord> recs;
    recs.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::size_t line = r + 2;
        SlotRecord s;
        s.bs_id = static_cast<int>(csv::parse_int(path, line, t.rows[r][0]));
        s.slot = static_cast<int>(csv::parse_int(path, line, t.rows[r][1]));
        s.demand_kwh = csv::parse_double(path, line, t.rows[r][2]);
        s.renewable_kwh = csv::parse_double(path, line, t.rows[r][3]);
        s.storage_cost_usd = csv::parse_double(path, line, t.rows[r][4]);
        s.nonrenewable_cost_usd = csv::parse_double(path, line, t.rows[r][5]);
        if (s.demand_kwh < 0 || s.renewable_kwh < 0) {
            throw csv::parse_error(path, line, "negative energy value");
        }
        max_bs = std::max(max_bs, s.bs_id);
        max_slot = std::max(max_slot, s.slot);
        recs.push_back(s);
    }
    StateTable table;
    table.n_bs = max_bs + 1;
    table.n_slots = max_slot + 1;
    table.records.resize(static_cast<std::size_t>(table.n_bs) * table.n_slots);
    for (int bs = 0; bs < table.n_bs; ++bs) {
        for (int sl = 0; sl < table.n_slots; ++sl) {
            table.at(bs, sl).bs_id = bs;
            table.at(bs, sl).slot = sl;
        }
    }
    for (const auto& s : recs) table.at(s.bs_id, s.slot) = s;
    return table;
}

void write_state_csv(const std::string& path, const StateTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "bs_id,slot,demand_kwh,renewable_kwh,storage_cost_usd,nonrenewable_cost_usd\n";
    for (int bs = 0; bs < table.n_bs; ++bs) {
        for (int sl = 0; sl < table.n_slots; ++sl) {
            const auto& r = table.at(bs, sl);
            out << r.bs_id << ',' << r.slot << ','
                << csv::format_double(r.demand_kwh) << ','
                << csv::format_double(r.renewable_kwh) << ','
                << csv::format_double(r.storage_cost_usd) << ','
                << csv::format_double(r.nonrenewable_cost_usd) << '\n';
        }
    }
}

// ---- synthesis ------------------------------------------------------------

double diurnal_shape(int slot_in_day, int day_start_slot, int day_len_slots) {
    if (slot_in_day < day_start_slot || slot_in_day >= day_start_slot + day_len_slots) {
        return 0.0;
    }
    return std::sin(M_PI * (slot_in_day - day_start_slot) / static_cast<double>(day_len_slots));
}

std::pair<std::vector<TaskEvent>, std::vector<SolarSample>>
synth_trace(int n_sbs, int n_days, std::uint64_t seed, const Config& profile) {
    if (n_sbs < 1 || n_days < 1) {
        throw std::invalid_argument("synth_trace: n_sbs and n_days must be >= 1");
    }
    const double rate_peak = profile.get_double("task_rate_peak", 30.0);
    const long long size_min = profile.get_int("task_size_min", 31);
    const long long size_max = profile.get_int("task_size_max", 1546060);
    const int day_start = static_cast<int>(profile.get_int("day_start_slot", 20));
    const int day_len = static_cast<int>(profile.get_int("day_len_slots", 56));
    const double solar_sigma = profile.get_double("solar_noise_sigma", 0.04);
    // Optional peak-hour load surges: a flat extra Poisson rate over fixed
    // slot windows, off by default. "task_surge_windows" is a comma-separated
    // list of start:len pairs, e.g. "32:6,52:6"; the older single-window keys
    // task_surge_start_slot / task_surge_len_slots are still honored.
    std::vector<std::pair<int, int>> surge_windows;
    {
        const std::string windows = profile.get_str("task_surge_windows", "");
        std::size_t pos = 0;
        while (pos < windows.size()) {
            std::size_t comma = windows.find(',', pos);
            if (comma == std::string::npos) comma = windows.size();
            const std::string item = windows.substr(pos, comma - pos);
            const std::size_t colon = item.find(':');
            if (colon == std::string::npos) {
                throw std::invalid_argument("synth_trace: bad task_surge_windows entry '" +
                                            item + "'");
            }
            surge_windows.emplace_back(
                static_cast<int>(csv::parse_int("task_surge_windows", 0, item.substr(0, colon))),
                static_cast<int>(csv::parse_int("task_surge_windows", 0, item.substr(colon + 1))));
            pos = comma + 1;
        }
        const int start = static_cast<int>(profile.get_int("task_surge_start_slot", -1));
        const int len = static_cast<int>(profile.get_int("task_surge_len_slots", 0));
        if (start >= 0 && len > 0) surge_windows.emplace_back(start, len);
    }
    const double surge_rate = profile.get_double("task_surge_rate", 0.0);

    std::vector<TaskEvent> tasks;
    std::vector<SolarSample> solar;
    solar.reserve(static_cast<std::size_t>(n_sbs) * n_days * kSlotsPerDay);

    for (int bs = 0; bs < n_sbs; ++bs) {
        // Mild heterogeneity across stations: three size classes.
        const double scale = 1.0 + 0.1 * ((bs % 3) - 1);
        const double solar_peak = profile.get_bs_double(bs, "solar_peak_kwh", 0.92) * scale;
        const double ren_max = profile.get_bs_double(bs, "ren_max_kwh", 1.36) * scale;
        for (int day = 0; day < n_days; ++day) {
            std::mt19937_64 rng(mix64(seed ^ mix64(0x5b5e0000ULL + bs) ^ mix64(0xda700000ULL + day)));
            for (int t = 0; t < kSlotsPerDay; ++t) {
                const int slot = day * kSlotsPerDay + t;
                const double s = diurnal_shape(t, day_start, day_len);

                double lam = rate_peak * s;
                for (const auto& [ws, wl] : surge_windows) {
                    if (t >= ws && t < ws + wl) {
                        lam += surge_rate;
                        break;
                    }
                }
                int count = 0;
                if (lam > 0.0) {
                    std::poisson_distribution<int> pois(lam);
                    count = pois(rng);
                }
                std::uniform_int_distribution<long long> size(size_min, size_max);
                for (int j = 0; j < count; ++j) {
                    tasks.push_back({bs, slot, size(rng)});
                }

                double gen = 0.0;
                if (s > 0.0) {
                    std::normal_distribution<double> noise(0.0, solar_sigma);
                    gen = solar_peak * s * std::exp(noise(rng));
                    gen = std::clamp(gen, 0.0, ren_max);
                }
                solar.push_back({bs, slot, gen});
            }
        }
    }
    return {std::move(tasks), std::move(solar)};
}

// ---- state construction ---------------------------------------------------

BsConfig resolve_bs_config(const Config& cfg, int bs_id) {
    const double scale = 1.0 + 0.1 * ((bs_id % 3) - 1);
    BsConfig bc;
    bc.servers.k_servers = static_cast<int>(cfg.get_bs_double(bs_id, "k_servers", 2));
    bc.servers.cores = static_cast<int>(cfg.get_bs_double(bs_id, "cores", 2));
    bc.servers.freq_hz = cfg.get_bs_double(bs_id, "freq_hz", 2.5e9);
    bc.servers.switch_cap_farad = cfg.get_bs_double(bs_id, "switch_cap_farad", 5e-27);
    bc.servers.idle_w = cfg.get_bs_double(bs_id, "idle_w", 450.0 * scale);
    bc.servers.service_capacity_bps = cfg.get_bs_double(bs_id, "service_capacity_bps", 200000.0);
    bc.radio.bandwidth_hz = cfg.get_bs_double(bs_id, "bandwidth_hz", 180000.0);
    bc.radio.tx_power_w = cfg.get_bs_double(bs_id, "tx_power_w", 0.5);
    bc.radio.channel_gain = cfg.get_bs_double(bs_id, "channel_gain", 4.4e-10);
    bc.radio.noise_var_w = cfg.get_bs_double(bs_id, "noise_var_w", 1e-13);
    bc.radio.coeff = cfg.get_bs_double(bs_id, "net_coeff", 2.8);
    bc.radio.static_w = cfg.get_bs_double(bs_id, "net_static_j", 2.0);
    bc.static_min_w = cfg.get_bs_double(bs_id, "static_min_w", 100.0 * scale);
    bc.static_max_w = cfg.get_bs_double(bs_id, "static_max_w", 2900.0 * scale);
    bc.ren_max_kwh = cfg.get_bs_double(bs_id, "ren_max_kwh", 1.36) * scale;
    if (cfg.has("bs" + std::to_string(bs_id) + ".ren_max_kwh")) {
        bc.ren_max_kwh = cfg.get_bs_double(bs_id, "ren_max_kwh", bc.ren_max_kwh);
    }
    bc.day_start_slot = static_cast<int>(cfg.get_int("day_start_slot", 20));
    bc.day_len_slots = static_cast<int>(cfg.get_int("day_len_slots", 56));
    return bc;
}

CostRates resolve_cost_rates(const Config& cfg) {
    CostRates r;
    // Table-style inputs are $/MWh; internal accounting is $/kWh.
    r.c_ren = cfg.get_double("c_ren_per_mwh", 50.0) / 1000.0;
    r.c_non = cfg.get_double("c_non_per_mwh", 102.0) / 1000.0;
    r.c_sto = cfg.get_double("c_sto_per_mwh", 55.0) / 1000.0;
    return r;
}

std::vector<int> task_counts(const std::vector<TaskEvent>& tasks, int n_bs, int n_slots) {
    std::vector<int> counts(static_cast<std::size_t>(n_bs) * n_slots, 0);
    for (const auto& e : tasks) {
        if (e.bs_id < n_bs && e.slot < n_slots) {
            ++counts[static_cast<std::size_t>(e.bs_id) * n_slots + e.slot];
        }
    }
    return counts;
}

std::vector<double> per_task_energy_kwh(const std::vector<const TaskEvent*>& slot_tasks,
                                        const BsConfig& bc) {
    std::vector<double> out;
    if (slot_tasks.empty()) return out;
    const std::size_t n = slot_tasks.size();
    double sum_bits = 0.0;
    std::vector<double> bits(n);
    for (std::size_t j = 0; j < n; ++j) {
        bits[j] = static_cast<double>(slot_tasks[j]->size_bytes) * 8.0;
        sum_bits += bits[j];
    }
    const double mean_bits = sum_bits / n;
    LoadSnapshot load;
    load.n_tasks = n;
    load.mean_size_bits = mean_bits;
    load.arrival_rate = 1.0 / mean_bits;
    load.service_rate = 1.0 / (bc.servers.k_servers * bc.servers.service_capacity_bps);
    load.assignments.assign(n * bc.servers.k_servers, 0);
    for (std::size_t j = 0; j < n; ++j) {
        load.assignments[j * bc.servers.k_servers + j % bc.servers.k_servers] = 1;
    }
    const double rho = server_utilization(load, bc.servers);
    ServerSpec dynamic_only = bc.servers;
    dynamic_only.static_w = 0.0;
    const double dyn_w = rho > 0.0 ? mec_energy_w(rho, dynamic_only) : 0.0;
    const double dyn_kwh = dyn_w * kSlotHours / 1000.0;
    const double rate = downlink_rate_bps(bc.radio, bc.radio.channel_gain, 0.0);
    out.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double net_j = net_energy_j(bc.radio, {bits[j]}, {rate});
        // A task's share of the dynamic draw is proportional to the bits it
        // keeps the servers busy with.
        out[j] = dyn_kwh * (bits[j] / sum_bits) + net_j / 3.6e6;
    }
    return out;
}

StateTable build_state_space(const std::vector<TaskEvent>& tasks,
                             const std::vector<SolarSample>& solar,
                             int n_bs, int n_slots,
                             const Config& cfg) {
    StateTable table;
    table.n_bs = n_bs;
    table.n_slots = n_slots;
    table.records.resize(static_cast<std::size_t>(n_bs) * n_slots);

    const CostRates rates = resolve_cost_rates(cfg);

    std::vector<std::vector<const TaskEvent*>> by_cell(table.records.size());
    for (const auto& e : tasks) {
        if (e.bs_id >= n_bs || e.slot >= n_slots) {
            throw std::runtime_error("task event out of grid: bs " + std::to_string(e.bs_id) +
                                     " slot " + std::to_string(e.slot));
        }
        by_cell[static_cast<std::size_t>(e.bs_id) * n_slots + e.slot].push_back(&e);
    }
    std::vector<double> renewable(table.records.size(), 0.0);
    for (const auto& s : solar) {
        if (s.bs_id >= n_bs || s.slot >= n_slots) {
            throw std::runtime_error("solar sample out of grid: bs " + std::to_string(s.bs_id) +
                                     " slot " + std::to_string(s.slot));
        }
        renewable[static_cast<std::size_t>(s.bs_id) * n_slots + s.slot] += s.generation_kwh;
    }

    for (int bs = 0; bs < n_bs; ++bs) {
        const BsConfig bc = resolve_bs_config(cfg, bs);
        for (int sl = 0; sl < n_slots; ++sl) {
            const std::size_t cell = static_cast<std::size_t>(bs) * n_slots + sl;
            const auto& cell_tasks = by_cell[cell];
            const double shape = diurnal_shape(sl % kSlotsPerDay, bc.day_start_slot, bc.day_len_slots);

            double mec_w;
            double net = 0.0;
            if (cell_tasks.empty()) {
                mec_w = mec_energy_w(0.0, bc.servers);
            } else {
                double sum_bits = 0.0;
                std::vector<double> bits(cell_tasks.size());
                for (std::size_t j = 0; j < cell_tasks.size(); ++j) {
                    bits[j] = static_cast<double>(cell_tasks[j]->size_bytes) * 8.0;
                    sum_bits += bits[j];
                }
                LoadSnapshot load;
                load.n_tasks = cell_tasks.size();
                load.mean_size_bits = sum_bits / cell_tasks.size();
                load.arrival_rate = 1.0 / load.mean_size_bits;
                load.service_rate = 1.0 / (bc.servers.k_servers * bc.servers.service_capacity_bps);
                load.assignments.assign(load.n_tasks * bc.servers.k_servers, 0);
                for (std::size_t j = 0; j < load.n_tasks; ++j) {
                    load.assignments[j * bc.servers.k_servers + j % bc.servers.k_servers] = 1;
                }
                const double rho = server_utilization(load, bc.servers);
                ServerSpec spec = bc.servers;
                // The active static draw tracks the diurnal traffic envelope
                // between its configured floor and ceiling.
                spec.static_w = bc.static_min_w + (bc.static_max_w - bc.static_min_w) * shape;
                mec_w = mec_energy_w(rho, spec);
                const double rate = downlink_rate_bps(bc.radio, bc.radio.channel_gain, 0.0);
                net = net_energy_j(bc.radio, bits, std::vector<double>(bits.size(), rate));
            }

            SlotRecord& rec = table.records[cell];
            rec.bs_id = bs;
            rec.slot = sl;
            rec.demand_kwh = total_demand_kwh(mec_w, net, kSlotHours);
            rec.renewable_kwh = std::min(renewable[cell], bc.ren_max_kwh);
            rec.storage_cost_usd = storage_cost(rec.demand_kwh, rec.renewable_kwh, rates.c_sto);
            rec.nonrenewable_cost_usd = nonrenewable_cost(rec.demand_kwh, rec.renewable_kwh, rates.c_non);
        }
    }
    return table;
}

StateTable slice_day(const StateTable& table, int day) {
    if (day < 0 || (day + 1) * kSlotsPerDay > table.n_slots) {
        throw std::out_of_range("slice_day: day " + std::to_string(day) + " out of range");
    }
    StateTable out;
    out.n_bs = table.n_bs;
    out.n_slots = kSlotsPerDay;
    out.records.resize(static_cast<std::size_t>(out.n_bs) * kSlotsPerDay);
    for (int bs = 0; bs < out.n_bs; ++bs) {
        for (int t = 0; t < kSlotsPerDay; ++t) {
            SlotRecord r = table.at(bs, day * kSlotsPerDay + t);
            r.slot = t;
            out.at(bs, t) = r;
        }
    }
    return out;
}

std::pair<StateTable, StateTable> split_regime(const StateTable& table,
                                               const RegimeSpec& spec,
                                               const CostRates& rates) {
    StateTable train = slice_day(table, spec.train_day);
    StateTable test;
    switch (spec.kind) {
        case Regime::deterministic:
            test = train;
            break;
        case Regime::stochastic:
            test = slice_day(table, spec.test_day);
            break;
        case Regime::asymmetric: {
            test = slice_day(table, spec.test_day);
            // Demand is known (reuse the train day); generation is not.
            for (int bs = 0; bs < test.n_bs; ++bs) {
                for (int t = 0; t < kSlotsPerDay; ++t) {
                    SlotRecord& r = test.at(bs, t);
                    r.demand_kwh = train.at(bs, t).demand_kwh;
                    r.storage_cost_usd = storage_cost(r.demand_kwh, r.renewable_kwh, rates.c_sto);
                    r.nonrenewable_cost_usd = nonrenewable_cost(r.demand_kwh, r.renewable_kwh, rates.c_non);
                }
            }
            break;
        }
    }
    return {std::move(train), std::move(test)};
}

} // namespace dispatchd
