#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dispatchd/config.hpp"
#include "dispatchd/energy_model.hpp"

namespace dispatchd {

inline constexpr int kSlotsPerDay = 96;
inline constexpr double kSlotHours = 0.25;

struct TaskEvent {
    int bs_id = 0;
    int slot = 0;            // global slot index, day*96 + epoch
    std::int64_t size_bytes = 0;
};

struct SolarSample {
    int bs_id = 0;
    int slot = 0;
    double generation_kwh = 0.0;
};

// State tuple for one (bs, slot).
struct SlotRecord {
    int bs_id = 0;
    int slot = 0;
    double demand_kwh = 0.0;
    double renewable_kwh = 0.0;
    double storage_cost_usd = 0.0;
    double nonrenewable_cost_usd = 0.0;
};

// Dense (B+1) x T grid of slot records.
struct StateTable {
    int n_bs = 0;
    int n_slots = 0;  // total slots across all days
    std::vector<SlotRecord> records;  // indexed bs*n_slots + slot

    const SlotRecord& at(int bs, int slot) const {
        return records[static_cast<std::size_t>(bs) * n_slots + slot];
    }
    SlotRecord& at(int bs, int slot) {
        return records[static_cast<std::size_t>(bs) * n_slots + slot];
    }
    int n_days() const { return n_slots / kSlotsPerDay; }
};

enum class Regime { deterministic, asymmetric, stochastic };

struct RegimeSpec {
    Regime kind = Regime::deterministic;
    int train_day = 0;
    int test_day = 0;
};

Regime parse_regime(const std::string& name);
std::string regime_name(Regime r);

// ---- trace I/O ------------------------------------------------------------

std::vector<TaskEvent> load_task_trace(const std::string& path);
std::vector<SolarSample> load_solar_trace(const std::string& path);
void write_task_trace(const std::string& path, const std::vector<TaskEvent>& events);
void write_solar_trace(const std::string& path, const std::vector<SolarSample>& samples);

StateTable load_state_csv(const std::string& path);
void write_state_csv(const std::string& path, const StateTable& table);

// ---- synthesis ------------------------------------------------------------

// Diurnal envelope in [0,1]: half-sine over the configured daylight window,
// zero outside. `slot_in_day` is the 0..95 epoch within one day.
double diurnal_shape(int slot_in_day, int day_start_slot, int day_len_slots);

// Seeded synthetic workload + solar generation. Task counts per slot follow
// a Poisson law whose rate tracks the diurnal envelope; task sizes are
// uniform on [31, 1546060] bytes; solar follows the same envelope with
// multiplicative log-normal noise, clipped to [0, ren_max].
std::pair<std::vector<TaskEvent>, std::vector<SolarSample>>
synth_trace(int n_sbs, int n_days, std::uint64_t seed, const Config& profile);

// ---- state construction ---------------------------------------------------

// Per-BS physical parameters resolved from a config document.
struct BsConfig {
    ServerSpec servers;
    RadioConfig radio;
    double static_min_w = 100.0;   // active static draw at the window edges
    double static_max_w = 2900.0;  // active static draw at solar noon
    double ren_max_kwh = 1.36;     // per-slot renewable generation capacity
    int day_start_slot = 20;
    int day_len_slots = 56;
};

BsConfig resolve_bs_config(const Config& cfg, int bs_id);
CostRates resolve_cost_rates(const Config& cfg);

// Runs the state-space generation pass: per-slot demand from the energy
// model, renewable totals from the solar trace, and the two cost fields.
// Missing (bs, slot) coverage means zero tasks / zero generation.
StateTable build_state_space(const std::vector<TaskEvent>& tasks,
                             const std::vector<SolarSample>& solar,
                             int n_bs, int n_slots,
                             const Config& cfg);

// Task counts per (bs, slot), used by the step loop and packing baselines.
std::vector<int> task_counts(const std::vector<TaskEvent>& tasks, int n_bs, int n_slots);

// Per-task energy quanta (kWh) for one (bs, slot): each task's share of the
// dynamic MEC draw plus its own network transfer energy.
std::vector<double> per_task_energy_kwh(const std::vector<const TaskEvent*>& slot_tasks,
                                        const BsConfig& bc);

// Extracts one day as a fresh 96-slot table (slot indices rebased to 0..95).
StateTable slice_day(const StateTable& table, int day);

// Regime split. Asymmetric joins test-day generation with train-day demand
// and recomputes the cost fields after the join.
std::pair<StateTable, StateTable> split_regime(const StateTable& table,
                                               const RegimeSpec& spec,
                                               const CostRates& rates);

} // namespace dispatchd
