#pragma once

#include <atomic>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dispatchd/dispatch.hpp"
#include "dispatchd/tensor.hpp"
#include "dispatchd/trace.hpp"

namespace dispatchd {

// Binary dispatch action: which source covers the slot imbalance.
inline constexpr int kActionNonRenewable = 0;
inline constexpr int kActionStore = 1;

// Width of the local agent's input vector: (cur_reward, cur_action) feedback
// plus a five-value clock encoding of the slot index.
inline constexpr int kLocalInputDim = 7;
// Width of the 6-field observation fed to the meta-agent.
inline constexpr int kObservationDim = 6;

// Thrown when training hits a non-finite loss; the CLI maps it to exit 3.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The 6-field local-to-meta message.
struct Observation {
    double next_reward = 0.0;  // r at the slot just finished (t')
    double cur_reward = 0.0;   // r at the previous slot (t)
    int cur_action = 0;
    int next_action = 0;
    int next_slot = 0;         // t'
    double td_error = 0.0;     // one-step TD residual of slot t

    Vec to_vec(int slots_per_day) const {
        return {next_reward,
                cur_reward,
                static_cast<double>(cur_action),
                static_cast<double>(next_action),
                static_cast<double>(next_slot) / slots_per_day,
                td_error};
    }
};

// The meta-to-local recurrent-state transfer: 48 cell + 48 hidden values.
struct ParamPacket {
    Vec cell_state;
    Vec hidden_state;
    int source = 0;      // meta-agent id (single meta-agent: 0)
    long long epoch = 0; // (episode, slot) tag packed by the trainer
};

struct LocalAgent {
    int bs_id = 0;
    AgentNet net;            // input (cur_reward, cur_action, next_slot)
    LstmState state;
    AdamState opt;
    std::mt19937_64 rng;
    double gamma = 0.9;
};

struct MetaAgent {
    AgentNet net;                    // input: the 6-field observation
    std::vector<LstmState> states;   // one recurrent stream per local agent
    AdamState opt;
    double beta = 0.05;
    double gamma = 0.9;
};

// One committed (per-slot) entry of the episode log.
struct EpisodeRow {
    int episode = 0;
    int bs_id = 0;
    int slot = 0;
    int action = 0;
    double reward = 0.0;
    double value = 0.0;
    double advantage = 0.0;
    double ren_kwh = 0.0;
    double non_kwh = 0.0;
    double sto_kwh = 0.0;
};

struct EpisodeLog {
    std::vector<EpisodeRow> rows;
    std::vector<double> episode_rewards;  // mean committed reward across agents
    std::vector<double> policy_losses;
    std::vector<double> value_losses;
};

void write_episode_log(const std::string& path, const EpisodeLog& log);

// ---- per-slot operations --------------------------------------------------

// Supply-demand-ratio reward: 1 iff renewable strictly exceeds demand.
// At zero demand the ratio is undefined; surplus (ren > 0) still earns 1.
int reward(double ren_kwh, double demand_kwh);

// Ground-truth action implied by the reward branch condition.
int ground_truth_action(double gen_kwh, double demand_kwh);

// Training reward used by every learner in the environment: 1 iff the chosen
// action names the source the realized imbalance actually requires.
int env_reward(int action, double gen_kwh, double demand_kwh);

// Billed slot cost under the action-aware accounting: committing the full
// generation always costs c_ren*gen; the imbalance is billed at its proper
// rate when the scheduled source is right and at c_non + c_sto when the
// mis-scheduled source cycles while the proper one covers.
double billed_cost(int action, double gen_kwh, double demand_kwh, const CostRates& rates);

double discounted_return(const std::vector<double>& rewards, double gamma);

double advantage(double r, double v_next, double v_cur, double gamma);

struct TdSample {
    double r = 0.0;
    double v_next = 0.0;
    double v_cur = 0.0;
};

// Mean over the batch of 1/2 * ((r + gamma*v_next) - v_cur)^2.
double value_loss(const std::vector<TdSample>& batch, double gamma);

struct PolicySample {
    Vec probs;
    int action = 0;
    double advantage = 0.0;  // detached
};

// -E[log pi(a) * advantage + beta * h(pi)].
double policy_entropy_loss(const std::vector<PolicySample>& batch, double beta);

// Gradient of policy_entropy_loss w.r.t. the policy logits of one sample
// (already divided by the batch size n).
Vec policy_loss_dlogits(const PolicySample& s, double beta, std::size_t n);

// Joint (shared-reward) advantage: r + gamma*v_next[i] - v_cur[i] per agent.
std::vector<double> joint_advantage(const std::vector<double>& v_cur,
                                    const std::vector<double>& v_next,
                                    double joint_reward, double gamma);

// ---- meta exchange --------------------------------------------------------

struct MetaStepResult {
    std::vector<Vec> policies;        // pi* per observation
    std::vector<ParamPacket> packets; // one per observation
};

// Runs the meta LSTM over one slot's observations (one per agent, indexed by
// position) and returns the per-agent policies and recurrent-state packets.
// Forward only; the trainer owns the meta update.
MetaStepResult meta_step(const std::vector<Observation>& observations, MetaAgent& meta,
                         int slots_per_day, Tape* tape);

// Replaces the agent's recurrent state with the packet contents. Dense-head
// parameters are untouched by contract.
void apply_param_packet(LocalAgent& agent, const ParamPacket& packet);

// ---- training / evaluation ------------------------------------------------

struct TrainConfig {
    int episodes = 200;
    double gamma = 0.9;
    double beta = 0.05;
    double lr = 0.001;
    int lstm_units = 48;
    int step_cap = 32;
    int slots_per_day = kSlotsPerDay;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string diagnostic_checkpoint;  // written on NaN abort when set
    // Optional cooperative stop (e.g. Ctrl-C): checked between episodes.
    const std::atomic<bool>* stop_flag = nullptr;
};

TrainConfig train_config_from(const Config& cfg);

struct ProtocolStats {
    // Per (slot, agent) counts for the last trained episode.
    std::vector<std::vector<int>> observations_sent;
    std::vector<std::vector<int>> packets_received;
    long long total_observations = 0;
    long long total_packets = 0;
};

struct TrainResult {
    std::vector<LocalAgent> agents;
    MetaAgent meta;
    EpisodeLog log;
    ProtocolStats protocol;
};

// Meta-exchange training loop over the given day table. `counts` holds the
// per-(bs, slot) task counts driving the step loop (empty means one step per
// slot).
TrainResult train(const StateTable& day, const std::vector<int>& counts,
                  const CostRates& rates, const TrainConfig& cfg);

struct EvalResult {
    std::vector<int> actions;          // bs-major: actions[bs*T + t]
    std::vector<EpisodeRow> rows;
    double total_billed_usd = 0.0;
    double ren_kwh = 0.0;
    double non_kwh = 0.0;
    double sto_kwh = 0.0;
    double accuracy = 0.0;             // vs ground_truth_action
    double mean_episode_reward = 0.0;  // env rewards, mean across agents
};

// Greedy (argmax) evaluation of trained agents on a day table. Ties at
// [0.5, 0.5] resolve to non-renewable, the demand-safe action. When `meta`
// is given the full exchange protocol runs exactly as in training (packet
// replaces the recurrent state at each slot boundary); `counts` drives the
// same clamped step loop, empty meaning one step per slot.
EvalResult evaluate(std::vector<LocalAgent>& agents, MetaAgent* meta,
                    const std::vector<int>& counts, const StateTable& day,
                    const CostRates& rates, int step_cap = 32);

EvalResult evaluate(std::vector<LocalAgent>& agents, const StateTable& day,
                    const CostRates& rates);

} // namespace dispatchd
