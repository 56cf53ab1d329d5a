#include "dispatchd/mamrl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "dispatchd/csv.hpp"

namespace dispatchd {

void write_episode_log(const std::string& path, const EpisodeLog& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "episode,bs_id,slot,action,reward,value,advantage,ren_kwh,non_kwh,sto_kwh\n";
    for (const auto& r : log.rows) {
        out << r.episode << ',' << r.bs_id << ',' << r.slot << ',' << r.action << ','
            << csv::format_double(r.reward) << ',' << csv::format_double(r.value) << ','
            << csv::format_double(r.advantage) << ',' << csv::format_double(r.ren_kwh) << ','
            << csv::format_double(r.non_kwh) << ',' << csv::format_double(r.sto_kwh) << '\n';
    }
}

namespace {

// Local-agent input: reward/action feedback plus a clock. The slot index is
// encoded both linearly and as two cyclic harmonics so the policy can carve
// out sharp time-of-day boundaries instead of only reacting to the previous
// slot's reward.
Vec local_input(double prev_reward, int prev_action, int t, int slots_per_day) {
    const double ph = 2.0 * M_PI * t / slots_per_day;
    return {prev_reward,
            static_cast<double>(prev_action),
            static_cast<double>(t) / slots_per_day,
            std::sin(ph),
            std::cos(ph),
            std::sin(4.0 * ph),
            std::cos(4.0 * ph)};
}

} // namespace

int reward(double ren_kwh, double demand_kwh) {
    if (demand_kwh <= 0.0) return ren_kwh > 0.0 ? 1 : 0;
    return ren_kwh / demand_kwh > 1.0 ? 1 : 0;
}

int ground_truth_action(double gen_kwh, double demand_kwh) {
    return reward(gen_kwh, demand_kwh) == 1 ? kActionStore : kActionNonRenewable;
}

int env_reward(int action, double gen_kwh, double demand_kwh) {
    return action == ground_truth_action(gen_kwh, demand_kwh) ? 1 : 0;
}

double billed_cost(int action, double gen_kwh, double demand_kwh, const CostRates& rates) {
    const double imbalance = std::abs(gen_kwh - demand_kwh);
    const double proper = gen_kwh > demand_kwh ? rates.c_sto : rates.c_non;
    const double rate = action == ground_truth_action(gen_kwh, demand_kwh)
                            ? proper
                            : rates.c_non + rates.c_sto;
    return rates.c_ren * gen_kwh + rate * imbalance;
}

double discounted_return(const std::vector<double>& rewards, double gamma) {
    double acc = 0.0;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        acc = rewards[i] + gamma * acc;
    }
    return acc;
}

double advantage(double r, double v_next, double v_cur, double gamma) {
    return r + gamma * v_next - v_cur;
}

double value_loss(const std::vector<TdSample>& batch, double gamma) {
    if (batch.empty()) throw std::invalid_argument("value_loss: empty batch");
    double total = 0.0;
    for (const auto& s : batch) {
        const double td = s.r + gamma * s.v_next - s.v_cur;
        total += 0.5 * td * td;
    }
    return total / static_cast<double>(batch.size());
}

double policy_entropy_loss(const std::vector<PolicySample>& batch, double beta) {
    if (batch.empty()) throw std::invalid_argument("policy_entropy_loss: empty batch");
    double total = 0.0;
    for (const auto& s : batch) {
        const double logp = std::log(std::max(s.probs[s.action], 1e-300));
        total += logp * s.advantage + beta * entropy(s.probs);
    }
    return -total / static_cast<double>(batch.size());
}

Vec policy_loss_dlogits(const PolicySample& s, double beta, std::size_t n) {
    // d/dz of -(log pi(a) * adv + beta*h) / n.
    Vec d(s.probs.size());
    const Vec hg = entropy_grad_logits(s.probs);
    for (std::size_t k = 0; k < s.probs.size(); ++k) {
        const double dlogp = (k == static_cast<std::size_t>(s.action) ? 1.0 : 0.0) - s.probs[k];
        d[k] = -(dlogp * s.advantage + beta * hg[k]) / static_cast<double>(n);
    }
    return d;
}

std::vector<double> joint_advantage(const std::vector<double>& v_cur,
                                    const std::vector<double>& v_next,
                                    double joint_reward, double gamma) {
    if (v_cur.size() != v_next.size() || v_cur.empty()) {
        throw std::invalid_argument("joint_advantage: need matching value reports for every agent");
    }
    std::vector<double> out(v_cur.size());
    for (std::size_t i = 0; i < v_cur.size(); ++i) {
        out[i] = joint_reward + gamma * v_next[i] - v_cur[i];
    }
    return out;
}

MetaStepResult meta_step(const std::vector<Observation>& observations, MetaAgent& meta,
                         int slots_per_day, Tape* tape) {
    MetaStepResult res;
    if (meta.states.size() < observations.size()) {
        meta.states.resize(observations.size(), LstmState(meta.net.hidden()));
    }
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const Vec x = observations[i].to_vec(slots_per_day);
        if (static_cast<int>(x.size()) != meta.net.in_dim()) {
            throw std::invalid_argument("meta_step: observation arity mismatch");
        }
        Tape throwaway;
        Tape& t = tape ? *tape : throwaway;
        // Streams from different agents interleave in the shared tape, so
        // every entry is its own BPTT segment here; the trainer keeps
        // per-agent tapes when it needs full sequences.
        StepOut out = net_forward(meta.net, x, meta.states[i], t, true);
        res.policies.push_back(out.probs);
        ParamPacket pkt;
        pkt.cell_state = meta.states[i].c;
        pkt.hidden_state = meta.states[i].h;
        res.packets.push_back(std::move(pkt));
    }
    return res;
}

void apply_param_packet(LocalAgent& agent, const ParamPacket& packet) {
    if (packet.cell_state.size() != agent.state.c.size() ||
        packet.hidden_state.size() != agent.state.h.size()) {
        throw std::invalid_argument("apply_param_packet: dimension mismatch");
    }
    agent.state.c = packet.cell_state;
    agent.state.h = packet.hidden_state;
}

TrainConfig train_config_from(const Config& cfg) {
    TrainConfig tc;
    tc.episodes = static_cast<int>(cfg.get_int("episodes", tc.episodes));
    tc.gamma = cfg.get_double("gamma", tc.gamma);
    tc.beta = cfg.get_double("beta", tc.beta);
    tc.lr = cfg.get_double("lr", tc.lr);
    tc.lstm_units = static_cast<int>(cfg.get_int("lstm_units", tc.lstm_units));
    tc.step_cap = static_cast<int>(cfg.get_int("step_cap", tc.step_cap));
    tc.slots_per_day = static_cast<int>(cfg.get_int("slots_per_day", tc.slots_per_day));
    tc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
    tc.workers = static_cast<int>(cfg.get_int("workers", 1));
    return tc;
}

namespace {

// Per-agent bookkeeping for the slot whose TD target is still pending.
struct PendingSlot {
    bool present = false;
    int slot = 0;
    Tape tape;
    std::vector<int> actions;
    std::vector<double> rewards;
    int committed_action = 0;
    double committed_reward = 0.0;
    double committed_value = 0.0;
};

struct AgentScratch {
    PendingSlot pending;
    double prev_reward = 0.0;   // last committed (r, a) fed back as input
    int prev_action = 0;
    double prev_committed_value = 0.0;
    int prev_committed_action = 0;
    double prev_committed_reward = 0.0;
    double last_td = 0.0;
    double episode_reward = 0.0;
    // Accumulated surrogate losses for NaN detection / logging.
    double policy_loss = 0.0;
    double value_loss = 0.0;
};

// Finalizes one pending slot once the bootstrap value is known, producing
// gradients and one Adam update, and returns the last step's TD error.
double finalize_slot(LocalAgent& agent, PendingSlot& ps, double bootstrap_value,
                     const TrainConfig& cfg, AgentScratch& scratch, EpisodeLog* log,
                     int episode, const SlotRecord& rec, const CostRates& rates) {
    const std::size_t n = ps.tape.size();
    std::vector<Vec> dlogits(n);
    std::vector<double> dvalue(n);
    double last_td = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const double v_next = s + 1 < n ? ps.tape.values[s + 1] : bootstrap_value;
        const double td = advantage(ps.rewards[s], v_next, ps.tape.values[s], cfg.gamma);
        if (s + 1 == n) last_td = td;
        const double w = std::pow(cfg.gamma, static_cast<double>(s));
        PolicySample sample{ps.tape.probs[s], ps.actions[s], td};
        dlogits[s] = policy_loss_dlogits(sample, cfg.beta, n);
        for (double& d : dlogits[s]) d *= w;
        dvalue[s] = (ps.tape.values[s] - (ps.rewards[s] + cfg.gamma * v_next)) /
                    static_cast<double>(n);
        scratch.policy_loss += w * policy_entropy_loss({sample}, cfg.beta) / n;
        scratch.value_loss += value_loss({{ps.rewards[s], v_next, ps.tape.values[s]}}, cfg.gamma) / n;
    }
    if (!std::isfinite(scratch.policy_loss) || !std::isfinite(scratch.value_loss)) {
        throw numeric_error("non-finite loss at episode " + std::to_string(episode) +
                            " slot " + std::to_string(ps.slot));
    }
    AgentNet grads(agent.net.in_dim(), agent.net.hidden(), agent.net.n_actions());
    net_backward(agent.net, ps.tape, dlogits, dvalue, grads);
    AdamConfig ac;
    ac.lr = cfg.lr;
    adam_step(agent.net.blocks(), static_cast<const AgentNet&>(grads).blocks(), agent.opt, ac);

    if (log) {
        const Recourse rc = second_stage_recourse(rec.renewable_kwh, rec.demand_kwh, rates);
        EpisodeRow row;
        row.episode = episode;
        row.bs_id = agent.bs_id;
        row.slot = ps.slot;
        row.action = ps.committed_action;
        row.reward = ps.committed_reward;
        row.value = ps.committed_value;
        row.advantage = last_td;
        row.ren_kwh = rec.renewable_kwh;
        row.non_kwh = rc.non_kwh;
        row.sto_kwh = rc.sto_kwh;
        log->rows.push_back(row);
    }
    ps.present = false;
    ps.tape.clear();
    ps.actions.clear();
    ps.rewards.clear();
    return last_td;
}

} // namespace

TrainResult train(const StateTable& day, const std::vector<int>& counts,
                  const CostRates& rates, const TrainConfig& cfg) {
    const int n_agents = day.n_bs;
    const int T = std::min(cfg.slots_per_day, day.n_slots);
    // Local input: (cur_reward, cur_action, clock features); see local_input.
    constexpr int kLocalIn = kLocalInputDim;
    constexpr int kObsIn = kObservationDim;

    TrainResult result;
    for (int i = 0; i < n_agents; ++i) {
        LocalAgent a;
        a.bs_id = i;
        a.net = AgentNet::init(kLocalIn, cfg.lstm_units, 2, cfg.seed * 7919 + 13 + i);
        a.state = LstmState(cfg.lstm_units);
        a.rng.seed(cfg.seed * 104729 + 1000 + i);
        a.gamma = cfg.gamma;
        result.agents.push_back(std::move(a));
    }
    result.meta.net = AgentNet::init(kObsIn, cfg.lstm_units, 2, cfg.seed * 7919 + 7);
    result.meta.beta = cfg.beta;
    result.meta.gamma = cfg.gamma;
    result.meta.states.assign(n_agents, LstmState(cfg.lstm_units));

    result.protocol.observations_sent.assign(T, std::vector<int>(n_agents, 0));
    result.protocol.packets_received.assign(T, std::vector<int>(n_agents, 0));

    std::vector<AgentScratch> scratch(n_agents);
    // Meta training tapes: one recurrent stream per agent, rebuilt per episode.
    std::vector<Tape> meta_tapes(n_agents);
    std::vector<std::vector<Observation>> meta_inputs(n_agents);

    const bool last_episode_counts_protocol = true;

    try {
    for (int episode = 0; episode < cfg.episodes; ++episode) {
        if (cfg.stop_flag && cfg.stop_flag->load()) break;
        const bool count_protocol = last_episode_counts_protocol && episode == cfg.episodes - 1;
        for (int i = 0; i < n_agents; ++i) {
            result.agents[i].state = LstmState(cfg.lstm_units);
            scratch[i] = AgentScratch{};
            meta_tapes[i].clear();
            meta_inputs[i].clear();
        }
        result.meta.states.assign(n_agents, LstmState(cfg.lstm_units));
        std::vector<ParamPacket> pending_packets(n_agents);
        std::vector<bool> have_packet(n_agents, false);

        for (int t = 0; t < T; ++t) {
            auto run_agent = [&](int i) {
                LocalAgent& agent = result.agents[i];
                AgentScratch& sc = scratch[i];
                const SlotRecord& rec = day.at(i, t);
                if (have_packet[i]) {
                    apply_param_packet(agent, pending_packets[i]);
                }
                int n_steps = 1;
                if (!counts.empty()) {
                    const int c = counts[static_cast<std::size_t>(i) * day.n_slots + t];
                    n_steps = std::clamp(c, 1, cfg.step_cap);
                }
                PendingSlot next;
                next.present = true;
                next.slot = t;
                const Vec x =
                    local_input(sc.prev_reward, sc.prev_action, t, cfg.slots_per_day);
                double first_value = 0.0;
                for (int s = 0; s < n_steps; ++s) {
                    StepOut out = net_forward(agent.net, x, agent.state, next.tape, s == 0);
                    if (s == 0) first_value = out.value;
                    std::discrete_distribution<int> pick(out.probs.begin(), out.probs.end());
                    const int a = pick(agent.rng);
                    next.actions.push_back(a);
                    next.rewards.push_back(env_reward(a, rec.renewable_kwh, rec.demand_kwh));
                }
                // The slot's committed decision is the step loop's last refinement.
                next.committed_action = next.actions.back();
                next.committed_reward = next.rewards.back();
                next.committed_value = next.tape.values.back();

                if (sc.pending.present) {
                    const SlotRecord& prev_rec = day.at(i, sc.pending.slot);
                    sc.last_td = finalize_slot(agent, sc.pending, first_value, cfg, sc,
                                               episode == cfg.episodes - 1 ? &result.log : nullptr,
                                               episode, prev_rec, rates);
                }
                sc.prev_committed_value = next.committed_value;
                sc.episode_reward += next.committed_reward;
                sc.prev_committed_action = sc.prev_action;
                sc.prev_committed_reward = sc.prev_reward;
                sc.prev_reward = next.committed_reward;
                sc.prev_action = next.committed_action;
                sc.pending = std::move(next);
            };
            if (cfg.workers > 1 && n_agents > 1) {
                std::vector<std::thread> pool;
                const int width = std::min(cfg.workers, n_agents);
                for (int w = 0; w < width; ++w) {
                    pool.emplace_back([&, w]() {
                        for (int i = w; i < n_agents; i += width) run_agent(i);
                    });
                }
                for (auto& th : pool) th.join();
            } else {
                for (int i = 0; i < n_agents; ++i) run_agent(i);
            }

            // Upward leg: one observation per agent for this slot.
            std::vector<Observation> obs(n_agents);
            for (int i = 0; i < n_agents; ++i) {
                AgentScratch& sc = scratch[i];
                Observation o;
                o.next_reward = sc.pending.committed_reward;
                o.cur_reward = sc.prev_committed_reward;
                o.cur_action = sc.prev_committed_action;
                o.next_action = sc.pending.committed_action;
                o.next_slot = t;
                o.td_error = sc.last_td;
                obs[i] = o;
                meta_inputs[i].push_back(o);
                if (count_protocol) ++result.protocol.observations_sent[t][i];
                ++result.protocol.total_observations;
            }
            // Meta forward + downward leg: one packet per agent, applied at
            // the next slot boundary.
            for (int i = 0; i < n_agents; ++i) {
                const Vec x = obs[i].to_vec(cfg.slots_per_day);
                net_forward(result.meta.net, x, result.meta.states[i], meta_tapes[i],
                            meta_tapes[i].size() == 0);
                ParamPacket pkt;
                pkt.cell_state = result.meta.states[i].c;
                pkt.hidden_state = result.meta.states[i].h;
                pkt.epoch = static_cast<long long>(episode) * T + t;
                pending_packets[i] = std::move(pkt);
                have_packet[i] = true;
                if (count_protocol) ++result.protocol.packets_received[t][i];
                ++result.protocol.total_packets;
            }
        }

        // Episode end: the last slot bootstraps with value 0.
        for (int i = 0; i < n_agents; ++i) {
            AgentScratch& sc = scratch[i];
            if (sc.pending.present) {
                const SlotRecord& prev_rec = day.at(i, sc.pending.slot);
                sc.last_td = finalize_slot(result.agents[i], sc.pending, 0.0, cfg, sc,
                                           episode == cfg.episodes - 1 ? &result.log : nullptr,
                                           episode, prev_rec, rates);
            }
        }

        // Meta update: surrogate loss over the episode's observation streams.
        {
            AgentNet meta_grads(kObsIn, cfg.lstm_units, 2);
            double meta_loss = 0.0;
            std::size_t n_obs = 0;
            for (int i = 0; i < n_agents; ++i) n_obs += meta_tapes[i].size();
            for (int i = 0; i < n_agents; ++i) {
                Tape& tape = meta_tapes[i];
                std::vector<Vec> dlogits(tape.size());
                std::vector<double> dvalue(tape.size());
                for (std::size_t s = 0; s < tape.size(); ++s) {
                    const Observation& o = meta_inputs[i][s];
                    PolicySample sample{tape.probs[s], o.next_action, o.td_error};
                    dlogits[s] = policy_loss_dlogits(sample, cfg.beta, n_obs);
                    dvalue[s] = (tape.values[s] - o.next_reward) / static_cast<double>(n_obs);
                    meta_loss += policy_entropy_loss({sample}, cfg.beta) / n_obs;
                    const double verr = tape.values[s] - o.next_reward;
                    meta_loss += 0.5 * verr * verr / n_obs;
                }
                net_backward(result.meta.net, tape, dlogits, dvalue, meta_grads);
            }
            if (!std::isfinite(meta_loss)) {
                throw numeric_error("non-finite meta loss at episode " + std::to_string(episode));
            }
            AdamConfig ac;
            ac.lr = cfg.lr;
            adam_step(result.meta.net.blocks(),
                      static_cast<const AgentNet&>(meta_grads).blocks(), result.meta.opt, ac);
        }

        double mean_reward = 0.0, mean_ploss = 0.0, mean_vloss = 0.0;
        for (int i = 0; i < n_agents; ++i) {
            mean_reward += scratch[i].episode_reward;
            mean_ploss += scratch[i].policy_loss;
            mean_vloss += scratch[i].value_loss;
        }
        result.log.episode_rewards.push_back(mean_reward / n_agents);
        result.log.policy_losses.push_back(mean_ploss / n_agents);
        result.log.value_losses.push_back(mean_vloss / n_agents);
    }
    } catch (const numeric_error&) {
        if (!cfg.diagnostic_checkpoint.empty()) {
            std::vector<std::pair<std::string, const AgentNet*>> nets;
            for (const auto& a : result.agents) {
                nets.emplace_back("agent" + std::to_string(a.bs_id), &a.net);
            }
            nets.emplace_back("meta", &result.meta.net);
            save_checkpoint(cfg.diagnostic_checkpoint, nets);
        }
        throw;
    }
    return result;
}

EvalResult evaluate(std::vector<LocalAgent>& agents, MetaAgent* meta,
                    const std::vector<int>& counts, const StateTable& day,
                    const CostRates& rates, int step_cap) {
    EvalResult res;
    const int n_agents = static_cast<int>(agents.size());
    const int T = day.n_slots;
    res.actions.assign(static_cast<std::size_t>(n_agents) * T, 0);
    res.rows.resize(static_cast<std::size_t>(n_agents) * T);
    int correct = 0;

    // Per-agent greedy walk, slot-major so the meta exchange interleaves the
    // same way it does in training.
    struct Walk {
        double prev_reward = 0.0;  // committed reward of the previous slot
        int prev_action = 0;
        double prev_value = 0.0;   // committed value of the previous slot
        double last_td = 0.0;
        std::size_t prev_row = 0;
        bool has_prev = false;
    };
    std::vector<Walk> walks(n_agents);
    for (auto& a : agents) a.state = LstmState(a.net.hidden());
    if (meta) meta->states.assign(n_agents, LstmState(meta->net.hidden()));
    std::vector<ParamPacket> packets(n_agents);
    std::vector<bool> have_packet(n_agents, false);

    for (int t = 0; t < T; ++t) {
        std::vector<Observation> obs(n_agents);
        for (int i = 0; i < n_agents; ++i) {
            LocalAgent& agent = agents[i];
            Walk& w = walks[i];
            const SlotRecord& rec = day.at(i, t);
            if (meta && have_packet[i]) apply_param_packet(agent, packets[i]);

            int n_steps = 1;
            if (!counts.empty()) {
                const int c = counts[static_cast<std::size_t>(i) * T + t];
                n_steps = std::clamp(c, 1, step_cap);
            }
            const Vec x = local_input(w.prev_reward, w.prev_action, t, kSlotsPerDay);
            double first_value = 0.0;
            int action = 0;
            double value = 0.0;
            for (int s = 0; s < n_steps; ++s) {
                Tape tape;
                StepOut out = net_forward(agent.net, x, agent.state, tape, s == 0);
                if (s == 0) first_value = out.value;
                action = 0;
                for (std::size_t k = 1; k < out.probs.size(); ++k) {
                    if (out.probs[k] > out.probs[action]) action = static_cast<int>(k);
                }
                value = out.value;
            }
            const int r = env_reward(action, rec.renewable_kwh, rec.demand_kwh);
            const Recourse rc = second_stage_recourse(rec.renewable_kwh, rec.demand_kwh, rates);

            res.actions[static_cast<std::size_t>(i) * T + t] = action;
            if (action == ground_truth_action(rec.renewable_kwh, rec.demand_kwh)) ++correct;
            res.total_billed_usd += billed_cost(action, rec.renewable_kwh, rec.demand_kwh, rates);
            res.ren_kwh += rec.renewable_kwh - rc.sto_kwh;
            res.non_kwh += rc.non_kwh;
            res.sto_kwh += rc.sto_kwh;
            res.mean_episode_reward += r;

            if (w.has_prev) {
                // TD of the previous slot, finalized against this slot's
                // first value, exactly as the trainer does it.
                w.last_td = advantage(w.prev_reward, first_value, w.prev_value, agent.gamma);
                res.rows[w.prev_row].advantage = w.last_td;
            }

            EpisodeRow row;
            row.episode = 0;
            row.bs_id = i;
            row.slot = t;
            row.action = action;
            row.reward = r;
            row.value = value;
            row.advantage = 0.0;
            row.ren_kwh = rec.renewable_kwh;
            row.non_kwh = rc.non_kwh;
            row.sto_kwh = rc.sto_kwh;
            res.rows[static_cast<std::size_t>(i) * T + t] = row;

            Observation o;
            o.next_reward = r;
            o.cur_reward = w.prev_reward;
            o.cur_action = w.prev_action;
            o.next_action = action;
            o.next_slot = t;
            o.td_error = w.last_td;
            obs[i] = o;

            w.prev_row = static_cast<std::size_t>(i) * T + t;
            w.has_prev = true;
            w.prev_reward = r;
            w.prev_action = action;
            w.prev_value = value;
        }
        if (meta) {
            for (int i = 0; i < n_agents; ++i) {
                const Vec x = obs[i].to_vec(kSlotsPerDay);
                Tape scratch;
                net_forward(meta->net, x, meta->states[i], scratch, true);
                ParamPacket pkt;
                pkt.cell_state = meta->states[i].c;
                pkt.hidden_state = meta->states[i].h;
                pkt.epoch = t;
                packets[i] = std::move(pkt);
                have_packet[i] = true;
            }
        }
    }
    res.accuracy = static_cast<double>(correct) / (static_cast<double>(n_agents) * T);
    res.mean_episode_reward /= static_cast<double>(n_agents);
    return res;
}

EvalResult evaluate(std::vector<LocalAgent>& agents, const StateTable& day,
                    const CostRates& rates) {
    return evaluate(agents, nullptr, {}, day, rates);
}

} // namespace dispatchd
