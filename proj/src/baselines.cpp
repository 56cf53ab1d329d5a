#include "dispatchd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace dispatchd {

int BanditState::select() const {
    for (std::size_t a = 0; a < pulls.size(); ++a) {
        if (pulls[a] == 0) return static_cast<int>(a);
    }
    int best = 0;
    double best_score = -1e300;
    for (std::size_t a = 0; a < pulls.size(); ++a) {
        const double score = mean_reward[a] +
                             c * std::sqrt(std::log(static_cast<double>(total)) /
                                           static_cast<double>(pulls[a]));
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(a);
        }
    }
    return best;
}

void BanditState::update(int arm, double reward) {
    ++pulls[arm];
    ++total;
    mean_reward[arm] += (reward - mean_reward[arm]) / static_cast<double>(pulls[arm]);
}

PackResult pack_slot(const std::vector<double>& item_kwh, double budget_kwh,
                     PackHeuristic heuristic) {
    PackResult res;
    if (item_kwh.empty() || budget_kwh <= 0.0) {
        res.residual_kwh = std::accumulate(item_kwh.begin(), item_kwh.end(), 0.0);
        return res;
    }
    std::vector<double> items = item_kwh;
    if (heuristic == PackHeuristic::first_fit_decreasing) {
        std::sort(items.begin(), items.end(), std::greater<double>());
    }
    const std::size_t n_bins = items.size();
    const double cap = budget_kwh / static_cast<double>(n_bins);
    res.bins.assign(n_bins, Bin{cap, 0.0});

    std::size_t current = 0;  // next-fit cursor
    for (double item : items) {
        bool placed = false;
        if (heuristic == PackHeuristic::next_fit) {
            if (item <= cap + 1e-15) {
                while (current < n_bins) {
                    if (res.bins[current].fill_kwh + item <=
                        res.bins[current].capacity_kwh + 1e-15) {
                        res.bins[current].fill_kwh += item;
                        placed = true;
                        break;
                    }
                    ++current;  // a next-fit bin, once left, is never revisited
                }
            }
        } else {
            for (auto& bin : res.bins) {
                if (bin.fill_kwh + item <= bin.capacity_kwh + 1e-15) {
                    bin.fill_kwh += item;
                    placed = true;
                    break;
                }
            }
        }
        if (placed) {
            res.packed_kwh += item;
        } else {
            res.residual_kwh += item;
        }
    }
    return res;
}

MethodRun ucb_greedy(const StateTable& day, const CostRates& rates) {
    MethodRun run;
    run.method = "UCB";
    run.actions.assign(static_cast<std::size_t>(day.n_bs) * day.n_slots, 0);
    int correct = 0;
    for (int bs = 0; bs < day.n_bs; ++bs) {
        BanditState bandit(2);
        for (int t = 0; t < day.n_slots; ++t) {
            const SlotRecord& rec = day.at(bs, t);
            const int action = bandit.select();
            const int r = env_reward(action, rec.renewable_kwh, rec.demand_kwh);
            bandit.update(action, r);
            run.actions[static_cast<std::size_t>(bs) * day.n_slots + t] = action;
            if (action == ground_truth_action(rec.renewable_kwh, rec.demand_kwh)) ++correct;
            const Recourse rc = second_stage_recourse(rec.renewable_kwh, rec.demand_kwh, rates);
            run.billed_usd += billed_cost(action, rec.renewable_kwh, rec.demand_kwh, rates);
            run.ren_kwh += rec.renewable_kwh - rc.sto_kwh;
            run.non_kwh += rc.non_kwh;
            run.sto_kwh += rc.sto_kwh;
        }
    }
    run.accuracy = static_cast<double>(correct) /
                   (static_cast<double>(day.n_bs) * day.n_slots);
    return run;
}

MethodRun packing_baseline(PackHeuristic heuristic, const StateTable& day,
                           const std::vector<TaskEvent>& day_tasks, const Config& cfg,
                           const CostRates& rates) {
    MethodRun run;
    switch (heuristic) {
        case PackHeuristic::next_fit: run.method = "NextFit"; break;
        case PackHeuristic::first_fit: run.method = "FirstFit"; break;
        case PackHeuristic::first_fit_decreasing: run.method = "FirstFitDecreasing"; break;
    }
    std::vector<std::vector<const TaskEvent*>> by_cell(
        static_cast<std::size_t>(day.n_bs) * day.n_slots);
    for (const auto& e : day_tasks) {
        if (e.bs_id < day.n_bs && e.slot < day.n_slots) {
            by_cell[static_cast<std::size_t>(e.bs_id) * day.n_slots + e.slot].push_back(&e);
        }
    }
    for (int bs = 0; bs < day.n_bs; ++bs) {
        const BsConfig bc = resolve_bs_config(cfg, bs);
        for (int t = 0; t < day.n_slots; ++t) {
            const SlotRecord& rec = day.at(bs, t);
            const auto& cell = by_cell[static_cast<std::size_t>(bs) * day.n_slots + t];
            const std::vector<double> items = per_task_energy_kwh(cell, bc);
            const PackResult pr = pack_slot(items, rec.renewable_kwh, heuristic);
            const double served = std::min(pr.packed_kwh, rec.demand_kwh);
            const double non = rec.demand_kwh - served;
            const double sto = rec.renewable_kwh - served;
            run.ren_kwh += served;
            run.non_kwh += non;
            run.sto_kwh += sto;
            run.billed_usd += rates.c_ren * served + rates.c_non * non + rates.c_sto * sto;
        }
    }
    return run;
}

namespace {

// Builds the concatenated state vector for the centralized learners:
// (demand, renewable, storage cost, non-renewable cost) per station.
Vec joint_state(const StateTable& day, int t) {
    Vec x;
    x.reserve(static_cast<std::size_t>(day.n_bs) * 4);
    for (int bs = 0; bs < day.n_bs; ++bs) {
        const SlotRecord& rec = day.at(bs, t);
        x.push_back(rec.demand_kwh);
        x.push_back(rec.renewable_kwh);
        x.push_back(rec.storage_cost_usd);
        x.push_back(rec.nonrenewable_cost_usd);
    }
    return x;
}

MethodRun score_actions(const std::string& method, const StateTable& day,
                        const std::vector<int>& actions, const CostRates& rates) {
    MethodRun run;
    run.method = method;
    run.actions = actions;
    int correct = 0;
    for (int bs = 0; bs < day.n_bs; ++bs) {
        for (int t = 0; t < day.n_slots; ++t) {
            const SlotRecord& rec = day.at(bs, t);
            const int action = actions[static_cast<std::size_t>(bs) * day.n_slots + t];
            if (action == ground_truth_action(rec.renewable_kwh, rec.demand_kwh)) ++correct;
            const Recourse rc = second_stage_recourse(rec.renewable_kwh, rec.demand_kwh, rates);
            run.billed_usd += billed_cost(action, rec.renewable_kwh, rec.demand_kwh, rates);
            run.ren_kwh += rec.renewable_kwh - rc.sto_kwh;
            run.non_kwh += rc.non_kwh;
            run.sto_kwh += rc.sto_kwh;
        }
    }
    run.accuracy = static_cast<double>(correct) /
                   (static_cast<double>(day.n_bs) * day.n_slots);
    return run;
}

int argmax_pair(const Vec& probs) {
    return probs[1] > probs[0] ? 1 : 0;
}

} // namespace

MethodRun a2c_centralized(const StateTable& train_day, const StateTable& test_day,
                          const CostRates& rates, const TrainConfig& cfg) {
    const int B = train_day.n_bs;
    const int T = train_day.n_slots;
    const int in_dim = B * 4;
    AgentNet net = AgentNet::init(in_dim, cfg.lstm_units, 2 * B, cfg.seed * 31337 + 5);
    AdamState opt;
    AdamConfig ac;
    ac.lr = cfg.lr;
    std::mt19937_64 rng(cfg.seed * 31337 + 6);

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        LstmState state(cfg.lstm_units);
        Tape tape;
        std::vector<Vec> probs_per_bs(static_cast<std::size_t>(T) * B);
        std::vector<int> actions(static_cast<std::size_t>(T) * B);
        std::vector<double> rewards(static_cast<std::size_t>(T) * B);
        std::vector<Vec> logits_per_t(T);
        for (int t = 0; t < T; ++t) {
            tape.lstm_caches.emplace_back();
            state = lstm_forward(joint_state(train_day, t), state, net.lstm,
                                 &tape.lstm_caches.back());
            const Vec logits = dense_forward(state.h, net.policy);
            const double value = dense_forward(state.h, net.value)[0];
            tape.hiddens.push_back(state.h);
            tape.values.push_back(value);
            tape.probs.emplace_back();  // per-pair probabilities live below
            tape.segment_start.push_back(t == 0 ? 1 : 0);
            logits_per_t[t] = logits;
            for (int bs = 0; bs < B; ++bs) {
                const Vec pair = softmax({logits[2 * bs], logits[2 * bs + 1]});
                std::discrete_distribution<int> pick(pair.begin(), pair.end());
                const int a = pick(rng);
                const SlotRecord& rec = train_day.at(bs, t);
                probs_per_bs[static_cast<std::size_t>(t) * B + bs] = pair;
                actions[static_cast<std::size_t>(t) * B + bs] = a;
                rewards[static_cast<std::size_t>(t) * B + bs] =
                    env_reward(a, rec.renewable_kwh, rec.demand_kwh);
            }
        }
        std::vector<Vec> dlogits(T, Vec(2 * B, 0.0));
        std::vector<double> dvalue(T, 0.0);
        const std::size_t n_samples = static_cast<std::size_t>(T) * B;
        for (int t = 0; t < T; ++t) {
            const double v_next = t + 1 < T ? tape.values[t + 1] : 0.0;
            double mean_r = 0.0;
            for (int bs = 0; bs < B; ++bs) {
                mean_r += rewards[static_cast<std::size_t>(t) * B + bs];
            }
            mean_r /= B;
            for (int bs = 0; bs < B; ++bs) {
                const std::size_t k = static_cast<std::size_t>(t) * B + bs;
                const double adv = advantage(rewards[k], v_next, tape.values[t], cfg.gamma);
                PolicySample sample{probs_per_bs[k], actions[k], adv};
                const Vec d = policy_loss_dlogits(sample, cfg.beta, n_samples);
                dlogits[t][2 * bs] += d[0];
                dlogits[t][2 * bs + 1] += d[1];
            }
            dvalue[t] = (tape.values[t] - (mean_r + cfg.gamma * v_next)) / T;
        }
        AgentNet grads(in_dim, cfg.lstm_units, 2 * B);
        net_backward(net, tape, dlogits, dvalue, grads);
        adam_step(net.blocks(), static_cast<const AgentNet&>(grads).blocks(), opt, ac);
    }

    // Greedy evaluation on the test day.
    std::vector<int> actions(static_cast<std::size_t>(test_day.n_bs) * test_day.n_slots, 0);
    LstmState state(cfg.lstm_units);
    for (int t = 0; t < test_day.n_slots; ++t) {
        LstmCache cache;
        state = lstm_forward(joint_state(test_day, t), state, net.lstm, &cache);
        const Vec logits = dense_forward(state.h, net.policy);
        for (int bs = 0; bs < test_day.n_bs; ++bs) {
            const Vec pair = softmax({logits[2 * bs], logits[2 * bs + 1]});
            actions[static_cast<std::size_t>(bs) * test_day.n_slots + t] = argmax_pair(pair);
        }
    }
    return score_actions("A2C", test_day, actions, rates);
}

MethodRun a3c_multiagent(const StateTable& train_day, const StateTable& test_day,
                         const CostRates& rates, const TrainConfig& cfg) {
    const int B = train_day.n_bs;
    const int T = train_day.n_slots;
    constexpr int kLocalIn = 3;
    const int critic_in = B * 4 + B * 2;  // joint state plus policy summaries

    std::vector<AgentNet> actors;
    std::vector<AdamState> actor_opt(B);
    std::vector<std::mt19937_64> rngs;
    for (int i = 0; i < B; ++i) {
        actors.push_back(AgentNet::init(kLocalIn, cfg.lstm_units, 2, cfg.seed * 27644437 + i));
        rngs.emplace_back(cfg.seed * 27644437 + 500 + i);
    }
    AgentNet critic = AgentNet::init(critic_in, cfg.lstm_units, 2, cfg.seed * 27644437 + 999);
    AdamState critic_opt;
    AdamConfig ac;
    ac.lr = cfg.lr;

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        std::vector<Tape> tapes(B);
        std::vector<std::vector<int>> actions(B, std::vector<int>(T));
        std::vector<std::vector<double>> rewards(B, std::vector<double>(T));
        std::vector<std::vector<Vec>> probs(B, std::vector<Vec>(T));

        auto run_actor = [&](int i) {
            LstmState state(cfg.lstm_units);
            double prev_r = 0.0;
            int prev_a = 0;
            for (int t = 0; t < T; ++t) {
                const SlotRecord& rec = train_day.at(i, t);
                const Vec x{prev_r, static_cast<double>(prev_a),
                            static_cast<double>(t) / cfg.slots_per_day};
                StepOut out = net_forward(actors[i], x, state, tapes[i], t == 0);
                std::discrete_distribution<int> pick(out.probs.begin(), out.probs.end());
                const int a = pick(rngs[i]);
                actions[i][t] = a;
                probs[i][t] = out.probs;
                rewards[i][t] = env_reward(a, rec.renewable_kwh, rec.demand_kwh);
                prev_r = rewards[i][t];
                prev_a = a;
            }
        };
        if (cfg.workers > 1 && B > 1) {
            std::vector<std::thread> pool;
            const int width = std::min(cfg.workers, B);
            for (int w = 0; w < width; ++w) {
                pool.emplace_back([&, w]() {
                    for (int i = w; i < B; i += width) run_actor(i);
                });
            }
            for (auto& th : pool) th.join();
        } else {
            for (int i = 0; i < B; ++i) run_actor(i);
        }

        // Centralized critic pass over the joint trajectory.
        Tape critic_tape;
        LstmState cstate(cfg.lstm_units);
        for (int t = 0; t < T; ++t) {
            Vec x = joint_state(train_day, t);
            for (int i = 0; i < B; ++i) {
                x.push_back(probs[i][t][0]);
                x.push_back(probs[i][t][1]);
            }
            net_forward(critic, x, cstate, critic_tape, t == 0);
        }

        std::vector<double> joint_r(T, 0.0);
        for (int t = 0; t < T; ++t) {
            for (int i = 0; i < B; ++i) joint_r[t] += rewards[i][t];
            joint_r[t] /= B;
        }

        // Actor updates with the shared joint advantage.
        for (int i = 0; i < B; ++i) {
            std::vector<Vec> dlogits(T);
            std::vector<double> dvalue(T, 0.0);  // actors' value heads idle here
            for (int t = 0; t < T; ++t) {
                const double v_next = t + 1 < T ? critic_tape.values[t + 1] : 0.0;
                const double adv =
                    joint_advantage({critic_tape.values[t]}, {v_next}, joint_r[t], cfg.gamma)[0];
                PolicySample sample{probs[i][t], actions[i][t], adv};
                dlogits[t] = policy_loss_dlogits(sample, cfg.beta, static_cast<std::size_t>(T));
            }
            AgentNet grads(kLocalIn, cfg.lstm_units, 2);
            net_backward(actors[i], tapes[i], dlogits, dvalue, grads);
            adam_step(actors[i].blocks(), static_cast<const AgentNet&>(grads).blocks(),
                      actor_opt[i], ac);
        }
        // Critic update.
        {
            std::vector<Vec> dlogits(T, Vec(2, 0.0));
            std::vector<double> dvalue(T, 0.0);
            for (int t = 0; t < T; ++t) {
                const double v_next = t + 1 < T ? critic_tape.values[t + 1] : 0.0;
                dvalue[t] = (critic_tape.values[t] - (joint_r[t] + cfg.gamma * v_next)) / T;
            }
            AgentNet grads(critic_in, cfg.lstm_units, 2);
            net_backward(critic, critic_tape, dlogits, dvalue, grads);
            adam_step(critic.blocks(), static_cast<const AgentNet&>(grads).blocks(), critic_opt,
                      ac);
        }
    }

    // Decentralized greedy execution on the test day.
    std::vector<int> actions(static_cast<std::size_t>(test_day.n_bs) * test_day.n_slots, 0);
    for (int i = 0; i < test_day.n_bs; ++i) {
        LstmState state(cfg.lstm_units);
        double prev_r = 0.0;
        int prev_a = 0;
        for (int t = 0; t < test_day.n_slots; ++t) {
            const SlotRecord& rec = test_day.at(i, t);
            const Vec x{prev_r, static_cast<double>(prev_a),
                        static_cast<double>(t) / cfg.slots_per_day};
            Tape tape;
            StepOut out = net_forward(actors[i], x, state, tape, true);
            const int a = argmax_pair(out.probs);
            actions[static_cast<std::size_t>(i) * test_day.n_slots + t] = a;
            prev_r = env_reward(a, rec.renewable_kwh, rec.demand_kwh);
            prev_a = a;
        }
    }
    return score_actions("A3C", test_day, actions, rates);
}

MethodRun no_renewable(const StateTable& day, const CostRates& rates) {
    MethodRun run;
    run.method = "WithoutRenewable";
    for (int bs = 0; bs < day.n_bs; ++bs) {
        for (int t = 0; t < day.n_slots; ++t) {
            run.non_kwh += day.at(bs, t).demand_kwh;
        }
    }
    run.billed_usd = rates.c_non * run.non_kwh;
    return run;
}

} // namespace dispatchd
