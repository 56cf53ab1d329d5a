#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dispatchd {

using Vec = std::vector<double>;

struct Mat {
    int rows = 0;
    int cols = 0;
    Vec a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

// ---- LSTM cell ------------------------------------------------------------

// Gate order throughout: 0=forget(F), 1=input(I), 2=candidate(E-hat, tanh),
// 3=output(Z). Row-vector convention: pre_g = x*W[g] + h*U[g] + b[g].
struct LstmParams {
    int in_dim = 0;
    int hidden = 0;
    Mat W[4];  // in_dim x hidden
    Mat U[4];  // hidden x hidden
    Vec b[4];  // hidden

    LstmParams() = default;
    LstmParams(int in, int h);
};

struct LstmState {
    Vec c;  // cell E_t
    Vec h;  // hidden H_t

    LstmState() = default;
    explicit LstmState(int hidden) : c(hidden, 0.0), h(hidden, 0.0) {}
};

struct LstmCache {
    Vec x, h_prev, c_prev;
    Vec F, I, G, Z;   // post-activation gates
    Vec c_new, tc;    // new cell and tanh(new cell)
};

// One forward step; fills `cache` for backprop and returns the new state.
LstmState lstm_forward(const Vec& x, const LstmState& state, const LstmParams& p,
                       LstmCache* cache);

// One reverse step. `dh`/`dc` are gradients flowing into the step's outputs;
// parameter gradients accumulate into `grads`; `dh_prev`/`dc_prev`/`dx`
// receive the gradients flowing further back (any may be null).
void lstm_backward(const LstmParams& p, const LstmCache& cache, const Vec& dh, const Vec& dc,
                   LstmParams& grads, Vec* dh_prev, Vec* dc_prev, Vec* dx);

// ---- dense head -----------------------------------------------------------

struct DenseParams {
    Mat W;  // in x out
    Vec b;  // out

    DenseParams() = default;
    DenseParams(int in, int out) : W(in, out), b(out, 0.0) {}
};

Vec dense_forward(const Vec& x, const DenseParams& p);
void dense_backward(const DenseParams& p, const Vec& x, const Vec& dy,
                    DenseParams& grads, Vec* dx);

// ---- activations ----------------------------------------------------------

Vec softmax(const Vec& logits);
double entropy(const Vec& p);  // nats, with 0*ln 0 := 0

// d(entropy)/d(logits) for p = softmax(z).
Vec entropy_grad_logits(const Vec& p);

// ---- optimizer ------------------------------------------------------------

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 5.0;  // global-norm gradient clip; <= 0 disables
};

struct AdamState {
    std::vector<Vec> m, v;
    long long step = 0;

    // Lazily sized on first use to match the parameter blocks.
};

// Applies one bias-corrected Adam update in place. `params` and `grads` are
// parallel lists of parameter blocks.
void adam_step(const std::vector<Vec*>& params, const std::vector<const Vec*>& grads,
               AdamState& state, const AdamConfig& cfg);

// ---- actor-critic network -------------------------------------------------

// Fixed topology shared by every learner in the artifact: one LSTM cell
// feeding a softmax policy head and a linear value head.
struct AgentNet {
    LstmParams lstm;
    DenseParams policy;  // hidden x n_actions
    DenseParams value;   // hidden x 1

    AgentNet() = default;
    AgentNet(int in_dim, int hidden, int n_actions);

    // Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    static AgentNet init(int in_dim, int hidden, int n_actions, std::uint64_t seed);

    int in_dim() const { return lstm.in_dim; }
    int hidden() const { return lstm.hidden; }
    int n_actions() const { return policy.W.cols; }

    // Parameter blocks in a fixed order (12 LSTM + 2 policy + 2 value).
    std::vector<Vec*> blocks();
    std::vector<const Vec*> blocks() const;
    static std::vector<std::string> block_names();
};

struct StepOut {
    Vec probs;
    double value = 0.0;
};

// Episode tape: forward caches for one BPTT segment sequence.
struct Tape {
    std::vector<LstmCache> lstm_caches;
    std::vector<Vec> hiddens;          // post-step hidden (head input)
    std::vector<Vec> probs;
    std::vector<double> values;
    std::vector<char> segment_start;   // 1 when state was externally replaced
    std::size_t size() const { return lstm_caches.size(); }
    void clear();
};

// Runs one step, advancing `state` and appending to `tape`.
StepOut net_forward(const AgentNet& net, const Vec& x, LstmState& state, Tape& tape,
                    bool segment_start);

// Reverse pass over the whole tape. `dlogits[t]` and `dvalue[t]` are the
// loss gradients w.r.t. the policy logits and value output at step t.
// Gradient flow through recurrent state stops at segment starts.
void net_backward(const AgentNet& net, const Tape& tape,
                  const std::vector<Vec>& dlogits, const std::vector<double>& dvalue,
                  AgentNet& grads);

// ---- verification ---------------------------------------------------------

struct FiniteDiffBlockReport {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};

struct FiniteDiffReport {
    std::vector<FiniteDiffBlockReport> blocks;
    bool pass = true;
};

// Central-difference check of `analytic_grads` against `loss()` (which must
// recompute the scalar loss from the current parameters each call).
FiniteDiffReport finite_diff_check(const std::vector<Vec*>& params,
                                   const std::vector<const Vec*>& analytic_grads,
                                   const std::vector<std::string>& names,
                                   const std::function<double()>& loss,
                                   double h, double tolerance);

// ---- checkpoints ----------------------------------------------------------

// Versioned binary container: magic, version, hidden size, input dims, then
// named little-endian float64 blocks. Round-trips bit-exactly.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const AgentNet*>>& nets);
void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, AgentNet*>>& nets);

} // namespace dispatchd
