#include "dispatchd/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

namespace dispatchd {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_dim(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("dimension mismatch: ") + what);
}

} // namespace

LstmParams::LstmParams(int in, int h) : in_dim(in), hidden(h) {
    for (int g = 0; g < 4; ++g) {
        W[g] = Mat(in, h);
        U[g] = Mat(h, h);
        b[g] = Vec(h, 0.0);
    }
}

LstmState lstm_forward(const Vec& x, const LstmState& state, const LstmParams& p,
                       LstmCache* cache) {
    check_dim(static_cast<int>(x.size()) == p.in_dim, "lstm input");
    check_dim(static_cast<int>(state.h.size()) == p.hidden, "lstm state");
    const int H = p.hidden;
    Vec pre[4];
    for (int g = 0; g < 4; ++g) {
        pre[g] = p.b[g];
        for (int i = 0; i < p.in_dim; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            for (int j = 0; j < H; ++j) pre[g][j] += xi * p.W[g](i, j);
        }
        for (int i = 0; i < H; ++i) {
            const double hi = state.h[i];
            if (hi == 0.0) continue;
            for (int j = 0; j < H; ++j) pre[g][j] += hi * p.U[g](i, j);
        }
    }
    LstmState out(H);
    Vec F(H), I(H), G(H), Z(H), tc(H);
    for (int j = 0; j < H; ++j) {
        F[j] = sigmoid(pre[0][j]);
        I[j] = sigmoid(pre[1][j]);
        G[j] = std::tanh(pre[2][j]);
        Z[j] = sigmoid(pre[3][j]);
        out.c[j] = G[j] * I[j] + F[j] * state.c[j];
        tc[j] = std::tanh(out.c[j]);
        out.h[j] = tc[j] * Z[j];
    }
    if (cache) {
        cache->x = x;
        cache->h_prev = state.h;
        cache->c_prev = state.c;
        cache->F = std::move(F);
        cache->I = std::move(I);
        cache->G = std::move(G);
        cache->Z = std::move(Z);
        cache->c_new = out.c;
        cache->tc = std::move(tc);
    }
    return out;
}

void lstm_backward(const LstmParams& p, const LstmCache& cache, const Vec& dh, const Vec& dc,
                   LstmParams& grads, Vec* dh_prev, Vec* dc_prev, Vec* dx) {
    const int H = p.hidden;
    Vec dpre[4];
    for (int g = 0; g < 4; ++g) dpre[g].assign(H, 0.0);
    Vec dcp(H, 0.0);
    for (int j = 0; j < H; ++j) {
        const double dZ = dh[j] * cache.tc[j];
        double dct = dc[j] + dh[j] * cache.Z[j] * (1.0 - cache.tc[j] * cache.tc[j]);
        const double dG = dct * cache.I[j];
        const double dI = dct * cache.G[j];
        const double dF = dct * cache.c_prev[j];
        dcp[j] = dct * cache.F[j];
        dpre[0][j] = dF * cache.F[j] * (1.0 - cache.F[j]);
        dpre[1][j] = dI * cache.I[j] * (1.0 - cache.I[j]);
        dpre[2][j] = dG * (1.0 - cache.G[j] * cache.G[j]);
        dpre[3][j] = dZ * cache.Z[j] * (1.0 - cache.Z[j]);
    }
    for (int g = 0; g < 4; ++g) {
        for (int i = 0; i < p.in_dim; ++i) {
            const double xi = cache.x[i];
            if (xi != 0.0) {
                for (int j = 0; j < H; ++j) grads.W[g](i, j) += xi * dpre[g][j];
            }
        }
        for (int i = 0; i < H; ++i) {
            const double hi = cache.h_prev[i];
            if (hi != 0.0) {
                for (int j = 0; j < H; ++j) grads.U[g](i, j) += hi * dpre[g][j];
            }
        }
        for (int j = 0; j < H; ++j) grads.b[g][j] += dpre[g][j];
    }
    if (dh_prev) {
        dh_prev->assign(H, 0.0);
        for (int g = 0; g < 4; ++g) {
            for (int i = 0; i < H; ++i) {
                double s = 0.0;
                for (int j = 0; j < H; ++j) s += dpre[g][j] * p.U[g](i, j);
                (*dh_prev)[i] += s;
            }
        }
    }
    if (dc_prev) *dc_prev = dcp;
    if (dx) {
        dx->assign(p.in_dim, 0.0);
        for (int g = 0; g < 4; ++g) {
            for (int i = 0; i < p.in_dim; ++i) {
                double s = 0.0;
                for (int j = 0; j < H; ++j) s += dpre[g][j] * p.W[g](i, j);
                (*dx)[i] += s;
            }
        }
    }
}

Vec dense_forward(const Vec& x, const DenseParams& p) {
    check_dim(static_cast<int>(x.size()) == p.W.rows, "dense input");
    Vec y = p.b;
    for (int i = 0; i < p.W.rows; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (int j = 0; j < p.W.cols; ++j) y[j] += xi * p.W(i, j);
    }
    return y;
}

void dense_backward(const DenseParams& p, const Vec& x, const Vec& dy,
                    DenseParams& grads, Vec* dx) {
    check_dim(static_cast<int>(dy.size()) == p.W.cols, "dense grad");
    for (int i = 0; i < p.W.rows; ++i) {
        const double xi = x[i];
        if (xi != 0.0) {
            for (int j = 0; j < p.W.cols; ++j) grads.W(i, j) += xi * dy[j];
        }
    }
    for (int j = 0; j < p.W.cols; ++j) grads.b[j] += dy[j];
    if (dx) {
        dx->assign(p.W.rows, 0.0);
        for (int i = 0; i < p.W.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < p.W.cols; ++j) s += dy[j] * p.W(i, j);
            (*dx)[i] = s;
        }
    }
}

Vec softmax(const Vec& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty input");
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    Vec out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

double entropy(const Vec& p) {
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

Vec entropy_grad_logits(const Vec& p) {
    const double h = entropy(p);
    Vec g(p.size(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] > 0.0) g[k] = -p[k] * (std::log(p[k]) + h);
    }
    return g;
}

void adam_step(const std::vector<Vec*>& params, const std::vector<const Vec*>& grads,
               AdamState& state, const AdamConfig& cfg) {
    check_dim(params.size() == grads.size(), "adam block count");
    if (state.m.empty()) {
        for (const Vec* g : grads) {
            state.m.emplace_back(g->size(), 0.0);
            state.v.emplace_back(g->size(), 0.0);
        }
    }
    double scale = 1.0;
    if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (const Vec* g : grads) {
            for (double v : *g) sq += v * v;
        }
        const double norm = std::sqrt(sq);
        if (norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t bidx = 0; bidx < params.size(); ++bidx) {
        Vec& p = *params[bidx];
        const Vec& g = *grads[bidx];
        check_dim(p.size() == g.size(), "adam block shape");
        Vec& m = state.m[bidx];
        Vec& v = state.v[bidx];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i] * scale;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

AgentNet::AgentNet(int in_dim, int hidden, int n_actions)
    : lstm(in_dim, hidden), policy(hidden, n_actions), value(hidden, 1) {}

AgentNet AgentNet::init(int in_dim, int hidden, int n_actions, std::uint64_t seed) {
    AgentNet net(in_dim, hidden, n_actions);
    std::mt19937_64 rng(seed);
    auto fill = [&rng](Vec& block, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : block) v = dist(rng);
    };
    for (int g = 0; g < 4; ++g) {
        fill(net.lstm.W[g].a, in_dim);
        fill(net.lstm.U[g].a, hidden);
        // Biases start at zero.
    }
    fill(net.policy.W.a, hidden);
    fill(net.value.W.a, hidden);
    return net;
}

std::vector<Vec*> AgentNet::blocks() {
    std::vector<Vec*> out;
    for (int g = 0; g < 4; ++g) out.push_back(&lstm.W[g].a);
    for (int g = 0; g < 4; ++g) out.push_back(&lstm.U[g].a);
    for (int g = 0; g < 4; ++g) out.push_back(&lstm.b[g]);
    out.push_back(&policy.W.a);
    out.push_back(&policy.b);
    out.push_back(&value.W.a);
    out.push_back(&value.b);
    return out;
}

std::vector<const Vec*> AgentNet::blocks() const {
    std::vector<const Vec*> out;
    for (int g = 0; g < 4; ++g) out.push_back(&lstm.W[g].a);
    for (int g = 0; g < 4; ++g) out.push_back(&lstm.U[g].a);
    for (int g = 0; g < 4; ++g) out.push_back(&lstm.b[g]);
    out.push_back(&policy.W.a);
    out.push_back(&policy.b);
    out.push_back(&value.W.a);
    out.push_back(&value.b);
    return out;
}

std::vector<std::string> AgentNet::block_names() {
    std::vector<std::string> names;
    const char* gate[4] = {"f", "i", "e", "z"};
    for (int g = 0; g < 4; ++g) names.push_back(std::string("lstm.W") + gate[g]);
    for (int g = 0; g < 4; ++g) names.push_back(std::string("lstm.U") + gate[g]);
    for (int g = 0; g < 4; ++g) names.push_back(std::string("lstm.b") + gate[g]);
    names.insert(names.end(), {"policy.W", "policy.b", "value.W", "value.b"});
    return names;
}

void Tape::clear() {
    lstm_caches.clear();
    hiddens.clear();
    probs.clear();
    values.clear();
    segment_start.clear();
}

StepOut net_forward(const AgentNet& net, const Vec& x, LstmState& state, Tape& tape,
                    bool segment_start) {
    tape.lstm_caches.emplace_back();
    state = lstm_forward(x, state, net.lstm, &tape.lstm_caches.back());
    StepOut out;
    out.probs = softmax(dense_forward(state.h, net.policy));
    out.value = dense_forward(state.h, net.value)[0];
    tape.hiddens.push_back(state.h);
    tape.probs.push_back(out.probs);
    tape.values.push_back(out.value);
    tape.segment_start.push_back(segment_start ? 1 : 0);
    return out;
}

void net_backward(const AgentNet& net, const Tape& tape,
                  const std::vector<Vec>& dlogits, const std::vector<double>& dvalue,
                  AgentNet& grads) {
    check_dim(dlogits.size() == tape.size() && dvalue.size() == tape.size(),
              "net_backward tape");
    const int H = net.hidden();
    Vec dh_carry(H, 0.0), dc_carry(H, 0.0);
    for (std::size_t t = tape.size(); t-- > 0;) {
        Vec dh = dh_carry;
        Vec dc = dc_carry;
        Vec dh_head;
        dense_backward(net.policy, tape.hiddens[t], dlogits[t], grads.policy, &dh_head);
        for (int j = 0; j < H; ++j) dh[j] += dh_head[j];
        dense_backward(net.value, tape.hiddens[t], Vec{dvalue[t]}, grads.value, &dh_head);
        for (int j = 0; j < H; ++j) dh[j] += dh_head[j];
        Vec dh_prev, dc_prev;
        lstm_backward(net.lstm, tape.lstm_caches[t], dh, dc, grads.lstm, &dh_prev, &dc_prev,
                      nullptr);
        if (tape.segment_start[t]) {
            // The recurrent state was injected from outside; gradients do not
            // cross the boundary.
            dh_carry.assign(H, 0.0);
            dc_carry.assign(H, 0.0);
        } else {
            dh_carry = std::move(dh_prev);
            dc_carry = std::move(dc_prev);
        }
    }
}

FiniteDiffReport finite_diff_check(const std::vector<Vec*>& params,
                                   const std::vector<const Vec*>& analytic_grads,
                                   const std::vector<std::string>& names,
                                   const std::function<double()>& loss,
                                   double h, double tolerance) {
    FiniteDiffReport report;
    for (std::size_t bidx = 0; bidx < params.size(); ++bidx) {
        FiniteDiffBlockReport br;
        br.name = bidx < names.size() ? names[bidx] : "block" + std::to_string(bidx);
        Vec& p = *params[bidx];
        const Vec& g = *analytic_grads[bidx];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + h;
            const double up = loss();
            p[i] = saved - h;
            const double down = loss();
            p[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-8});
            br.max_rel_err = std::max(br.max_rel_err, std::abs(fd - g[i]) / denom);
        }
        br.pass = br.max_rel_err < tolerance;
        report.pass = report.pass && br.pass;
        report.blocks.push_back(br);
    }
    return report;
}

// ---- checkpoints ----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'S', 'P', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

void write_f64(std::ofstream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const AgentNet*>>& nets) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kMagic, 8);
    write_u32(out, kVersion);
    const AgentNet* first = nets.empty() ? nullptr : nets.front().second;
    write_u32(out, first ? static_cast<std::uint32_t>(first->hidden()) : 0);
    write_u32(out, first ? static_cast<std::uint32_t>(first->in_dim()) : 0);
    std::uint32_t n_blocks = 0;
    for (const auto& [name, net] : nets) {
        n_blocks += static_cast<std::uint32_t>(net->blocks().size());
    }
    write_u32(out, n_blocks);
    const auto block_names = AgentNet::block_names();
    for (const auto& [prefix, net] : nets) {
        auto blocks = net->blocks();
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const std::string name = prefix + "/" + block_names[i];
            write_u32(out, static_cast<std::uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            write_u32(out, static_cast<std::uint32_t>(blocks[i]->size()));
            for (double v : *blocks[i]) write_f64(out, v);
        }
    }
    if (!out) throw std::runtime_error("short write on checkpoint " + path);
}

void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, AgentNet*>>& nets) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("bad checkpoint magic in " + path);
    }
    const std::uint32_t version = read_u32(in);
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    read_u32(in);  // hidden size, informational
    read_u32(in);  // input dims, informational
    const std::uint32_t n_blocks = read_u32(in);
    std::map<std::string, Vec> loaded;
    for (std::uint32_t b = 0; b < n_blocks; ++b) {
        const std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t count = read_u32(in);
        Vec data(count);
        for (std::uint32_t i = 0; i < count; ++i) data[i] = read_f64(in);
        if (!in) throw std::runtime_error("truncated checkpoint " + path);
        loaded[name] = std::move(data);
    }
    const auto block_names = AgentNet::block_names();
    for (const auto& [prefix, net] : nets) {
        auto blocks = net->blocks();
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const std::string name = prefix + "/" + block_names[i];
            auto it = loaded.find(name);
            if (it == loaded.end()) {
                throw std::runtime_error("checkpoint " + path + " missing block " + name);
            }
            if (it->second.size() != blocks[i]->size()) {
                throw std::runtime_error("checkpoint block " + name + " has wrong size");
            }
            *blocks[i] = it->second;
        }
    }
}

} // namespace dispatchd
