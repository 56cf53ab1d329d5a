#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"

#include "dispatchd/tensor.hpp"

using namespace dispatchd;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

} // namespace

TEST_CASE("recurrent cell: all-zero parameters and state stay at zero") {
    LstmParams p(2, 3);
    LstmState s(3);
    LstmCache cache;
    LstmState out = lstm_forward({1.0, -2.0}, s, p, &cache);
    for (double c : out.c) CHECK(c == 0.0);
    for (double h : out.h) CHECK(h == 0.0);
}

TEST_CASE("recurrent cell: saturated forget gate preserves the cell") {
    LstmParams p(1, 1);
    p.b[0] = {25.0};  // forget gate pinned open
    LstmState s(1);
    s.c = {1.0};
    LstmCache cache;
    LstmState out = lstm_forward({0.0}, s, p, &cache);
    // Input gate at 0.5 times tanh(0)=0 contributes nothing; the cell is
    // carried through almost exactly.
    CHECK(out.c[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("recurrent cell: matches an independent scalar evaluation") {
    std::mt19937_64 rng(99);
    const int in = 2, H = 3;
    LstmParams p(in, H);
    for (int g = 0; g < 4; ++g) {
        p.W[g].a = random_vec(in * H, rng);
        p.U[g].a = random_vec(H * H, rng);
        p.b[g] = random_vec(H, rng);
    }
    LstmState s(H);
    s.c = random_vec(H, rng);
    s.h = random_vec(H, rng);
    const Vec x = random_vec(in, rng);

    LstmCache cache;
    LstmState out = lstm_forward(x, s, p, &cache);

    for (int j = 0; j < H; ++j) {
        double pre[4];
        for (int g = 0; g < 4; ++g) {
            pre[g] = p.b[g][j];
            for (int i = 0; i < in; ++i) pre[g] += x[i] * p.W[g](i, j);
            for (int k = 0; k < H; ++k) pre[g] += s.h[k] * p.U[g](k, j);
        }
        const double F = sigmoid(pre[0]);
        const double I = sigmoid(pre[1]);
        const double G = std::tanh(pre[2]);
        const double Z = sigmoid(pre[3]);
        const double c_new = G * I + F * s.c[j];
        CHECK(out.c[j] == doctest::Approx(c_new).epsilon(1e-12));
        CHECK(out.h[j] == doctest::Approx(std::tanh(c_new) * Z).epsilon(1e-12));
    }
}

TEST_CASE("dense layer forward") {
    DenseParams ident(2, 2);
    ident.W(0, 0) = 1.0;
    ident.W(1, 1) = 1.0;
    Vec y = dense_forward({3.0, -4.0}, ident);
    CHECK(y[0] == doctest::Approx(3.0));
    CHECK(y[1] == doctest::Approx(-4.0));

    DenseParams biased(2, 1);
    biased.b = {7.5};
    CHECK(dense_forward({1.0, 2.0}, biased)[0] == doctest::Approx(7.5));

    DenseParams m(2, 2);
    m.W(0, 0) = 1.0; m.W(0, 1) = 2.0;
    m.W(1, 0) = 3.0; m.W(1, 1) = 4.0;
    Vec z = dense_forward({5.0, 6.0}, m);
    CHECK(z[0] == doctest::Approx(5.0 + 18.0));
    CHECK(z[1] == doctest::Approx(10.0 + 24.0));
}

TEST_CASE("softmax") {
    Vec a = softmax({0.0, 0.0});
    CHECK(a[0] == doctest::Approx(0.5));
    Vec b = softmax({std::log(3.0), 0.0});
    CHECK(b[0] == doctest::Approx(0.75));
    CHECK(b[1] == doctest::Approx(0.25));
    Vec c = softmax({101.0, 100.0});
    Vec d = softmax({1.0, 0.0});
    CHECK(c[0] == doctest::Approx(d[0]).epsilon(1e-12));
}

TEST_CASE("entropy in nats") {
    CHECK(entropy({0.5, 0.5}) == doctest::Approx(std::log(2.0)));
    CHECK(entropy({1.0, 0.0}) == doctest::Approx(0.0));
    CHECK(entropy({0.75, 0.25}) == doctest::Approx(0.562335).epsilon(1e-5));
}

TEST_CASE("adam: zero gradient leaves parameters untouched") {
    Vec theta{1.0, -2.0};
    Vec g{0.0, 0.0};
    AdamState st;
    AdamConfig cfg;
    adam_step({&theta}, {&g}, st, cfg);
    CHECK(theta[0] == 1.0);
    CHECK(theta[1] == -2.0);
}

TEST_CASE("adam: first unit-gradient step moves by almost exactly the rate") {
    Vec theta{0.0};
    Vec g{1.0};
    AdamState st;
    AdamConfig cfg;
    adam_step({&theta}, {&g}, st, cfg);
    CHECK(theta[0] == doctest::Approx(-0.000999999990).epsilon(1e-9));
    const double first = theta[0];
    adam_step({&theta}, {&g}, st, cfg);
    CHECK(theta[0] < first);  // monotone under a constant gradient
}

TEST_CASE("policy/value net: gradients match finite differences") {
    std::mt19937_64 seeds(2024);
    for (int trial = 0; trial < 3; ++trial) {
        const std::uint64_t seed = seeds();
        AgentNet net = AgentNet::init(3, 4, 2, seed);
        std::mt19937_64 rng(seed ^ 0xabcdULL);
        std::vector<Vec> xs;
        for (int t = 0; t < 5; ++t) xs.push_back(random_vec(3, rng));
        std::vector<int> actions{0, 1, 1, 0, 1};
        std::vector<double> targets{1.0, 0.0, 1.0, 1.0, 0.0};

        auto loss_fn = [&]() {
            LstmState st(4);
            Tape tape;
            double loss = 0.0;
            for (std::size_t t = 0; t < xs.size(); ++t) {
                StepOut out = net_forward(net, xs[t], st, tape, t == 0);
                loss += -std::log(out.probs[actions[t]]);
                loss += 0.5 * (out.value - targets[t]) * (out.value - targets[t]);
            }
            return loss;
        };

        // Analytic gradients for the same surrogate.
        LstmState st(4);
        Tape tape;
        std::vector<Vec> dlogits;
        std::vector<double> dvalue;
        for (std::size_t t = 0; t < xs.size(); ++t) {
            StepOut out = net_forward(net, xs[t], st, tape, t == 0);
            Vec dz(out.probs.size());
            for (std::size_t k = 0; k < dz.size(); ++k) {
                dz[k] = out.probs[k] - (k == static_cast<std::size_t>(actions[t]) ? 1.0 : 0.0);
            }
            dlogits.push_back(dz);
            dvalue.push_back(out.value - targets[t]);
        }
        AgentNet grads(3, 4, 2);
        net_backward(net, tape, dlogits, dvalue, grads);

        FiniteDiffReport rep = finite_diff_check(
            net.blocks(), static_cast<const AgentNet&>(grads).blocks(), AgentNet::block_names(),
            loss_fn, 1e-5, 1e-4);
        for (const auto& b : rep.blocks) {
            INFO(b.name << " rel err " << b.max_rel_err);
            CHECK(b.pass);
        }
        CHECK(rep.pass);
    }
}

TEST_CASE("gradient checker rejects a corrupted gradient") {
    AgentNet net = AgentNet::init(2, 3, 2, 5);
    const Vec x{0.3, -0.6};
    auto loss_fn = [&]() {
        LstmState st(3);
        Tape tape;
        StepOut out = net_forward(net, x, st, tape, true);
        return -std::log(out.probs[0]);
    };
    LstmState st(3);
    Tape tape;
    StepOut out = net_forward(net, x, st, tape, true);
    Vec dz{out.probs[0] - 1.0, out.probs[1]};
    AgentNet grads(2, 3, 2);
    net_backward(net, tape, {dz}, {0.0}, grads);
    // Corrupt one parameter block.
    (*grads.blocks()[0])[0] += 0.5;
    FiniteDiffReport rep = finite_diff_check(
        net.blocks(), static_cast<const AgentNet&>(grads).blocks(), AgentNet::block_names(),
        loss_fn, 1e-5, 1e-4);
    CHECK_FALSE(rep.pass);
}

TEST_CASE("constant loss yields zero analytic and finite-difference gradients") {
    DenseParams layer(2, 1);
    DenseParams grads(2, 1);
    // A loss that ignores the parameters entirely.
    Vec dummy_x{1.0, 1.0};
    dense_backward(layer, dummy_x, {0.0}, grads, nullptr);
    for (double g : grads.W.a) CHECK(g == 0.0);
    CHECK(grads.b[0] == 0.0);
}

TEST_CASE("dense squared-error gradient is the textbook product") {
    DenseParams layer(2, 1);
    layer.W(0, 0) = 0.4;
    layer.W(1, 0) = -0.3;
    layer.b[0] = 0.1;
    const Vec x{1.5, -2.0};
    const double target = 0.7;
    const double yhat = dense_forward(x, layer)[0];
    DenseParams grads(2, 1);
    dense_backward(layer, x, {2.0 * (yhat - target)}, grads, nullptr);
    CHECK(grads.W(0, 0) == doctest::Approx(2.0 * (yhat - target) * x[0]));
    CHECK(grads.W(1, 0) == doctest::Approx(2.0 * (yhat - target) * x[1]));
    CHECK(grads.b[0] == doctest::Approx(2.0 * (yhat - target)));
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    namespace fs = std::filesystem;
    AgentNet a = AgentNet::init(3, 48, 2, 11);
    AgentNet m = AgentNet::init(6, 48, 2, 12);
    const std::string path = (fs::temp_directory_path() / "ckpt_rt.bin").string();
    save_checkpoint(path, {{"agent0", &a}, {"meta", &m}});

    AgentNet a2(3, 48, 2), m2(6, 48, 2);
    load_checkpoint(path, {{"agent0", &a2}, {"meta", &m2}});
    auto lhs = static_cast<const AgentNet&>(a).blocks();
    auto rhs = static_cast<const AgentNet&>(a2).blocks();
    for (std::size_t b = 0; b < lhs.size(); ++b) {
        REQUIRE(lhs[b]->size() == rhs[b]->size());
        for (std::size_t i = 0; i < lhs[b]->size(); ++i) {
            CHECK((*lhs[b])[i] == (*rhs[b])[i]);
        }
    }
    CHECK_THROWS(load_checkpoint(path, {{"missing", &a2}}));
}

TEST_CASE("seeded init is deterministic and respects the fan-in bound") {
    AgentNet a = AgentNet::init(3, 8, 2, 321);
    AgentNet b = AgentNet::init(3, 8, 2, 321);
    auto ab = static_cast<const AgentNet&>(a).blocks();
    auto bb = static_cast<const AgentNet&>(b).blocks();
    for (std::size_t i = 0; i < ab.size(); ++i) {
        for (std::size_t j = 0; j < ab[i]->size(); ++j) CHECK((*ab[i])[j] == (*bb[i])[j]);
    }
    for (double w : a.lstm.W[0].a) CHECK(std::abs(w) <= 1.0 / std::sqrt(3.0) + 1e-12);
}
