#include <catch2/catch.hpp>

#include <cmath>

#include "paee/cnn_lstm.hpp"
#include "test_support.hpp"

using namespace paee;
using cnn_lstm::CnnLstmConfig;
using cnn_lstm::CnnLstmWeights;
using cnn_lstm::TrainConfig;
using features::SupervisedWindow;

namespace {

SupervisedWindow make_window(std::size_t channels, std::size_t width, std::uint64_t seed,
                             double target) {
    SupervisedWindow w;
    w.channels = channels;
    w.width = width;
    w.tensor.resize(channels * width);
    testsup::TestRand tr(seed);
    for (double& v : w.tensor) v = tr.next();
    w.target = target;
    return w;
}

/// Scalar re-implementation of the forward pass, unrolled with plain loops
/// and no batching; the independent cross-check for cnn_lstm_forward.
double hand_forward(const CnnLstmWeights& w, const SupervisedWindow& s) {
    const auto& cfg = w.cfg;
    const std::size_t T = s.width, C = cfg.in_channels, H = cfg.lstm_hidden;
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

    std::vector<std::vector<double>> a1(cfg.conv1_out, std::vector<double>(T, 0.0));
    for (std::size_t oc = 0; oc < cfg.conv1_out; ++oc)
        for (std::size_t t = 0; t < T; ++t) {
            double acc = w.conv1_b[oc];
            for (std::size_t ic = 0; ic < C; ++ic)
                for (std::size_t k = 0; k < cfg.kernel; ++k) {
                    const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(t + k) - 1;
                    if (ti >= 0 && ti < static_cast<std::ptrdiff_t>(T))
                        acc += w.conv1_w[(oc * C + ic) * cfg.kernel + k] *
                               s.at(ic, static_cast<std::size_t>(ti));
                }
            a1[oc][t] = std::max(0.0, acc);
        }
    std::vector<std::vector<double>> a2(cfg.conv2_out, std::vector<double>(T, 0.0));
    for (std::size_t oc = 0; oc < cfg.conv2_out; ++oc)
        for (std::size_t t = 0; t < T; ++t) {
            double acc = w.conv2_b[oc];
            for (std::size_t ic = 0; ic < cfg.conv1_out; ++ic)
                for (std::size_t k = 0; k < cfg.kernel; ++k) {
                    const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(t + k) - 1;
                    if (ti >= 0 && ti < static_cast<std::ptrdiff_t>(T))
                        acc += w.conv2_w[(oc * cfg.conv1_out + ic) * cfg.kernel + k] *
                               a1[ic][static_cast<std::size_t>(ti)];
                }
            a2[oc][t] = std::max(0.0, acc);
        }
    std::vector<double> h(H, 0.0), c(H, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> g(4 * H, 0.0);
        for (std::size_t gi = 0; gi < 4 * H; ++gi) {
            double acc = w.b_gates[gi];
            for (std::size_t k = 0; k < cfg.conv2_out; ++k) acc += w.w_ih[gi * cfg.conv2_out + k] * a2[k][t];
            for (std::size_t k = 0; k < H; ++k) acc += w.w_hh[gi * H + k] * h[k];
            g[gi] = acc;
        }
        for (std::size_t j = 0; j < H; ++j) {
            const double iv = sig(g[j]), fv = sig(g[H + j]);
            const double gv = std::tanh(g[2 * H + j]), ov = sig(g[3 * H + j]);
            c[j] = fv * c[j] + iv * gv;
            h[j] = ov * std::tanh(c[j]);
        }
    }
    double out = w.head_b[0];
    for (std::size_t j = 0; j < H; ++j) out += w.head_w[j] * h[j];
    return out;
}

/// Tiny pinned network (1 input channel, 2/2 conv channels, hidden 2) with
/// hand-set weights; the expected output was computed independently.
CnnLstmWeights tiny_net() {
    CnnLstmConfig cfg;
    cfg.in_channels = 1;
    cfg.conv1_out = 2;
    cfg.conv2_out = 2;
    cfg.kernel = 3;
    cfg.lstm_hidden = 2;
    CnnLstmWeights w = cnn_lstm::init_cnn_lstm(cfg);
    w.conv1_w = {0.30, -0.20, 0.10, -0.15, 0.25, 0.05};
    w.conv1_b = {0.10, -0.05};
    w.conv2_w = {0.20, -0.10, 0.05, 0.15, 0.10, -0.20, -0.25, 0.30, 0.10, 0.05, -0.15, 0.20};
    w.conv2_b = {-0.02, 0.03};
    w.w_ih = {0.10, -0.20, 0.30, 0.15, -0.10, 0.25, 0.05, -0.30,
              0.20, 0.10, -0.15, 0.05, 0.25, -0.05, -0.20, 0.15};
    w.w_hh = {0.05, 0.10, -0.10, 0.20, 0.15, -0.05, 0.10, 0.05,
              -0.20, 0.15, 0.05, -0.10, -0.05, 0.20, 0.10, -0.15};
    w.b_gates = {0.01, -0.02, 0.03, -0.01, 0.02, 0.00, -0.03, 0.01};
    w.head_w = {0.40, -0.35};
    w.head_b = {0.05};
    return w;
}

} // namespace

TEST_CASE("init_cnn_lstm is seed-deterministic with audited shapes") {
    for (std::size_t channels : {3u, 9u}) {
        CnnLstmConfig cfg;
        cfg.in_channels = channels;
        cfg.seed = 7;
        const CnnLstmWeights a = cnn_lstm::init_cnn_lstm(cfg);
        const CnnLstmWeights b = cnn_lstm::init_cnn_lstm(cfg);
        CHECK(a.conv1_w == b.conv1_w);
        CHECK(a.w_hh == b.w_hh);
        CHECK(a.head_b == b.head_b);
        CHECK(a.conv1_w.size() == 16 * channels * 3);
        CHECK(a.conv2_w.size() == 32 * 16 * 3);
        CHECK(a.w_ih.size() == 4 * 32 * 32);
        CHECK(a.w_hh.size() == 4 * 32 * 32);
        CHECK(a.b_gates.size() == 4 * 32);
        CHECK(a.head_w.size() == 32);

        cfg.seed = 8;
        const CnnLstmWeights c = cnn_lstm::init_cnn_lstm(cfg);
        CHECK(a.conv1_w != c.conv1_w);
    }
}

TEST_CASE("forward propagates the head bias through a zero network") {
    CnnLstmConfig cfg;
    cfg.in_channels = 3;
    CnnLstmWeights w = cnn_lstm::init_cnn_lstm(cfg);
    for (auto* v : {&w.conv1_w, &w.conv1_b, &w.conv2_w, &w.conv2_b, &w.w_ih, &w.w_hh, &w.b_gates,
                    &w.head_w})
        std::fill(v->begin(), v->end(), 0.0);
    w.head_b = {0.37};
    const SupervisedWindow s = make_window(3, 30, 1, 0.0);
    CHECK(cnn_lstm::cnn_lstm_forward(w, {&s})[0] == Approx(0.37).margin(1e-15));
}

TEST_CASE("identical windows in one batch give identical outputs") {
    CnnLstmConfig cfg;
    cfg.in_channels = 3;
    cfg.seed = 3;
    const CnnLstmWeights w = cnn_lstm::init_cnn_lstm(cfg);
    const SupervisedWindow s = make_window(3, 30, 5, 0.0);
    const auto out = cnn_lstm::cnn_lstm_forward(w, {&s, &s, &s});
    CHECK(out[0] == out[1]);
    CHECK(out[1] == out[2]);
}

TEST_CASE("batch order permutes outputs identically") {
    CnnLstmConfig cfg;
    cfg.in_channels = 3;
    cfg.seed = 9;
    const CnnLstmWeights w = cnn_lstm::init_cnn_lstm(cfg);
    const SupervisedWindow s1 = make_window(3, 30, 10, 0.0);
    const SupervisedWindow s2 = make_window(3, 30, 11, 0.0);
    const SupervisedWindow s3 = make_window(3, 30, 12, 0.0);
    const auto fwd = cnn_lstm::cnn_lstm_forward(w, {&s1, &s2, &s3});
    const auto rev = cnn_lstm::cnn_lstm_forward(w, {&s3, &s1, &s2});
    CHECK(fwd[0] == Approx(rev[1]).margin(1e-14));
    CHECK(fwd[1] == Approx(rev[2]).margin(1e-14));
    CHECK(fwd[2] == Approx(rev[0]).margin(1e-14));
}

TEST_CASE("tiny pinned network matches the hand-unrolled forward") {
    const CnnLstmWeights w = tiny_net();
    SupervisedWindow s;
    s.channels = 1;
    s.width = 5;
    s.tensor = {0.5, -1.0, 0.25, 0.8, -0.3};
    s.target = 0.0;
    const double lib = cnn_lstm::cnn_lstm_forward(w, {&s})[0];
    CHECK(lib == Approx(0.055713367512554714).margin(1e-10));  // frozen reference
    CHECK(lib == Approx(hand_forward(w, s)).margin(1e-12));
}

TEST_CASE("library forward equals the scalar re-implementation on the full network") {
    for (std::size_t channels : {3u, 9u}) {
        CnnLstmConfig cfg;
        cfg.in_channels = channels;
        cfg.seed = 1234;
        const CnnLstmWeights w = cnn_lstm::init_cnn_lstm(cfg);
        const SupervisedWindow s = make_window(channels, 30, 77 + channels, 0.3);
        CHECK(cnn_lstm::cnn_lstm_forward(w, {&s})[0] ==
              Approx(hand_forward(w, s)).margin(1e-10));
    }
}

TEST_CASE("gradient check passes below 1e-4 for both channel configurations") {
    for (std::size_t channels : {3u, 9u}) {
        CnnLstmConfig cfg;
        cfg.in_channels = channels;
        cfg.seed = 42;
        const CnnLstmWeights w = cnn_lstm::init_cnn_lstm(cfg);
        const SupervisedWindow s = make_window(channels, 30, 1000 + channels, 0.2);
        const auto res = cnn_lstm::gradient_check(w, s, 1e-4, 800, 42);
        INFO("channels=" << channels << " max rel err " << res.max_rel_error);
        CHECK(res.checked >= 500);
        CHECK(res.max_rel_error < 1e-4);
    }
}

TEST_CASE("gradient check on the tiny network covers every parameter") {
    const CnnLstmWeights w = tiny_net();
    SupervisedWindow s;
    s.channels = 1;
    s.width = 5;
    s.tensor = {0.5, -1.0, 0.25, 0.8, -0.3};
    s.target = 0.4;
    const auto res = cnn_lstm::gradient_check(w, s);
    const std::size_t total = w.conv1_w.size() + w.conv1_b.size() + w.conv2_w.size() +
                              w.conv2_b.size() + w.w_ih.size() + w.w_hh.size() +
                              w.b_gates.size() + w.head_w.size() + 1;
    // a handful of coordinates may sit on a ReLU kink and be skipped
    CHECK(res.checked >= total - 4);
    CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("zero-weight network still passes the gradient check") {
    CnnLstmConfig cfg;
    cfg.in_channels = 3;
    CnnLstmWeights w = cnn_lstm::init_cnn_lstm(cfg);
    for (auto* v : {&w.conv1_w, &w.conv1_b, &w.conv2_w, &w.conv2_b, &w.w_ih, &w.w_hh, &w.b_gates,
                    &w.head_w, &w.head_b})
        std::fill(v->begin(), v->end(), 0.0);
    const SupervisedWindow s = make_window(3, 30, 2, 0.5);
    CHECK(cnn_lstm::gradient_check(w, s, 1e-4, 600, 1).max_rel_error < 1e-4);
}

TEST_CASE("a corrupted gradient is flagged by the finite-difference comparison") {
    const CnnLstmWeights w = tiny_net();
    SupervisedWindow s;
    s.channels = 1;
    s.width = 5;
    s.tensor = {0.5, -1.0, 0.25, 0.8, -0.3};
    s.target = 0.4;
    CnnLstmWeights analytic = cnn_lstm::loss_gradients(w, s);
    // drop one term: zero the largest head gradient entry
    REQUIRE(std::abs(analytic.head_w[0]) > 1e-6);
    analytic.head_w[0] = 0.0;

    CnnLstmWeights probe = w;
    const double eps = 1e-5;
    probe.head_w[0] = w.head_w[0] + eps;
    const double lp = cnn_lstm::sample_loss(probe, s);
    probe.head_w[0] = w.head_w[0] - eps;
    const double lm = cnn_lstm::sample_loss(probe, s);
    const double numeric = (lp - lm) / (2.0 * eps);
    const double rel =
        std::abs(analytic.head_w[0] - numeric) / std::max(std::abs(analytic.head_w[0]) + std::abs(numeric), 1e-8);
    CHECK(rel > 1e-2);
}

namespace {

std::vector<SupervisedWindow> linear_task(std::size_t n, std::size_t channels) {
    // target = scaled mean of the first channel
    std::vector<SupervisedWindow> out;
    testsup::TestRand tr(606);
    for (std::size_t i = 0; i < n; ++i) {
        SupervisedWindow w = make_window(channels, 30, 9000 + i, 0.0);
        double mean = 0.0;
        for (std::size_t t = 0; t < 30; ++t) mean += w.at(0, t);
        w.target = 0.8 * mean / 30.0 + 0.05 * tr.next();
        out.push_back(std::move(w));
    }
    return out;
}

} // namespace

TEST_CASE("training reduces the loss and is bit-reproducible under a fixed seed") {
    const auto data = linear_task(256, 3);
    CnnLstmConfig cfg;
    cfg.in_channels = 3;
    cfg.seed = 42;
    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.seed = 42;
    const auto r1 = cnn_lstm::cnn_lstm_train(data, cfg, tcfg);
    REQUIRE(r1.epoch_loss.size() == 3);
    CHECK(r1.epoch_loss[1] < r1.epoch_loss[0]);
    CHECK(r1.epoch_loss[2] < r1.epoch_loss[1]);

    const auto r2 = cnn_lstm::cnn_lstm_train(data, cfg, tcfg);
    CHECK(cnn_lstm::to_text(r1.weights) == cnn_lstm::to_text(r2.weights));
    CHECK(r1.epoch_loss == r2.epoch_loss);
}

TEST_CASE("constant targets are learnable") {
    std::vector<SupervisedWindow> data;
    for (std::size_t i = 0; i < 128; ++i) data.push_back(make_window(3, 30, 100 + i, 2.5));
    CnnLstmConfig cfg;
    cfg.in_channels = 3;
    cfg.seed = 1;
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.seed = 1;
    const auto r = cnn_lstm::cnn_lstm_train(data, cfg, tcfg);
    CHECK(r.epoch_loss.back() < r.epoch_loss.front());
}

TEST_CASE("a runaway learning rate raises DivergedLoss") {
    const auto data = linear_task(256, 3);
    CnnLstmConfig cfg;
    cfg.in_channels = 3;
    cfg.seed = 42;
    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.seed = 42;
    tcfg.learning_rate = 1e3;
    try {
        cnn_lstm::cnn_lstm_train(data, cfg, tcfg);
        FAIL("expected DivergedLoss");
    } catch (const Error& e) {
        CHECK(e.code() == errc::diverged_loss);
    }
}

TEST_CASE("training validates its inputs") {
    CnnLstmConfig cfg;
    cfg.in_channels = 3;
    CHECK_THROWS_AS(cnn_lstm::cnn_lstm_train({}, cfg, {}), Error);
    std::vector<SupervisedWindow> bad{make_window(9, 30, 1, 0.0)};
    CHECK_THROWS_AS(cnn_lstm::cnn_lstm_train(bad, cfg, {}), Error);
}

TEST_CASE("cnn-lstm artifacts round-trip through text exactly") {
    const auto data = linear_task(64, 3);
    CnnLstmConfig cfg;
    cfg.in_channels = 3;
    cfg.seed = 5;
    TrainConfig tcfg;
    tcfg.epochs = 1;
    tcfg.seed = 5;
    const auto r = cnn_lstm::cnn_lstm_train(data, cfg, tcfg);
    const std::string text = cnn_lstm::to_text(r.weights);
    const CnnLstmWeights back = cnn_lstm::cnn_lstm_from_text(text);
    CHECK(cnn_lstm::to_text(back) == text);
    CHECK(back.ch_mean == r.weights.ch_mean);
    // reloaded weights predict identically
    const SupervisedWindow probe = make_window(3, 30, 4242, 0.0);
    CHECK(cnn_lstm::cnn_lstm_forward(back, {&probe})[0] ==
          cnn_lstm::cnn_lstm_forward(r.weights, {&probe})[0]);
}
