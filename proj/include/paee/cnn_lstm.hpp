#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "paee/csv.hpp"
#include "paee/error.hpp"
#include "paee/features.hpp"
#include "paee/rng.hpp"

namespace paee::cnn_lstm {

using features::SupervisedWindow;

/// Two 1-D conv layers (same padding, ReLU) feeding a single LSTM layer,
/// affine head on the final hidden state. Sized per composition: 3 input
/// channels for single-sensor runs, 9 for the three-sensor run.
struct CnnLstmConfig {
    std::size_t in_channels = 3;
    std::size_t conv1_out = 16;
    std::size_t conv2_out = 32;
    std::size_t kernel = 3;
    std::size_t lstm_hidden = 32;
    std::uint64_t seed = 0;
};

struct CnnLstmWeights {
    CnnLstmConfig cfg;
    std::vector<double> conv1_w;  // [conv1_out][in_channels][kernel]
    std::vector<double> conv1_b;  // [conv1_out]
    std::vector<double> conv2_w;  // [conv2_out][conv1_out][kernel]
    std::vector<double> conv2_b;  // [conv2_out]
    std::vector<double> w_ih;     // [4*hidden][conv2_out], gate order i,f,g,o
    std::vector<double> w_hh;     // [4*hidden][hidden]
    std::vector<double> b_gates;  // [4*hidden]
    std::vector<double> head_w;   // [hidden]
    std::vector<double> head_b;   // [1]
    // per-channel input standardization, fixed from the training fold
    std::vector<double> ch_mean;  // [in_channels]
    std::vector<double> ch_sd;    // [in_channels]
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 3;
    std::size_t batch_size = 64;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
};

struct TrainResult {
    CnnLstmWeights weights;
    std::vector<double> epoch_loss;  // mean squared error per epoch
};

namespace detail {

struct ParamRef {
    const char* name;
    std::vector<double>* v;
};

inline std::vector<ParamRef> param_refs(CnnLstmWeights& w) {
    return {{"conv1.w", &w.conv1_w}, {"conv1.b", &w.conv1_b}, {"conv2.w", &w.conv2_w},
            {"conv2.b", &w.conv2_b}, {"lstm.w_ih", &w.w_ih},  {"lstm.w_hh", &w.w_hh},
            {"lstm.b", &w.b_gates},  {"head.w", &w.head_w},   {"head.b", &w.head_b}};
}

struct ConstParamRef {
    const char* name;
    const std::vector<double>* v;
};

inline std::vector<ConstParamRef> param_refs(const CnnLstmWeights& w) {
    return {{"conv1.w", &w.conv1_w}, {"conv1.b", &w.conv1_b}, {"conv2.w", &w.conv2_w},
            {"conv2.b", &w.conv2_b}, {"lstm.w_ih", &w.w_ih},  {"lstm.w_hh", &w.w_hh},
            {"lstm.b", &w.b_gates},  {"head.w", &w.head_w},   {"head.b", &w.head_b}};
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y[oc][t][b] += sum_ic sum_k w[oc][ic][k] * x[ic][t+k-K/2][b], zero padded
inline void conv_forward(const double* x, std::size_t ic_n, const double* w, const double* bias,
                         double* y, std::size_t oc_n, std::size_t T, std::size_t B, std::size_t K) {
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(K / 2);
    for (std::size_t oc = 0; oc < oc_n; ++oc) {
        double* dst0 = y + oc * T * B;
        std::fill(dst0, dst0 + T * B, bias[oc]);
        for (std::size_t ic = 0; ic < ic_n; ++ic) {
            for (std::size_t k = 0; k < K; ++k) {
                const double wv = w[(oc * ic_n + ic) * K + k];
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - half;
                const std::size_t t0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                const std::size_t t1 = shift > 0 ? T - static_cast<std::size_t>(shift) : T;
                for (std::size_t t = t0; t < t1; ++t) {
                    const double* src = x + (ic * T + static_cast<std::size_t>(
                                                          static_cast<std::ptrdiff_t>(t) + shift)) * B;
                    double* dst = dst0 + t * B;
                    for (std::size_t b = 0; b < B; ++b) dst[b] += wv * src[b];
                }
            }
        }
    }
}

// Accumulates dW, dBias and the input gradient for the conv above.
inline void conv_backward(const double* x, std::size_t ic_n, const double* w, const double* dy,
                          std::size_t oc_n, std::size_t T, std::size_t B, std::size_t K,
                          double* dw, double* dbias, double* dx) {
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(K / 2);
    for (std::size_t oc = 0; oc < oc_n; ++oc) {
        const double* dy0 = dy + oc * T * B;
        double acc = 0.0;
        for (std::size_t i = 0; i < T * B; ++i) acc += dy0[i];
        dbias[oc] += acc;
        for (std::size_t ic = 0; ic < ic_n; ++ic) {
            for (std::size_t k = 0; k < K; ++k) {
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - half;
                const std::size_t t0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                const std::size_t t1 = shift > 0 ? T - static_cast<std::size_t>(shift) : T;
                const double wv = w[(oc * ic_n + ic) * K + k];
                double dwv = 0.0;
                for (std::size_t t = t0; t < t1; ++t) {
                    const std::size_t ts = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(t) + shift);
                    const double* src = x + (ic * T + ts) * B;
                    double* dsto = dx ? dx + (ic * T + ts) * B : nullptr;
                    const double* g = dy0 + t * B;
                    double local = 0.0;
                    for (std::size_t b = 0; b < B; ++b) local += g[b] * src[b];
                    dwv += local;
                    if (dsto)
                        for (std::size_t b = 0; b < B; ++b) dsto[b] += wv * g[b];
                }
                dw[(oc * ic_n + ic) * K + k] += dwv;
            }
        }
    }
}

/// Scratch space plus cached activations for one batch; reused across
/// batches so training does not thrash the allocator.
struct BatchWork {
    std::size_t B = 0, T = 0;
    std::vector<double> x;               // [C][T][B] standardized input
    std::vector<double> z1, r1, z2, r2;  // conv pre/post activations
    std::vector<double> gi, gf, gg, go;  // gate activations [T][H][B]
    std::vector<double> cell, tanh_c;    // [T][H][B]
    std::vector<double> hs;              // [T+1][H][B], hs[0] = 0
    std::vector<double> pred;            // [B]
    // backward scratch
    std::vector<double> dr2, dz1_like, da, dh, dc, dh_next;

    void resize(const CnnLstmConfig& cfg, std::size_t T_, std::size_t B_) {
        T = T_;
        B = B_;
        const std::size_t H = cfg.lstm_hidden;
        x.assign(cfg.in_channels * T * B, 0.0);
        z1.assign(cfg.conv1_out * T * B, 0.0);
        r1.assign(cfg.conv1_out * T * B, 0.0);
        z2.assign(cfg.conv2_out * T * B, 0.0);
        r2.assign(cfg.conv2_out * T * B, 0.0);
        gi.assign(T * H * B, 0.0);
        gf.assign(T * H * B, 0.0);
        gg.assign(T * H * B, 0.0);
        go.assign(T * H * B, 0.0);
        cell.assign(T * H * B, 0.0);
        tanh_c.assign(T * H * B, 0.0);
        hs.assign((T + 1) * H * B, 0.0);
        pred.assign(B, 0.0);
        dr2.assign(cfg.conv2_out * T * B, 0.0);
        dz1_like.assign(std::max(cfg.conv1_out, cfg.conv2_out) * T * B, 0.0);
        da.assign(4 * H * B, 0.0);
        dh.assign(H * B, 0.0);
        dc.assign(H * B, 0.0);
        dh_next.assign(H * B, 0.0);
    }
};

inline void forward_batch(const CnnLstmWeights& w, const SupervisedWindow* const* batch,
                          std::size_t B, BatchWork& wk) {
    const CnnLstmConfig& cfg = w.cfg;
    const std::size_t C = cfg.in_channels, T = batch[0]->width, H = cfg.lstm_hidden;
    if (wk.B != B || wk.T != T) wk.resize(cfg, T, B);

    const bool standardized = !w.ch_mean.empty();
    for (std::size_t b = 0; b < B; ++b) {
        const SupervisedWindow& s = *batch[b];
        if (s.channels != C) throw Error(errc::shape_mismatch, "window channel count mismatch");
        for (std::size_t c = 0; c < C; ++c) {
            const double mu = standardized ? w.ch_mean[c] : 0.0;
            const double sd = standardized ? w.ch_sd[c] : 1.0;
            for (std::size_t t = 0; t < T; ++t)
                wk.x[(c * T + t) * B + b] = (s.at(c, t) - mu) / sd;
        }
    }

    conv_forward(wk.x.data(), C, w.conv1_w.data(), w.conv1_b.data(), wk.z1.data(), cfg.conv1_out,
                 T, B, cfg.kernel);
    for (std::size_t i = 0; i < wk.z1.size(); ++i) wk.r1[i] = wk.z1[i] > 0.0 ? wk.z1[i] : 0.0;
    conv_forward(wk.r1.data(), cfg.conv1_out, w.conv2_w.data(), w.conv2_b.data(), wk.z2.data(),
                 cfg.conv2_out, T, B, cfg.kernel);
    for (std::size_t i = 0; i < wk.z2.size(); ++i) wk.r2[i] = wk.z2[i] > 0.0 ? wk.z2[i] : 0.0;

    const std::size_t G = 4 * H;
    std::vector<double>& a = wk.da;  // reuse as gate pre-activation buffer
    std::fill(wk.hs.begin(), wk.hs.begin() + static_cast<std::ptrdiff_t>(H * B), 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t g = 0; g < G; ++g)
            std::fill(a.begin() + static_cast<std::ptrdiff_t>(g * B),
                      a.begin() + static_cast<std::ptrdiff_t>((g + 1) * B), w.b_gates[g]);
        for (std::size_t g = 0; g < G; ++g) {
            double* dst = a.data() + g * B;
            for (std::size_t k = 0; k < cfg.conv2_out; ++k) {
                const double wv = w.w_ih[g * cfg.conv2_out + k];
                const double* src = wk.r2.data() + (k * T + t) * B;
                for (std::size_t b = 0; b < B; ++b) dst[b] += wv * src[b];
            }
            const double* hprev = wk.hs.data() + t * H * B;
            for (std::size_t k = 0; k < H; ++k) {
                const double wv = w.w_hh[g * H + k];
                const double* src = hprev + k * B;
                for (std::size_t b = 0; b < B; ++b) dst[b] += wv * src[b];
            }
        }
        const std::size_t off = t * H * B;
        const double* cprev = t == 0 ? nullptr : wk.cell.data() + (t - 1) * H * B;
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t b = 0; b < B; ++b) {
                const std::size_t j = h * B + b;
                const double iv = sigmoid(a[(0 * H + h) * B + b]);
                const double fv = sigmoid(a[(1 * H + h) * B + b]);
                const double gv = std::tanh(a[(2 * H + h) * B + b]);
                const double ov = sigmoid(a[(3 * H + h) * B + b]);
                const double cp = cprev ? cprev[j] : 0.0;
                const double cv = fv * cp + iv * gv;
                const double tc = std::tanh(cv);
                wk.gi[off + j] = iv;
                wk.gf[off + j] = fv;
                wk.gg[off + j] = gv;
                wk.go[off + j] = ov;
                wk.cell[off + j] = cv;
                wk.tanh_c[off + j] = tc;
                wk.hs[(t + 1) * H * B + j] = ov * tc;
            }
        }
    }

    const double* hT = wk.hs.data() + T * H * B;
    for (std::size_t b = 0; b < B; ++b) {
        double s = w.head_b[0];
        for (std::size_t h = 0; h < H; ++h) s += w.head_w[h] * hT[h * B + b];
        wk.pred[b] = s;
    }
}

/// Backpropagation for the batch last run through forward_batch; d_pred is
/// dLoss/dprediction per batch element. Gradients accumulate into `grad`.
inline void backward_batch(const CnnLstmWeights& w, BatchWork& wk, const double* d_pred,
                           CnnLstmWeights& grad) {
    const CnnLstmConfig& cfg = w.cfg;
    const std::size_t C = cfg.in_channels, T = wk.T, B = wk.B, H = cfg.lstm_hidden;
    const std::size_t G = 4 * H;

    const double* hT = wk.hs.data() + T * H * B;
    for (std::size_t b = 0; b < B; ++b) grad.head_b[0] += d_pred[b];
    for (std::size_t h = 0; h < H; ++h) {
        double s = 0.0;
        for (std::size_t b = 0; b < B; ++b) s += d_pred[b] * hT[h * B + b];
        grad.head_w[h] += s;
        for (std::size_t b = 0; b < B; ++b) wk.dh[h * B + b] = w.head_w[h] * d_pred[b];
    }
    std::fill(wk.dc.begin(), wk.dc.end(), 0.0);
    std::fill(wk.dr2.begin(), wk.dr2.end(), 0.0);

    for (std::size_t t = T; t-- > 0;) {
        const std::size_t off = t * H * B;
        const double* cprev = t == 0 ? nullptr : wk.cell.data() + (t - 1) * H * B;
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t b = 0; b < B; ++b) {
                const std::size_t j = h * B + b;
                const double iv = wk.gi[off + j], fv = wk.gf[off + j];
                const double gv = wk.gg[off + j], ov = wk.go[off + j];
                const double tc = wk.tanh_c[off + j];
                const double dhv = wk.dh[j];
                const double dcv = wk.dc[j] + dhv * ov * (1.0 - tc * tc);
                const double cp = cprev ? cprev[j] : 0.0;
                wk.da[(0 * H + h) * B + b] = dcv * gv * iv * (1.0 - iv);
                wk.da[(1 * H + h) * B + b] = dcv * cp * fv * (1.0 - fv);
                wk.da[(2 * H + h) * B + b] = dcv * iv * (1.0 - gv * gv);
                wk.da[(3 * H + h) * B + b] = dhv * tc * ov * (1.0 - ov);
                wk.dc[j] = dcv * fv;
            }
        }
        const double* hprev = wk.hs.data() + t * H * B;
        for (std::size_t g = 0; g < G; ++g) {
            const double* dag = wk.da.data() + g * B;
            double s = 0.0;
            for (std::size_t b = 0; b < B; ++b) s += dag[b];
            grad.b_gates[g] += s;
            for (std::size_t k = 0; k < cfg.conv2_out; ++k) {
                const double* src = wk.r2.data() + (k * T + t) * B;
                double acc = 0.0;
                for (std::size_t b = 0; b < B; ++b) acc += dag[b] * src[b];
                grad.w_ih[g * cfg.conv2_out + k] += acc;
            }
            for (std::size_t k = 0; k < H; ++k) {
                const double* src = hprev + k * B;
                double acc = 0.0;
                for (std::size_t b = 0; b < B; ++b) acc += dag[b] * src[b];
                grad.w_hh[g * H + k] += acc;
            }
        }
        // dx_t into dr2; dh_prev for the next (earlier) step
        for (std::size_t k = 0; k < cfg.conv2_out; ++k) {
            double* dst = wk.dr2.data() + (k * T + t) * B;
            for (std::size_t g = 0; g < G; ++g) {
                const double wv = w.w_ih[g * cfg.conv2_out + k];
                const double* dag = wk.da.data() + g * B;
                for (std::size_t b = 0; b < B; ++b) dst[b] += wv * dag[b];
            }
        }
        std::fill(wk.dh_next.begin(), wk.dh_next.end(), 0.0);
        for (std::size_t k = 0; k < H; ++k) {
            double* dst = wk.dh_next.data() + k * B;
            for (std::size_t g = 0; g < G; ++g) {
                const double wv = w.w_hh[g * H + k];
                const double* dag = wk.da.data() + g * B;
                for (std::size_t b = 0; b < B; ++b) dst[b] += wv * dag[b];
            }
        }
        std::swap(wk.dh, wk.dh_next);
    }

    // conv2 backward (through ReLU), then conv1
    for (std::size_t i = 0; i < wk.dr2.size(); ++i)
        wk.dr2[i] = wk.z2[i] > 0.0 ? wk.dr2[i] : 0.0;
    std::fill(wk.dz1_like.begin(), wk.dz1_like.end(), 0.0);
    conv_backward(wk.r1.data(), cfg.conv1_out, w.conv2_w.data(), wk.dr2.data(), cfg.conv2_out, T, B,
                  cfg.kernel, grad.conv2_w.data(), grad.conv2_b.data(), wk.dz1_like.data());
    for (std::size_t i = 0; i < cfg.conv1_out * T * B; ++i)
        wk.dz1_like[i] = wk.z1[i] > 0.0 ? wk.dz1_like[i] : 0.0;
    conv_backward(wk.x.data(), C, w.conv1_w.data(), wk.dz1_like.data(), cfg.conv1_out, T, B,
                  cfg.kernel, grad.conv1_w.data(), grad.conv1_b.data(), nullptr);
}

inline CnnLstmWeights zeros_like(const CnnLstmWeights& w) {
    CnnLstmWeights g = w;
    for (auto& p : param_refs(g)) std::fill(p.v->begin(), p.v->end(), 0.0);
    return g;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

/// Seeded uniform init in +/- 1/sqrt(fan_in) per layer; identical seeds give
/// bit-identical weights.
inline CnnLstmWeights init_cnn_lstm(const CnnLstmConfig& cfg) {
    if (cfg.in_channels < 1 || cfg.conv1_out < 1 || cfg.conv2_out < 1 || cfg.lstm_hidden < 1 ||
        cfg.kernel < 1 || cfg.kernel % 2 == 0)
        throw Error(errc::config_invalid, "layer sizes must be positive, kernel odd");

    CnnLstmWeights w;
    w.cfg = cfg;
    const std::size_t H = cfg.lstm_hidden;
    w.conv1_w.resize(cfg.conv1_out * cfg.in_channels * cfg.kernel);
    w.conv1_b.resize(cfg.conv1_out);
    w.conv2_w.resize(cfg.conv2_out * cfg.conv1_out * cfg.kernel);
    w.conv2_b.resize(cfg.conv2_out);
    w.w_ih.resize(4 * H * cfg.conv2_out);
    w.w_hh.resize(4 * H * H);
    w.b_gates.resize(4 * H);
    w.head_w.resize(H);
    w.head_b.resize(1);

    Rng rng(mix_seed(cfg.seed, 0x6e657477ULL));
    auto fill = [&](std::vector<double>& v, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& x : v) x = rng.uniform(-bound, bound);
    };
    fill(w.conv1_w, cfg.in_channels * cfg.kernel);
    fill(w.conv1_b, cfg.in_channels * cfg.kernel);
    fill(w.conv2_w, cfg.conv1_out * cfg.kernel);
    fill(w.conv2_b, cfg.conv1_out * cfg.kernel);
    fill(w.w_ih, cfg.conv2_out);
    fill(w.b_gates, cfg.conv2_out);
    fill(w.w_hh, H);
    fill(w.head_w, H);
    fill(w.head_b, H);
    return w;
}

/// Per-channel mean/sd over every window and timestep; degenerate channels
/// keep sd = 1 so standardization stays a bijection.
inline void set_channel_stats(CnnLstmWeights& w, const std::vector<SupervisedWindow>& data) {
    const std::size_t C = w.cfg.in_channels;
    std::vector<double> sum(C, 0.0), sq(C, 0.0);
    std::size_t n = 0;
    for (const auto& s : data) {
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < s.width; ++t) {
                const double v = s.at(c, t);
                sum[c] += v;
                sq[c] += v * v;
            }
        n += s.width;
    }
    w.ch_mean.resize(C);
    w.ch_sd.resize(C);
    for (std::size_t c = 0; c < C; ++c) {
        const double mu = sum[c] / static_cast<double>(n);
        const double var = sq[c] / static_cast<double>(n) - mu * mu;
        w.ch_mean[c] = mu;
        w.ch_sd[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

inline std::vector<double> cnn_lstm_forward(const CnnLstmWeights& w,
                                            const std::vector<const SupervisedWindow*>& batch) {
    if (batch.empty()) return {};
    detail::BatchWork wk;
    detail::forward_batch(w, batch.data(), batch.size(), wk);
    return wk.pred;
}

inline std::vector<double> predict(const CnnLstmWeights& w, const std::vector<SupervisedWindow>& data,
                                   std::size_t chunk = 256) {
    std::vector<double> out;
    out.reserve(data.size());
    detail::BatchWork wk;
    std::vector<const SupervisedWindow*> batch;
    for (std::size_t i = 0; i < data.size(); i += chunk) {
        const std::size_t m = std::min(chunk, data.size() - i);
        batch.resize(m);
        for (std::size_t j = 0; j < m; ++j) batch[j] = &data[i + j];
        detail::forward_batch(w, batch.data(), m, wk);
        out.insert(out.end(), wk.pred.begin(), wk.pred.begin() + static_cast<std::ptrdiff_t>(m));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

// Adam steps are scale-normalized, so a runaway learning rate inflates the
// loss without ever reaching IEEE infinity; the guard makes divergence a
// detectable condition instead of an endless climb. Relative to the first
// batch so the cutoff is independent of the target scale.
inline constexpr double kDivergenceFactor = 1e6;

/// Minibatch Adam on mean squared error. Deterministic given (data order,
/// seeds): shuffling, init, and update order are all pinned.
inline TrainResult cnn_lstm_train(const std::vector<SupervisedWindow>& data,
                                  const CnnLstmConfig& cfg, const TrainConfig& tcfg) {
    if (data.empty()) throw Error(errc::empty_dataset, "no training windows");
    if (tcfg.learning_rate <= 0.0 || tcfg.epochs < 1 || tcfg.batch_size < 1)
        throw Error(errc::config_invalid, "bad training configuration");
    for (const auto& s : data)
        if (s.channels != cfg.in_channels)
            throw Error(errc::shape_mismatch, "window channel count does not match config");

    TrainResult res;
    res.weights = init_cnn_lstm(cfg);
    set_channel_stats(res.weights, data);
    CnnLstmWeights grad = detail::zeros_like(res.weights);
    CnnLstmWeights m1 = detail::zeros_like(res.weights);
    CnnLstmWeights m2 = detail::zeros_like(res.weights);

    auto wp = detail::param_refs(res.weights);
    auto gp = detail::param_refs(grad);
    auto m1p = detail::param_refs(m1);
    auto m2p = detail::param_refs(m2);

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    detail::BatchWork wk;
    std::vector<const SupervisedWindow*> batch;
    std::vector<double> d_pred;
    long long step = 0;
    double divergence_guard = 0.0;  // set from the first batch loss

    for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(tcfg.seed, 0x73687566ULL + epoch));
        shuffle_rng.shuffle(order);
        double sq_sum = 0.0;

        for (std::size_t pos = 0; pos < order.size(); pos += tcfg.batch_size) {
            const std::size_t B = std::min(tcfg.batch_size, order.size() - pos);
            batch.resize(B);
            for (std::size_t j = 0; j < B; ++j) batch[j] = &data[order[pos + j]];

            detail::forward_batch(res.weights, batch.data(), B, wk);
            d_pred.resize(B);
            double batch_sq = 0.0;
            for (std::size_t b = 0; b < B; ++b) {
                const double e = wk.pred[b] - batch[b]->target;
                batch_sq += e * e;
                d_pred[b] = 2.0 * e / static_cast<double>(B);
            }
            const double batch_loss = batch_sq / static_cast<double>(B);
            if (divergence_guard == 0.0)
                divergence_guard = kDivergenceFactor * std::max(batch_loss, 1e-6);
            if (!std::isfinite(batch_loss) || batch_loss > divergence_guard)
                throw Error(errc::diverged_loss, "training loss diverged");
            sq_sum += batch_sq;

            for (auto& p : gp) std::fill(p.v->begin(), p.v->end(), 0.0);
            detail::backward_batch(res.weights, wk, d_pred.data(), grad);

            ++step;
            const double bc1 = 1.0 - std::pow(tcfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(tcfg.beta2, static_cast<double>(step));
            for (std::size_t pi = 0; pi < wp.size(); ++pi) {
                std::vector<double>& wv = *wp[pi].v;
                std::vector<double>& gv = *gp[pi].v;
                std::vector<double>& mv = *m1p[pi].v;
                std::vector<double>& vv = *m2p[pi].v;
                for (std::size_t k = 0; k < wv.size(); ++k) {
                    mv[k] = tcfg.beta1 * mv[k] + (1.0 - tcfg.beta1) * gv[k];
                    vv[k] = tcfg.beta2 * vv[k] + (1.0 - tcfg.beta2) * gv[k] * gv[k];
                    wv[k] -= tcfg.learning_rate * (mv[k] / bc1) /
                             (std::sqrt(vv[k] / bc2) + tcfg.adam_eps);
                }
            }
        }
        res.epoch_loss.push_back(sq_sum / static_cast<double>(order.size()));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

/// Squared error of one window; the objective the gradient check probes.
inline double sample_loss(const CnnLstmWeights& w, const SupervisedWindow& s) {
    const SupervisedWindow* p = &s;
    detail::BatchWork wk;
    detail::forward_batch(w, &p, 1, wk);
    const double e = wk.pred[0] - s.target;
    return e * e;
}

namespace detail {

/// Loss plus a fingerprint of the ReLU active set; finite differences are
/// only trusted between points with the same active set (the loss is not
/// differentiable across a ReLU flip).
inline double sample_loss_masked(const CnnLstmWeights& w, const SupervisedWindow& s,
                                 BatchWork& wk, std::uint64_t& mask_hash) {
    const SupervisedWindow* p = &s;
    forward_batch(w, &p, 1, wk);
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](bool on) {
        h ^= on ? 0x9eULL : 0x31ULL;
        h *= 1099511628211ULL;
    };
    for (double z : wk.z1) mix(z > 0.0);
    for (double z : wk.z2) mix(z > 0.0);
    mask_hash = h;
    const double e = wk.pred[0] - s.target;
    return e * e;
}

} // namespace detail

/// Analytic dLoss/dtheta for one window, laid out like the weights.
inline CnnLstmWeights loss_gradients(const CnnLstmWeights& w, const SupervisedWindow& s) {
    const SupervisedWindow* p = &s;
    detail::BatchWork wk;
    detail::forward_batch(w, &p, 1, wk);
    CnnLstmWeights grad = detail::zeros_like(w);
    const double d_pred = 2.0 * (wk.pred[0] - s.target);
    detail::backward_batch(w, wk, &d_pred, grad);
    return grad;
}

struct GradientCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Central finite differences against the analytic gradients over every
/// parameter, or a seeded subsample when `subsample` > 0 (kept >= 500 to
/// stay meaningful on the full network).
inline GradientCheckResult gradient_check(const CnnLstmWeights& w, const SupervisedWindow& s,
                                          double eps = 1e-5, std::size_t subsample = 0,
                                          std::uint64_t seed = 0) {
    CnnLstmWeights work = w;
    const CnnLstmWeights analytic = loss_gradients(w, s);

    auto wp = detail::param_refs(work);
    CnnLstmWeights analytic_copy = analytic;
    auto ap = detail::param_refs(analytic_copy);

    std::size_t total = 0;
    for (auto& p : wp) total += p.v->size();
    std::vector<std::size_t> picks;
    if (subsample > 0 && subsample < total) {
        const std::size_t want = std::max<std::size_t>(subsample, 500);
        Rng rng(mix_seed(seed, 0x67636bULL));
        std::vector<std::size_t> all(total);
        for (std::size_t i = 0; i < total; ++i) all[i] = i;
        rng.shuffle(all);
        picks.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(want, total)));
        std::sort(picks.begin(), picks.end());
    } else {
        picks.resize(total);
        for (std::size_t i = 0; i < total; ++i) picks[i] = i;
    }

    GradientCheckResult res;
    detail::BatchWork wk;
    std::size_t flat = 0, pick_pos = 0;
    for (std::size_t pi = 0; pi < wp.size() && pick_pos < picks.size(); ++pi) {
        std::vector<double>& vec = *wp[pi].v;
        const std::vector<double>& avec = *ap[pi].v;
        for (std::size_t k = 0; k < vec.size() && pick_pos < picks.size(); ++k, ++flat) {
            if (picks[pick_pos] != flat) continue;
            ++pick_pos;
            const double orig = vec[k];
            std::uint64_t mask_p = 0, mask_m = 0;
            vec[k] = orig + eps;
            const double lp = detail::sample_loss_masked(work, s, wk, mask_p);
            vec[k] = orig - eps;
            const double lm = detail::sample_loss_masked(work, s, wk, mask_m);
            vec[k] = orig;
            // a ReLU flipped between the probes: the loss is not smooth along
            // this coordinate here, so the central difference says nothing
            if (mask_p != mask_m) continue;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double ga = avec[k];
            const double rel = std::abs(ga - numeric) / std::max(std::abs(ga) + std::abs(numeric), 1e-8);
            if (rel > res.max_rel_error) res.max_rel_error = rel;
            ++res.checked;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Artifact serialization
// ---------------------------------------------------------------------------

// Layout: "paee-model v1" / "kind cnn_lstm" / config lines / named tensors,
// one value per line at %.17g (documented in the README).
inline std::string to_text(const CnnLstmWeights& w) {
    std::string out = "paee-model v1\nkind cnn_lstm\n";
    out += "seed " + std::to_string(w.cfg.seed) + "\n";
    out += "in_channels " + std::to_string(w.cfg.in_channels) + "\n";
    out += "conv1_out " + std::to_string(w.cfg.conv1_out) + "\n";
    out += "conv2_out " + std::to_string(w.cfg.conv2_out) + "\n";
    out += "kernel " + std::to_string(w.cfg.kernel) + "\n";
    out += "lstm_hidden " + std::to_string(w.cfg.lstm_hidden) + "\n";
    auto tensor = [&out](const char* name, const std::vector<double>& v) {
        out += std::string("tensor ") + name + " " + std::to_string(v.size()) + "\n";
        for (double x : v) out += csv::format_full(x) + "\n";
    };
    for (const auto& p : detail::param_refs(w)) tensor(p.name, *p.v);
    tensor("ch_mean", w.ch_mean);
    tensor("ch_sd", w.ch_sd);
    return out;
}

inline CnnLstmWeights cnn_lstm_from_text(const std::string& text) {
    const auto lines = csv::split_lines(text);
    if (lines.size() < 8 || lines[0] != "paee-model v1" || lines[1] != "kind cnn_lstm")
        throw Error(errc::malformed_row, "not a cnn_lstm model artifact");
    std::size_t i = 2;
    auto kv = [&](const char* key) -> std::string {
        const std::string_view line = lines.at(i++);
        const std::size_t sp = line.find(' ');
        if (sp == std::string_view::npos || line.substr(0, sp) != key)
            throw Error(errc::malformed_row, std::string("expected field ") + key);
        return std::string(line.substr(sp + 1));
    };
    CnnLstmConfig cfg;
    cfg.seed = std::stoull(kv("seed"));
    cfg.in_channels = std::stoul(kv("in_channels"));
    cfg.conv1_out = std::stoul(kv("conv1_out"));
    cfg.conv2_out = std::stoul(kv("conv2_out"));
    cfg.kernel = std::stoul(kv("kernel"));
    cfg.lstm_hidden = std::stoul(kv("lstm_hidden"));

    CnnLstmWeights w = init_cnn_lstm(cfg);
    auto read_tensor = [&](std::vector<double>& dst, const std::string& name) {
        const std::string_view line = lines.at(i++);
        const std::string expect = "tensor " + name + " ";
        if (line.substr(0, expect.size()) != expect)
            throw Error(errc::malformed_row, "expected " + expect + "<n>");
        const std::size_t n = std::stoul(std::string(line.substr(expect.size())));
        dst.resize(n);
        for (std::size_t k = 0; k < n; ++k) dst[k] = csv::parse_double(lines.at(i++), i);
    };
    for (const auto& p : detail::param_refs(w)) read_tensor(*p.v, p.name);
    read_tensor(w.ch_mean, "ch_mean");
    read_tensor(w.ch_sd, "ch_sd");
    return w;
}

} // namespace paee::cnn_lstm
