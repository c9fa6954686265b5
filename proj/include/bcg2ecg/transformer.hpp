#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bcg2ecg/rng.hpp"

namespace bcg2ecg {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelConfig {
    int seq_len = 500;
    int d_model = 512;
    int n_layers = 4;
    int n_heads = 8;
    int d_ff = 2048;

    int d_k() const { return d_model / n_heads; }

    void validate() const {
        if (seq_len < 1 || d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1)
            throw ModelError("model dimensions must be >= 1");
        if (d_model % n_heads != 0) throw ModelError("d_model must be divisible by n_heads");
        if (d_model % 2 != 0) throw ModelError("d_model must be even (sinusoidal encoding)");
    }

    bool operator==(const ModelConfig&) const = default;
};

// Encoder layer weights. Q/K/V keep all heads in one [d_model x d_model]
// matrix; head h owns the column block [h*d_k, (h+1)*d_k).
template <typename S>
struct LayerParams {
    Mat<S> w_q, w_k, w_v;   // [d_model x d_model], bias-free
    Mat<S> w_o;             // [d_model x d_model]
    Mat<S> w_ff1;           // [d_model x d_ff]
    Vec<S> b_ff1;           // [d_ff]
    Mat<S> w_ff2;           // [d_ff x d_model]
    Vec<S> b_ff2;           // [d_model]
    Vec<S> ln1_gain, ln1_bias;  // [d_model]
    Vec<S> ln2_gain, ln2_bias;  // [d_model]
};

template <typename S>
struct ModelParams {
    Vec<S> input_w, input_b;  // scalar -> d_model embedding
    std::vector<LayerParams<S>> layers;
    Vec<S> output_w;  // [d_model]
    Vec<S> output_b;  // [1]
};

// Visit every parameter tensor in declared (checkpoint) order. Used by the
// optimizer, serialization, and the finite-difference gradient check.
template <typename S, typename F>
void for_each_tensor(ModelParams<S>& p, F&& f) {
    f(p.input_w);
    f(p.input_b);
    for (auto& l : p.layers) {
        f(l.w_q);
        f(l.w_k);
        f(l.w_v);
        f(l.w_o);
        f(l.w_ff1);
        f(l.b_ff1);
        f(l.w_ff2);
        f(l.b_ff2);
        f(l.ln1_gain);
        f(l.ln1_bias);
        f(l.ln2_gain);
        f(l.ln2_bias);
    }
    f(p.output_w);
    f(p.output_b);
}

template <typename S, typename F>
void for_each_tensor(const ModelParams<S>& p, F&& f) {
    for_each_tensor(const_cast<ModelParams<S>&>(p), [&](auto& t) { f(std::as_const(t)); });
}

template <typename S, typename F>
void for_each_tensor_pair(ModelParams<S>& a, ModelParams<S>& b, F&& f) {
    f(a.input_w, b.input_w);
    f(a.input_b, b.input_b);
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        auto& la = a.layers[i];
        auto& lb = b.layers[i];
        f(la.w_q, lb.w_q);
        f(la.w_k, lb.w_k);
        f(la.w_v, lb.w_v);
        f(la.w_o, lb.w_o);
        f(la.w_ff1, lb.w_ff1);
        f(la.b_ff1, lb.b_ff1);
        f(la.w_ff2, lb.w_ff2);
        f(la.b_ff2, lb.b_ff2);
        f(la.ln1_gain, lb.ln1_gain);
        f(la.ln1_bias, lb.ln1_bias);
        f(la.ln2_gain, lb.ln2_gain);
        f(la.ln2_bias, lb.ln2_bias);
    }
    f(a.output_w, b.output_w);
    f(a.output_b, b.output_b);
}

template <typename S>
ModelParams<S> zero_params(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams<S> p;
    p.input_w = Vec<S>::Zero(cfg.d_model);
    p.input_b = Vec<S>::Zero(cfg.d_model);
    p.layers.resize(cfg.n_layers);
    for (auto& l : p.layers) {
        l.w_q = Mat<S>::Zero(cfg.d_model, cfg.d_model);
        l.w_k = Mat<S>::Zero(cfg.d_model, cfg.d_model);
        l.w_v = Mat<S>::Zero(cfg.d_model, cfg.d_model);
        l.w_o = Mat<S>::Zero(cfg.d_model, cfg.d_model);
        l.w_ff1 = Mat<S>::Zero(cfg.d_model, cfg.d_ff);
        l.b_ff1 = Vec<S>::Zero(cfg.d_ff);
        l.w_ff2 = Mat<S>::Zero(cfg.d_ff, cfg.d_model);
        l.b_ff2 = Vec<S>::Zero(cfg.d_model);
        l.ln1_gain = Vec<S>::Zero(cfg.d_model);
        l.ln1_bias = Vec<S>::Zero(cfg.d_model);
        l.ln2_gain = Vec<S>::Zero(cfg.d_model);
        l.ln2_bias = Vec<S>::Zero(cfg.d_model);
    }
    p.output_w = Vec<S>::Zero(cfg.d_model);
    p.output_b = Vec<S>::Zero(1);
    return p;
}

// Glorot-uniform weights (per-head fan for Q/K/V blocks), zero biases,
// unit LayerNorm gains. Draws are made in double then cast, so f32 and f64
// models start from the same numbers.
template <typename S>
ModelParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams<S> p = zero_params<S>(cfg);
    Rng rng(seed);
    auto glorot = [&](auto& m, int fan_in, int fan_out) {
        double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                m(r, c) = static_cast<S>(rng.uniform(-bound, bound));
    };
    glorot(p.input_w, 1, cfg.d_model);
    for (auto& l : p.layers) {
        const int dk = cfg.d_k();
        for (int h = 0; h < cfg.n_heads; ++h) {
            auto bq = l.w_q.block(0, h * dk, cfg.d_model, dk);
            auto bk = l.w_k.block(0, h * dk, cfg.d_model, dk);
            auto bv = l.w_v.block(0, h * dk, cfg.d_model, dk);
            glorot(bq, cfg.d_model, dk);
            glorot(bk, cfg.d_model, dk);
            glorot(bv, cfg.d_model, dk);
        }
        glorot(l.w_o, cfg.d_model, cfg.d_model);
        glorot(l.w_ff1, cfg.d_model, cfg.d_ff);
        glorot(l.w_ff2, cfg.d_ff, cfg.d_model);
        l.ln1_gain.setOnes();
        l.ln2_gain.setOnes();
    }
    glorot(p.output_w, cfg.d_model, 1);
    return p;
}

// PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(same argument)
template <typename S = double>
Mat<S> positional_encoding(int seq_len, int d_model) {
    if (seq_len < 1 || d_model < 1) throw ModelError("positional_encoding: dims must be >= 1");
    if (d_model % 2 != 0) throw ModelError("positional_encoding: d_model must be even");
    Mat<S> pe(seq_len, d_model);
    for (int i = 0; i < d_model / 2; ++i) {
        double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(d_model));
        for (int pos = 0; pos < seq_len; ++pos) {
            double arg = pos * freq;
            pe(pos, 2 * i) = static_cast<S>(std::sin(arg));
            pe(pos, 2 * i + 1) = static_cast<S>(std::cos(arg));
        }
    }
    return pe;
}

template <typename S>
void softmax_rows_inplace(Mat<S>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        S mx = m.row(r).maxCoeff();
        m.row(r) = (m.row(r).array() - mx).exp();
        m.row(r) /= m.row(r).sum();
    }
}

// softmax(Q K^T / sqrt(d_k)) V, full bidirectional attention, no masking.
// probs_out, when given, receives the attention matrix.
template <typename S>
Mat<S> attention(const Mat<S>& q, const Mat<S>& k, const Mat<S>& v, int d_k,
                 Mat<S>* probs_out = nullptr) {
    if (d_k < 1) throw ModelError("attention: d_k must be positive");
    if (q.cols() != k.cols() || k.rows() != v.rows())
        throw ModelError("attention: shape mismatch");
    Mat<S> scores = q * k.transpose() / std::sqrt(static_cast<S>(d_k));
    softmax_rows_inplace(scores);
    Mat<S> out = scores * v;
    if (probs_out) *probs_out = std::move(scores);
    return out;
}

template <typename S>
struct LnCache {
    Mat<S> x_hat;     // (x - mean) * inv_std, per row
    Vec<S> inv_std;   // per row
};

template <typename S>
struct LayerCache {
    Mat<S> x_in;                      // layer input
    Mat<S> q, k, v;                   // projected, all heads
    std::vector<Mat<S>> attn_probs;   // per head, rows sum to 1
    Mat<S> heads_concat;              // before W_O
    LnCache<S> ln1, ln2;
    Mat<S> x_ln1;                     // after first add&norm
    Mat<S> ffn_pre;                   // before ReLU
};

// Intermediates retained for backpropagation.
template <typename S>
struct Activation {
    Vec<S> input;        // the raw 500-sample BCG
    Mat<S> embedded;     // input projection + positional encoding
    std::vector<LayerCache<S>> layers;
    Mat<S> encoder_out;
};

inline constexpr double kLayerNormEps = 1e-5;

template <typename S>
Mat<S> layer_norm(const Mat<S>& x, const Vec<S>& gain, const Vec<S>& bias, LnCache<S>& cache) {
    const auto d = static_cast<S>(x.cols());
    cache.x_hat.resize(x.rows(), x.cols());
    cache.inv_std.resize(x.rows());
    Mat<S> out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        S mean = x.row(r).mean();
        S var = (x.row(r).array() - mean).square().sum() / d;
        S inv = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
        cache.inv_std(r) = inv;
        cache.x_hat.row(r) = (x.row(r).array() - mean) * inv;
        out.row(r) = cache.x_hat.row(r).cwiseProduct(gain.transpose()) + bias.transpose();
    }
    return out;
}

// One multi-head block: per-head attention on column slices of the shared
// projections, concatenated and mixed by W_O.
template <typename S>
Mat<S> multi_head(const Mat<S>& x, const LayerParams<S>& lp, int n_heads,
                  LayerCache<S>* cache = nullptr) {
    const auto d_model = static_cast<int>(x.cols());
    if (n_heads < 1 || d_model % n_heads != 0) throw ModelError("multi_head: bad head count");
    const int dk = d_model / n_heads;
    const auto t = x.rows();

    Mat<S> q = x * lp.w_q;
    Mat<S> k = x * lp.w_k;
    Mat<S> v = x * lp.w_v;
    Mat<S> concat(t, d_model);
    std::vector<Mat<S>> probs(cache ? n_heads : 0);
    for (int h = 0; h < n_heads; ++h) {
        Mat<S> qh = q.middleCols(h * dk, dk);
        Mat<S> kh = k.middleCols(h * dk, dk);
        Mat<S> vh = v.middleCols(h * dk, dk);
        concat.middleCols(h * dk, dk) =
            attention<S>(qh, kh, vh, dk, cache ? &probs[h] : nullptr);
    }
    if (cache) {
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->attn_probs = std::move(probs);
        cache->heads_concat = concat;
    }
    return concat * lp.w_o;
}

template <typename S>
struct ForwardResult {
    Vec<S> pred;
    Activation<S> acts;
};

// Full encoder pass: scalar->d_model embedding, sinusoidal PE, n_layers of
// (multi-head -> add&norm -> FFN/ReLU -> add&norm) in post-norm order, then
// a per-position d_model->1 projection. Pure function of (input, params).
template <typename S>
ForwardResult<S> forward(const Vec<S>& bcg, const ModelParams<S>& params, const ModelConfig& cfg,
                         const Mat<S>* pe = nullptr) {
    cfg.validate();
    if (bcg.size() != cfg.seq_len) throw ModelError("forward: input length != seq_len");
    for (Eigen::Index i = 0; i < bcg.size(); ++i)
        if (!(bcg(i) >= S(0) && bcg(i) <= S(1)))
            throw ModelError("forward: input sample outside [0,1] at position " +
                             std::to_string(i));
    if (static_cast<int>(params.layers.size()) != cfg.n_layers)
        throw ModelError("forward: params do not match config layer count");

    ForwardResult<S> res;
    res.acts.input = bcg;

    Mat<S> x = bcg * params.input_w.transpose();  // [T x D]
    x.rowwise() += params.input_b.transpose();
    if (pe)
        x += *pe;
    else
        x += positional_encoding<S>(cfg.seq_len, cfg.d_model);
    res.acts.embedded = x;

    res.acts.layers.resize(cfg.n_layers);
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto& lc = res.acts.layers[l];
        const auto& lp = params.layers[l];
        lc.x_in = x;

        Mat<S> attn_out = multi_head<S>(x, lp, cfg.n_heads, &lc);
        Mat<S> res1 = x + attn_out;
        lc.x_ln1 = layer_norm<S>(res1, lp.ln1_gain, lp.ln1_bias, lc.ln1);

        lc.ffn_pre = lc.x_ln1 * lp.w_ff1;
        lc.ffn_pre.rowwise() += lp.b_ff1.transpose();
        Mat<S> hidden = lc.ffn_pre.cwiseMax(S(0));
        Mat<S> ffn_out = hidden * lp.w_ff2;
        ffn_out.rowwise() += lp.b_ff2.transpose();

        Mat<S> res2 = lc.x_ln1 + ffn_out;
        x = layer_norm<S>(res2, lp.ln2_gain, lp.ln2_bias, lc.ln2);

        if (!x.allFinite())
            throw ModelError("forward: NaN/Inf detected after encoder layer " +
                             std::to_string(l));
    }
    res.acts.encoder_out = x;

    res.pred = x * params.output_w;
    res.pred.array() += params.output_b(0);
    return res;
}

namespace detail {

inline std::uint32_t crc32_update(std::uint32_t crc, const void* data, std::size_t n) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    const auto* p = static_cast<const unsigned char*>(data);
    crc = ~crc;
    for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

}  // namespace detail

// Checkpoint: magic `BETF`, version u16=1, the five ModelConfig fields as
// u32, every tensor in declared order as f32 LE row-major (Q/K/V written as
// per-head [d_model x d_k] blocks), then a CRC32 of all preceding bytes.
template <typename S>
void save_checkpoint(const ModelParams<S>& params, const ModelConfig& cfg,
                     const std::filesystem::path& path);

template <typename S>
std::pair<ModelParams<S>, ModelConfig> load_checkpoint(const std::filesystem::path& path);

}  // namespace bcg2ecg

#include "bcg2ecg/checkpoint_impl.hpp"
