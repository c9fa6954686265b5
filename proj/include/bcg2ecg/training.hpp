#pragma once

#include <cstdint>
#include <thread>
#include <vector>

#include "bcg2ecg/recording.hpp"
#include "bcg2ecg/rng.hpp"
#include "bcg2ecg/transformer.hpp"

namespace bcg2ecg {

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    int epochs = 300;
    double learning_rate = 1e-4;
    int batch_size = 8;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    int threads = 1;  // forward/backward parallelism within a batch

    void validate() const {
        if (epochs < 1) throw TrainError("epochs must be >= 1");
        if (!(learning_rate > 0.0)) throw TrainError("learning_rate must be positive");
        if (batch_size < 1) throw TrainError("batch_size must be >= 1");
        if (!(beta1 > 0.0 && beta1 < 1.0)) throw TrainError("beta1 must be in (0,1)");
        if (!(beta2 > 0.0 && beta2 < 1.0)) throw TrainError("beta2 must be in (0,1)");
        if (!(epsilon > 0.0)) throw TrainError("epsilon must be positive");
        if (threads < 1) throw TrainError("threads must be >= 1");
    }
};

// Flat views over every parameter tensor, in declared order. Lets the
// optimizer and the gradient check treat the model as one long vector.
template <typename S>
std::vector<std::pair<S*, std::size_t>> tensor_views(ModelParams<S>& p) {
    std::vector<std::pair<S*, std::size_t>> v;
    for_each_tensor(p, [&](auto& t) { v.emplace_back(t.data(), static_cast<std::size_t>(t.size())); });
    return v;
}

template <typename S>
std::size_t param_count(const ModelParams<S>& p) {
    std::size_t n = 0;
    for_each_tensor(p, [&](const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
}

template <typename S>
struct LossGrad {
    S loss;
    Vec<S> grad_pred;
};

// loss = (1/N) sum (pred - target)^2, grad = (2/N)(pred - target)
template <typename S>
LossGrad<S> mse_loss(const Vec<S>& pred, const Vec<S>& target) {
    if (pred.size() != target.size()) throw TrainError("mse_loss: length mismatch");
    if (pred.size() == 0) throw TrainError("mse_loss: empty input");
    const auto n = static_cast<S>(pred.size());
    Vec<S> diff = pred - target;
    return {diff.squaredNorm() / n, Vec<S>(diff * (S(2) / n))};
}

namespace detail {

template <typename S>
struct LnGrads {
    Mat<S> dx;
    Vec<S> dgain, dbias;
};

template <typename S>
LnGrads<S> layer_norm_backward(const Mat<S>& dy, const LnCache<S>& cache, const Vec<S>& gain) {
    LnGrads<S> g;
    g.dgain = (dy.array() * cache.x_hat.array()).colwise().sum().transpose();
    g.dbias = dy.colwise().sum().transpose();
    g.dx.resize(dy.rows(), dy.cols());
    const auto d = static_cast<S>(dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        Eigen::Array<S, 1, Eigen::Dynamic> dxhat =
            dy.row(r).array() * gain.transpose().array();
        S m1 = dxhat.sum() / d;
        S m2 = (dxhat * cache.x_hat.row(r).array()).sum() / d;
        g.dx.row(r) =
            cache.inv_std(r) * (dxhat - m1 - cache.x_hat.row(r).array() * m2).matrix();
    }
    return g;
}

}  // namespace detail

// Exact reverse-mode gradients of the loss w.r.t. every parameter tensor.
// `acts` must come from the matching forward call. Gradients are written
// into `grads` (overwritten, shapes must match the model).
template <typename S>
void backward(const Activation<S>& acts, const Vec<S>& grad_pred, const ModelParams<S>& params,
              const ModelConfig& cfg, ModelParams<S>& grads) {
    if (static_cast<int>(acts.layers.size()) != cfg.n_layers)
        throw TrainError("backward: activation does not match config");
    if (grad_pred.size() != cfg.seq_len) throw TrainError("backward: grad_pred length mismatch");

    const int dk = cfg.d_k();
    const S scale = S(1) / std::sqrt(static_cast<S>(dk));

    // output projection: pred_t = x_t . w_out + b_out
    grads.output_w = acts.encoder_out.transpose() * grad_pred;
    grads.output_b(0) = grad_pred.sum();
    Mat<S> dx = grad_pred * params.output_w.transpose();  // [T x D]

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const auto& lc = acts.layers[l];
        const auto& lp = params.layers[l];
        auto& lg = grads.layers[l];

        // second add&norm
        auto ln2 = detail::layer_norm_backward<S>(dx, lc.ln2, lp.ln2_gain);
        lg.ln2_gain = std::move(ln2.dgain);
        lg.ln2_bias = std::move(ln2.dbias);
        Mat<S>& d_res2 = ln2.dx;

        // FFN branch: F = relu(Z) W2 + b2, Z = X1 W1 + b1
        Mat<S> hidden = lc.ffn_pre.cwiseMax(S(0));
        lg.w_ff2 = hidden.transpose() * d_res2;
        lg.b_ff2 = d_res2.colwise().sum().transpose();
        Mat<S> d_hidden = d_res2 * lp.w_ff2.transpose();
        Mat<S> d_pre =
            (lc.ffn_pre.array() > S(0)).template cast<S>().array() * d_hidden.array();
        lg.w_ff1 = lc.x_ln1.transpose() * d_pre;
        lg.b_ff1 = d_pre.colwise().sum().transpose();

        Mat<S> d_x1 = d_res2 + d_pre * lp.w_ff1.transpose();

        // first add&norm
        auto ln1 = detail::layer_norm_backward<S>(d_x1, lc.ln1, lp.ln1_gain);
        lg.ln1_gain = std::move(ln1.dgain);
        lg.ln1_bias = std::move(ln1.dbias);
        Mat<S>& d_res1 = ln1.dx;

        // attention branch: A = concat(heads) W_O
        lg.w_o = lc.heads_concat.transpose() * d_res1;
        Mat<S> d_concat = d_res1 * lp.w_o.transpose();

        Mat<S> d_q(dx.rows(), cfg.d_model);
        Mat<S> d_k(dx.rows(), cfg.d_model);
        Mat<S> d_v(dx.rows(), cfg.d_model);
        for (int h = 0; h < cfg.n_heads; ++h) {
            const Mat<S>& p = lc.attn_probs[h];
            auto d_oh = d_concat.middleCols(h * dk, dk);
            auto vh = lc.v.middleCols(h * dk, dk);
            auto qh = lc.q.middleCols(h * dk, dk);
            auto kh = lc.k.middleCols(h * dk, dk);

            d_v.middleCols(h * dk, dk) = p.transpose() * d_oh;
            Mat<S> d_p = d_oh * vh.transpose();
            // softmax rows: dS = P o (dP - rowsum(dP o P))
            Vec<S> row_dot = (d_p.array() * p.array()).rowwise().sum();
            Mat<S> d_s = p.array() * (d_p.colwise() - row_dot).array();
            d_q.middleCols(h * dk, dk) = scale * (d_s * kh);
            d_k.middleCols(h * dk, dk) = scale * (d_s.transpose() * qh);
        }
        lg.w_q = lc.x_in.transpose() * d_q;
        lg.w_k = lc.x_in.transpose() * d_k;
        lg.w_v = lc.x_in.transpose() * d_v;

        dx = d_res1 + d_q * lp.w_q.transpose() + d_k * lp.w_k.transpose() +
             d_v * lp.w_v.transpose();
    }

    // embedding: X0[t,:] = bcg[t] * input_w + input_b (PE is a constant)
    grads.input_w = dx.transpose() * acts.input;
    grads.input_b = dx.colwise().sum().transpose();
}

template <typename S>
ModelParams<S> backward(const Activation<S>& acts, const Vec<S>& grad_pred,
                        const ModelParams<S>& params, const ModelConfig& cfg) {
    ModelParams<S> grads = zero_params<S>(cfg);
    backward(acts, grad_pred, params, cfg, grads);
    return grads;
}

template <typename S>
struct OptimizerState {
    ModelParams<S> m, v;
    long step = 0;

    static OptimizerState zero(const ModelConfig& cfg) {
        return {zero_params<S>(cfg), zero_params<S>(cfg), 0};
    }
};

// Standard bias-corrected Adam.
template <typename S>
void adam_step(ModelParams<S>& params, const ModelParams<S>& grads, OptimizerState<S>& state,
               const TrainConfig& cfg) {
    cfg.validate();
    auto pv = tensor_views(params);
    auto gv = tensor_views(const_cast<ModelParams<S>&>(grads));
    auto mv = tensor_views(state.m);
    auto vv = tensor_views(state.v);
    if (pv.size() != gv.size()) throw TrainError("adam_step: shape mismatch");

    for (const auto& [g, n] : gv)
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(static_cast<double>(g[i])))
                throw TrainError("adam_step: non-finite gradient");

    state.step += 1;
    const S lr = static_cast<S>(cfg.learning_rate);
    const S b1 = static_cast<S>(cfg.beta1);
    const S b2 = static_cast<S>(cfg.beta2);
    const S eps = static_cast<S>(cfg.epsilon);
    const S bc1 = S(1) - std::pow(b1, static_cast<S>(state.step));
    const S bc2 = S(1) - std::pow(b2, static_cast<S>(state.step));

    for (std::size_t t = 0; t < pv.size(); ++t) {
        S* p = pv[t].first;
        const S* g = gv[t].first;
        S* m = mv[t].first;
        S* v = vv[t].first;
        const std::size_t n = pv[t].second;
        if (n != gv[t].second || n != mv[t].second || n != vv[t].second)
            throw TrainError("adam_step: tensor size mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (S(1) - b1) * g[i];
            v[i] = b2 * v[i] + (S(1) - b2) * g[i] * g[i];
            S m_hat = m[i] / bc1;
            S v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

template <typename S>
struct TrainResult {
    ModelParams<S> params;
    std::vector<double> loss_history;  // per-epoch mean segment loss
};

namespace detail {

template <typename S>
void accumulate(ModelParams<S>& into, const ModelParams<S>& from) {
    auto a = tensor_views(into);
    auto b = tensor_views(const_cast<ModelParams<S>&>(from));
    for (std::size_t t = 0; t < a.size(); ++t)
        Eigen::Map<Vec<S>>(a[t].first, a[t].second) +=
            Eigen::Map<const Vec<S>>(b[t].first, b[t].second);
}

template <typename S>
void scale_params(ModelParams<S>& p, S factor) {
    for (auto& [ptr, n] : tensor_views(p)) Eigen::Map<Vec<S>>(ptr, n) *= factor;
}

}  // namespace detail

// Shuffled mini-batch training: per-batch mean MSE, one Adam step per batch,
// last partial batch kept. Per-segment passes inside a batch may run on
// `threads` workers; gradients are reduced in segment order either way, so
// the result does not depend on the thread count.
template <typename S>
TrainResult<S> train(const std::vector<SegmentPair>& dataset, const ModelConfig& model_cfg,
                     const TrainConfig& train_cfg) {
    model_cfg.validate();
    train_cfg.validate();
    if (dataset.empty()) throw TrainError("train: empty dataset");
    for (const auto& s : dataset)
        if (s.degenerate)
            throw TrainError("train: degenerate segment present (subject " + s.subject_id +
                             ", index " + std::to_string(s.segment_index) + ")");

    const std::size_t n = dataset.size();
    std::vector<Vec<S>> inputs(n), targets(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (dataset[i].bcg.size() != static_cast<std::size_t>(model_cfg.seq_len))
            throw TrainError("train: segment length != model seq_len");
        inputs[i] = Eigen::Map<const Eigen::VectorXf>(dataset[i].bcg.data(),
                                                      model_cfg.seq_len)
                        .cast<S>();
        targets[i] = Eigen::Map<const Eigen::VectorXf>(dataset[i].ecg.data(),
                                                       model_cfg.seq_len)
                         .cast<S>();
    }

    const Mat<S> pe = positional_encoding<S>(model_cfg.seq_len, model_cfg.d_model);
    ModelParams<S> params = init_params<S>(model_cfg, derive_seed(train_cfg.seed, "init"));
    auto opt = OptimizerState<S>::zero(model_cfg);
    Rng shuffle_rng(derive_seed(train_cfg.seed, "shuffle"));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    const int threads = std::min<int>(train_cfg.threads, static_cast<int>(n));
    ModelParams<S> batch_grads = zero_params<S>(model_cfg);
    std::vector<ModelParams<S>> slots;
    std::vector<S> slot_loss;

    std::vector<double> history;
    history.reserve(train_cfg.epochs);

    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;

        for (std::size_t batch_start = 0; batch_start < n;
             batch_start += train_cfg.batch_size) {
            const std::size_t b =
                std::min<std::size_t>(train_cfg.batch_size, n - batch_start);
            detail::scale_params(batch_grads, S(0));
            double batch_loss_sum = 0.0;

            auto run_one = [&](std::size_t slot, std::size_t idx, ModelParams<S>& out,
                               S& loss_out) {
                (void)slot;
                auto fwd = forward<S>(inputs[idx], params, model_cfg, &pe);
                auto lg = mse_loss<S>(fwd.pred, targets[idx]);
                loss_out = lg.loss;
                backward<S>(fwd.acts, lg.grad_pred, params, model_cfg, out);
            };

            if (threads <= 1) {
                ModelParams<S> g = zero_params<S>(model_cfg);
                for (std::size_t i = 0; i < b; ++i) {
                    S loss;
                    run_one(i, order[batch_start + i], g, loss);
                    batch_loss_sum += static_cast<double>(loss);
                    detail::accumulate(batch_grads, g);
                }
            } else {
                if (slots.size() < b) {
                    slots.resize(b, zero_params<S>(model_cfg));
                    slot_loss.resize(b);
                }
                std::vector<std::thread> pool;
                for (int w = 0; w < threads; ++w) {
                    pool.emplace_back([&, w] {
                        for (std::size_t i = w; i < b; i += threads) {
                            run_one(i, order[batch_start + i], slots[i], slot_loss[i]);
                        }
                    });
                }
                for (auto& th : pool) th.join();
                for (std::size_t i = 0; i < b; ++i) {
                    batch_loss_sum += static_cast<double>(slot_loss[i]);
                    detail::accumulate(batch_grads, slots[i]);
                }
            }

            if (!std::isfinite(batch_loss_sum))
                throw TrainError("train: loss diverged at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_start / train_cfg.batch_size));
            detail::scale_params(batch_grads, S(1) / static_cast<S>(b));
            adam_step(params, batch_grads, opt, train_cfg);
            epoch_loss += batch_loss_sum;
        }
        history.push_back(epoch_loss / static_cast<double>(n));
    }
    return {std::move(params), std::move(history)};
}

}  // namespace bcg2ecg
