#ifndef SHRED_NET_HPP
#define SHRED_NET_HPP

#include "shred/compression.hpp"
#include "shred/sensing.hpp"
#include "shred/types.hpp"

#include <filesystem>
#include <fstream>
#include <random>

namespace shred {

// Gate row layout inside the stacked 4H blocks: input, forget, cell, output.
struct LstmLayer {
    Matrix wx;  // 4H x input_dim
    Matrix wh;  // 4H x H
    Vector b;   // 4H
};

// Two stacked gated recurrent layers (64 units each) followed by a shallow
// dense decoder 64 -> 350 -> 400 -> r_total with ReLU hiddens.
struct ShredModel {
    int s = 3;
    int lag = 50;
    int r_total = 1;
    int hidden = 64;
    int dec1 = 350;
    int dec2 = 400;
    double dropout = 0.1;

    std::vector<LstmLayer> lstm;  // 2 layers
    Matrix w1;  // dec1 x hidden
    Vector b1;
    Matrix w2;  // dec2 x dec1
    Vector b2;
    Matrix w3;  // r_total x dec2
    Vector b3;

    // Per-coefficient standardization of training targets.
    Vector target_mean, target_std;
    // Per-channel standardization of sensor inputs (fit on the training
    // windows).  Sensor channels can differ in scale by orders of magnitude,
    // so whitening is needed before the recurrent layer can use them equally.
    Vector input_mean, input_std;

    template <typename Fn>
    void for_each_param(Fn&& fn) {
        for (std::size_t l = 0; l < lstm.size(); ++l) {
            fn("lstm" + std::to_string(l) + ".wx", lstm[l].wx.data(), lstm[l].wx.size());
            fn("lstm" + std::to_string(l) + ".wh", lstm[l].wh.data(), lstm[l].wh.size());
            fn("lstm" + std::to_string(l) + ".b", lstm[l].b.data(), lstm[l].b.size());
        }
        fn("dec.w1", w1.data(), w1.size());
        fn("dec.b1", b1.data(), b1.size());
        fn("dec.w2", w2.data(), w2.size());
        fn("dec.b2", b2.data(), b2.size());
        fn("dec.w3", w3.data(), w3.size());
        fn("dec.b3", b3.data(), b3.size());
    }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& l : lstm) n += l.wx.size() + l.wh.size() + l.b.size();
        return n + w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
    }
};

inline ShredModel init_model(int s, int lag, int r_total, std::uint64_t seed, int hidden = 64,
                             int dec1 = 350, int dec2 = 400, double dropout = 0.1) {
    if (s < 1 || lag < 1 || r_total < 1) throw DomainError("invalid model dimensions");
    ShredModel m;
    m.s = s;
    m.lag = lag;
    m.r_total = r_total;
    m.hidden = hidden;
    m.dec1 = dec1;
    m.dec2 = dec2;
    m.dropout = dropout;
    std::mt19937_64 rng(seed);
    auto uniform_init = [&](Matrix& w, int rows, int cols) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        std::uniform_real_distribution<double> dist(-bound, bound);
        w.resize(rows, cols);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    };
    for (int l = 0; l < 2; ++l) {
        LstmLayer layer;
        const int in = l == 0 ? s : hidden;
        uniform_init(layer.wx, 4 * hidden, in);
        uniform_init(layer.wh, 4 * hidden, hidden);
        layer.b = Vector::Zero(4 * hidden);
        layer.b.segment(hidden, hidden).setConstant(1.0);  // forget-gate bias
        m.lstm.push_back(std::move(layer));
    }
    uniform_init(m.w1, dec1, hidden);
    m.b1 = Vector::Zero(dec1);
    uniform_init(m.w2, dec2, dec1);
    m.b2 = Vector::Zero(dec2);
    uniform_init(m.w3, r_total, dec2);
    m.b3 = Vector::Zero(r_total);
    m.target_mean = Vector::Zero(r_total);
    m.target_std = Vector::Ones(r_total);
    m.input_mean = Vector::Zero(s);
    m.input_std = Vector::Ones(s);
    return m;
}

inline ShredModel zeros_like(const ShredModel& m) {
    ShredModel z = m;
    for (auto& l : z.lstm) {
        l.wx.setZero();
        l.wh.setZero();
        l.b.setZero();
    }
    z.w1.setZero();
    z.b1.setZero();
    z.w2.setZero();
    z.b2.setZero();
    z.w3.setZero();
    z.b3.setZero();
    return z;
}

namespace detail {

inline Matrix sigmoid(const Matrix& x) {
    return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

// Everything the backward pass needs, one batch's worth of activations.
struct ForwardCache {
    // [layer][step]
    std::vector<std::vector<Matrix>> gates;   // 4H x B, post-activation
    std::vector<std::vector<Matrix>> cell;    // H x B
    std::vector<std::vector<Matrix>> hidden;  // H x B
    std::vector<std::vector<Matrix>> tanh_c;  // H x B
    std::vector<Matrix> inputs;               // s x B per step (layer-0 input)
    Matrix a1, a2;                            // decoder ReLU activations
    Matrix mask1, mask2;                      // inverted-dropout masks (or empty)
    Matrix h_final;                           // top-layer final hidden state
    Matrix output;                            // r_total x B
};

// Batched forward over B windows of shape (K+1) x s; columns are examples.
inline Matrix forward_batch(const ShredModel& m, const std::vector<const Matrix*>& windows,
                            bool training, std::mt19937_64* dropout_rng, ForwardCache* cache) {
    const int steps = m.lag + 1;
    const Eigen::Index batch = static_cast<Eigen::Index>(windows.size());
    const int h = m.hidden;
    for (const Matrix* w : windows)
        if (w->rows() != steps || w->cols() != m.s)
            throw DimensionError("window shape mismatch: expected (K+1) x s");

    if (cache) {
        cache->gates.assign(2, std::vector<Matrix>(steps));
        cache->cell.assign(2, std::vector<Matrix>(steps));
        cache->hidden.assign(2, std::vector<Matrix>(steps));
        cache->tanh_c.assign(2, std::vector<Matrix>(steps));
        cache->inputs.assign(steps, Matrix());
    }

    std::vector<Matrix> h_state(2, Matrix::Zero(h, batch));
    std::vector<Matrix> c_state(2, Matrix::Zero(h, batch));
    Matrix x_t(m.s, batch);
    for (int t = 0; t < steps; ++t) {
        for (Eigen::Index bcol = 0; bcol < batch; ++bcol)
            x_t.col(bcol) = windows[static_cast<std::size_t>(bcol)]->row(t).transpose();
        x_t = ((x_t.colwise() - m.input_mean).array().colwise() / m.input_std.array()).matrix();
        if (cache) cache->inputs[t] = x_t;
        const Matrix* layer_in = &x_t;
        for (int l = 0; l < 2; ++l) {
            const auto& lay = m.lstm[l];
            Matrix z = lay.wx * (*layer_in) + lay.wh * h_state[l];
            z.colwise() += lay.b;
            Matrix g(4 * h, batch);
            g.topRows(h) = sigmoid(z.topRows(h));                       // input gate
            g.middleRows(h, h) = sigmoid(z.middleRows(h, h));           // forget gate
            g.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh();  // candidate
            g.bottomRows(h) = sigmoid(z.bottomRows(h));                 // output gate
            c_state[l] = g.middleRows(h, h).cwiseProduct(c_state[l]) +
                         g.topRows(h).cwiseProduct(g.middleRows(2 * h, h));
            const Matrix tc = c_state[l].array().tanh().matrix();
            h_state[l] = g.bottomRows(h).cwiseProduct(tc);
            if (cache) {
                cache->gates[l][t] = std::move(g);
                cache->cell[l][t] = c_state[l];
                cache->hidden[l][t] = h_state[l];
                cache->tanh_c[l][t] = tc;
            }
            layer_in = &h_state[l];
        }
    }

    Matrix a1 = (m.w1 * h_state[1]).colwise() + m.b1;
    a1 = a1.cwiseMax(0.0);
    Matrix mask1, mask2;
    const bool use_dropout = training && m.dropout > 0.0;
    if (use_dropout) {
        if (!dropout_rng) throw Error("dropout requested without an RNG");
        std::bernoulli_distribution keep(1.0 - m.dropout);
        const double scale = 1.0 / (1.0 - m.dropout);
        mask1.resize(m.dec1, batch);
        for (Eigen::Index j = 0; j < batch; ++j)
            for (Eigen::Index i = 0; i < m.dec1; ++i)
                mask1(i, j) = keep(*dropout_rng) ? scale : 0.0;
        a1 = a1.cwiseProduct(mask1);
    }
    Matrix a2 = (m.w2 * a1).colwise() + m.b2;
    a2 = a2.cwiseMax(0.0);
    if (use_dropout) {
        std::bernoulli_distribution keep(1.0 - m.dropout);
        const double scale = 1.0 / (1.0 - m.dropout);
        mask2.resize(m.dec2, batch);
        for (Eigen::Index j = 0; j < batch; ++j)
            for (Eigen::Index i = 0; i < m.dec2; ++i)
                mask2(i, j) = keep(*dropout_rng) ? scale : 0.0;
        a2 = a2.cwiseProduct(mask2);
    }
    Matrix out = (m.w3 * a2).colwise() + m.b3;
    if (cache) {
        cache->a1 = std::move(a1);
        cache->a2 = std::move(a2);
        cache->mask1 = std::move(mask1);
        cache->mask2 = std::move(mask2);
        cache->h_final = h_state[1];
        cache->output = out;
    }
    return out;
}

}  // namespace detail

// Inference: one lagged window to one latent prediction, dropout disabled.
inline Vector forward(const ShredModel& m, const Matrix& window) {
    std::vector<const Matrix*> batch = {&window};
    return detail::forward_batch(m, batch, false, nullptr, nullptr).col(0);
}

// Mean squared error over coefficients.
inline double loss(const Vector& pred, const Vector& target) {
    if (pred.size() != target.size()) throw DimensionError("loss: length mismatch");
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

// Reverse-mode gradients of the mean batch MSE with respect to every
// parameter, backpropagated through the decoder and the full recurrence.
// Returns the batch loss.  `cache` must come from the matching forward call.
inline double backward(const ShredModel& m, const detail::ForwardCache& cache,
                       const Matrix& targets, ShredModel& grads) {
    const Eigen::Index batch = targets.cols();
    if (batch == 0) throw DomainError("backward: empty batch");
    const int h = m.hidden;
    const int steps = m.lag + 1;
    const double denom = static_cast<double>(batch) * m.r_total;
    const Matrix diff = cache.output - targets;
    const double batch_loss = diff.squaredNorm() / denom;
    if (!std::isfinite(batch_loss)) throw Error("non-finite loss in backward [loss]");

    Matrix dy = (2.0 / denom) * diff;

    // Decoder.
    grads.w3.noalias() += dy * cache.a2.transpose();
    grads.b3 += dy.rowwise().sum();
    Matrix da2 = m.w3.transpose() * dy;
    if (cache.mask2.size() > 0) da2 = da2.cwiseProduct(cache.mask2);
    Matrix dz2 = (cache.a2.array() > 0.0).select(da2, 0.0);
    if (cache.mask2.size() > 0) {
        // a2 was stored post-dropout; the pre-dropout ReLU output is positive
        // exactly where the mask kept a positive value, so gate on a2 != 0
        // combined with the mask above.  For masked-off units a2 is 0 and the
        // mask multiplication already zeroed them.
        dz2 = (cache.a2.array() != 0.0).select(da2, 0.0);
    }
    grads.w2.noalias() += dz2 * cache.a1.transpose();
    grads.b2 += dz2.rowwise().sum();
    Matrix da1 = m.w2.transpose() * dz2;
    if (cache.mask1.size() > 0) da1 = da1.cwiseProduct(cache.mask1);
    Matrix dz1 = cache.mask1.size() > 0 ? (cache.a1.array() != 0.0).select(da1, 0.0).eval()
                                        : (cache.a1.array() > 0.0).select(da1, 0.0).eval();
    grads.w1.noalias() += dz1 * cache.h_final.transpose();
    grads.b1 += dz1.rowwise().sum();

    // BPTT.  Only the final top-layer hidden state feeds the decoder; lower
    // layers receive gradient from the layer above at every step.
    std::vector<Matrix> dh(2, Matrix::Zero(h, batch));
    std::vector<Matrix> dc(2, Matrix::Zero(h, batch));
    std::vector<std::vector<Matrix>> dx_from_above(
        2, std::vector<Matrix>());  // [layer 0 gets gradients of layer-1 inputs]
    dx_from_above[0].assign(steps, Matrix());
    dh[1] = m.w1.transpose() * dz1;

    for (int l = 1; l >= 0; --l) {
        const auto& lay = m.lstm[l];
        Matrix dh_l = std::move(dh[l]);
        Matrix dc_l = std::move(dc[l]);
        for (int t = steps - 1; t >= 0; --t) {
            if (l == 0) dh_l += dx_from_above[0][t];
            const Matrix& g = cache.gates[l][t];
            const auto gi = g.topRows(h);
            const auto gf = g.middleRows(h, h);
            const auto gg = g.middleRows(2 * h, h);
            const auto go = g.bottomRows(h);
            const Matrix& tc = cache.tanh_c[l][t];
            const Matrix c_prev =
                t > 0 ? cache.cell[l][t - 1] : Matrix::Zero(h, batch).eval();
            const Matrix h_prev =
                t > 0 ? cache.hidden[l][t - 1] : Matrix::Zero(h, batch).eval();

            Matrix dct = dc_l + dh_l.cwiseProduct(go).cwiseProduct(
                                    (1.0 - tc.array().square()).matrix());
            Matrix dz(4 * h, batch);
            dz.topRows(h) = dct.cwiseProduct(gg).cwiseProduct(gi).cwiseProduct(
                (1.0 - gi.array()).matrix());
            dz.middleRows(h, h) = dct.cwiseProduct(c_prev).cwiseProduct(gf).cwiseProduct(
                (1.0 - gf.array()).matrix());
            dz.middleRows(2 * h, h) = dct.cwiseProduct(gi).cwiseProduct(
                (1.0 - gg.array().square()).matrix());
            dz.bottomRows(h) = dh_l.cwiseProduct(tc).cwiseProduct(go).cwiseProduct(
                (1.0 - go.array()).matrix());
            if (!dz.allFinite()) throw Error("non-finite gradient [lstm" + std::to_string(l) + "]");

            const Matrix& x_in = l == 0 ? cache.inputs[t] : cache.hidden[0][t];
            grads.lstm[l].wx.noalias() += dz * x_in.transpose();
            grads.lstm[l].wh.noalias() += dz * h_prev.transpose();
            grads.lstm[l].b += dz.rowwise().sum();
            if (l == 1) dx_from_above[0][t] = lay.wx.transpose() * dz;
            dh_l = lay.wh.transpose() * dz;
            dc_l = dct.cwiseProduct(gf);
        }
    }
    return batch_loss;
}

// Convenience single-call gradient of the mean loss over a batch of
// (window, target) pairs, dropout controlled by `training`.
inline double compute_gradients(const ShredModel& m, const std::vector<const Matrix*>& windows,
                                const Matrix& targets, ShredModel& grads, bool training = false,
                                std::mt19937_64* dropout_rng = nullptr) {
    detail::ForwardCache cache;
    detail::forward_batch(m, windows, training, dropout_rng, &cache);
    return backward(m, cache, targets, grads);
}

struct AdamState {
    ShredModel m1, m2;  // first and second moments, parameter-shaped
    std::int64_t step = 0;

    explicit AdamState(const ShredModel& model) : m1(zeros_like(model)), m2(zeros_like(model)) {}
};

// Global gradient-norm clip followed by a bias-corrected Adam update.
inline void adam_step(ShredModel& model, ShredModel& grads, AdamState& state, double lr,
                      double clip_norm = 5.0, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
    double sq = 0.0;
    grads.for_each_param([&](const std::string&, double* p, std::int64_t n) {
        for (std::int64_t i = 0; i < n; ++i) sq += p[i] * p[i];
    });
    const double norm = std::sqrt(sq);
    const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;

    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

    // Walk the three parameter-shaped structs in lockstep.
    std::vector<std::pair<double*, std::int64_t>> pp, gg, mm1, mm2;
    model.for_each_param([&](const std::string&, double* p, std::int64_t n) { pp.push_back({p, n}); });
    grads.for_each_param([&](const std::string&, double* p, std::int64_t n) { gg.push_back({p, n}); });
    state.m1.for_each_param([&](const std::string&, double* p, std::int64_t n) { mm1.push_back({p, n}); });
    state.m2.for_each_param([&](const std::string&, double* p, std::int64_t n) { mm2.push_back({p, n}); });
    for (std::size_t k = 0; k < pp.size(); ++k) {
        double* p = pp[k].first;
        double* g = gg[k].first;
        double* m1 = mm1[k].first;
        double* m2 = mm2[k].first;
        for (std::int64_t i = 0; i < pp[k].second; ++i) {
            const double gi = g[i] * scale;
            m1[i] = beta1 * m1[i] + (1.0 - beta1) * gi;
            m2[i] = beta2 * m2[i] + (1.0 - beta2) * gi * gi;
            p[i] -= lr * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + eps);
        }
    }
}

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 64;
    int max_epochs = 1000;
    int patience = 50;
    double clip_norm = 5.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (learning_rate <= 0 || batch_size <= 0 || max_epochs <= 0 || patience < 0 ||
            clip_norm <= 0)
            throw DomainError("train config values must be positive");
    }
};

struct TrainSample {
    Matrix window;  // (K+1) x s
    Vector target;  // r_total, raw (un-standardized) latent coefficients
};

struct TrainHistory {
    std::vector<double> train_loss, val_loss;
    int best_epoch = -1;
};

// Mini-batch training with early stopping on validation loss; the best
// validation parameters are restored on exit.  Fully deterministic per seed.
inline TrainHistory train(ShredModel& model, const std::vector<TrainSample>& train_set,
                          const std::vector<TrainSample>& val_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty() || val_set.empty())
        throw DomainError("train and validation sets must be non-empty");

    // Standardize targets over the training split; stats live on the model.
    const int r = model.r_total;
    Vector mean = Vector::Zero(r), var = Vector::Zero(r);
    for (const auto& s : train_set) mean += s.target;
    mean /= static_cast<double>(train_set.size());
    for (const auto& s : train_set) var += (s.target - mean).cwiseAbs2();
    var /= static_cast<double>(train_set.size());
    Vector stddev = var.cwiseSqrt().cwiseMax(1e-12);
    model.target_mean = mean;
    model.target_std = stddev;

    // Standardize sensor channels over all training-window entries; these
    // stats live on the model too and are applied inside the forward pass.
    const int s_ch = model.s;
    Vector in_mean = Vector::Zero(s_ch), in_var = Vector::Zero(s_ch);
    std::size_t n_rows = 0;
    for (const auto& smp : train_set) {
        in_mean += smp.window.colwise().sum().transpose();
        n_rows += static_cast<std::size_t>(smp.window.rows());
    }
    in_mean /= static_cast<double>(n_rows);
    for (const auto& smp : train_set)
        in_var += (smp.window.rowwise() - in_mean.transpose()).cwiseAbs2()
                      .colwise().sum().transpose();
    in_var /= static_cast<double>(n_rows);
    model.input_mean = in_mean;
    model.input_std = in_var.cwiseSqrt().cwiseMax(1e-12);

    auto standardized = [&](const Vector& t) -> Vector {
        return (t - mean).cwiseQuotient(stddev);
    };

    std::mt19937_64 rng(cfg.seed);
    AdamState adam(model);
    TrainHistory hist;
    ShredModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;
    double lr = cfg.learning_rate;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    auto evaluate = [&](const std::vector<TrainSample>& set) {
        double total = 0.0;
        std::vector<const Matrix*> wins;
        const std::size_t chunk = 256;
        for (std::size_t ofs = 0; ofs < set.size(); ofs += chunk) {
            const std::size_t nb = std::min(chunk, set.size() - ofs);
            wins.clear();
            Matrix targets(r, static_cast<Eigen::Index>(nb));
            for (std::size_t i = 0; i < nb; ++i) {
                wins.push_back(&set[ofs + i].window);
                targets.col(static_cast<Eigen::Index>(i)) = standardized(set[ofs + i].target);
            }
            const Matrix pred = detail::forward_batch(model, wins, false, nullptr, nullptr);
            total += (pred - targets).squaredNorm() / r;
        }
        return total / static_cast<double>(set.size());
    };

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t ofs = 0; ofs < order.size(); ofs += cfg.batch_size) {
            const std::size_t nb = std::min<std::size_t>(cfg.batch_size, order.size() - ofs);
            std::vector<const Matrix*> wins(nb);
            Matrix targets(r, static_cast<Eigen::Index>(nb));
            for (std::size_t i = 0; i < nb; ++i) {
                wins[i] = &train_set[order[ofs + i]].window;
                targets.col(static_cast<Eigen::Index>(i)) =
                    standardized(train_set[order[ofs + i]].target);
            }
            ShredModel grads = zeros_like(model);
            const double batch_loss = compute_gradients(model, wins, targets, grads,
                                                        model.dropout > 0.0, &rng);
            if (!std::isfinite(batch_loss))
                throw Error("training diverged (loss NaN) at epoch " + std::to_string(epoch));
            adam_step(model, grads, adam, lr, cfg.clip_norm);
            epoch_loss += batch_loss;
            ++n_batches;
        }
        const double val = evaluate(val_set);
        hist.train_loss.push_back(epoch_loss / static_cast<double>(n_batches));
        hist.val_loss.push_back(val);
        if (!std::isfinite(val))
            throw Error("training diverged (validation loss NaN) at epoch " +
                        std::to_string(epoch));
        if (val < best_val) {
            best_val = val;
            best = model;
            hist.best_epoch = epoch;
            epochs_since_best = 0;
        } else if (++epochs_since_best > cfg.patience) {
            break;
        }
        // Halve the learning rate once per validation plateau; triggers again
        // only after a new best resets the counter.
        if (epochs_since_best == std::max(1, cfg.patience / 2)) lr *= 0.5;
    }
    model = std::move(best);
    return hist;
}

// Lag, forward per time index, de-standardize: r_total x N_t latent estimate.
inline Matrix predict_latent(const ShredModel& model, const MeasurementSeries& series) {
    if (series.values.rows() != model.s)
        throw DimensionError("measurement dimension does not match model input");
    const LaggedWindows lagged = lag_series(series, model.lag);
    Matrix out(model.r_total, static_cast<Eigen::Index>(lagged.windows.size()));
    std::vector<const Matrix*> wins;
    wins.reserve(lagged.windows.size());
    for (const auto& w : lagged.windows) wins.push_back(&w);
    const Matrix pred = detail::forward_batch(model, wins, false, nullptr, nullptr);
    for (Eigen::Index t = 0; t < pred.cols(); ++t)
        out.col(t) = pred.col(t).cwiseProduct(model.target_std) + model.target_mean;
    return out;
}

// SHRDMODL checkpoint: magic, version, dims, dropout, parameter blocks in
// declaration order, then standardization stats.  Little-endian f64.
namespace detail {
inline constexpr char kModelMagic[8] = {'S', 'H', 'R', 'D', 'M', 'O', 'D', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;
}  // namespace detail

inline void write_model_file(ShredModel& m, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os.write(detail::kModelMagic, 8);
    detail::write_le<std::uint32_t>(os, detail::kModelVersion);
    for (int v : {m.s, m.lag, m.r_total, m.hidden, m.dec1, m.dec2})
        detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(v));
    detail::write_le<double>(os, m.dropout);
    m.for_each_param([&](const std::string&, double* p, std::int64_t n) {
        os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
    });
    os.write(reinterpret_cast<const char*>(m.target_mean.data()),
             static_cast<std::streamsize>(m.target_mean.size() * 8));
    os.write(reinterpret_cast<const char*>(m.target_std.data()),
             static_cast<std::streamsize>(m.target_std.size() * 8));
    os.write(reinterpret_cast<const char*>(m.input_mean.data()),
             static_cast<std::streamsize>(m.input_mean.size() * 8));
    os.write(reinterpret_cast<const char*>(m.input_std.data()),
             static_cast<std::streamsize>(m.input_std.size() * 8));
    if (!os) throw IoError("write failed: " + path.string());
}

inline ShredModel read_model_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, detail::kModelMagic, 8) != 0)
        throw BadMagicError("bad magic in " + path.string());
    const auto version = detail::read_le<std::uint32_t>(is);
    if (version != detail::kModelVersion)
        throw UnsupportedVersionError("unsupported model version " + std::to_string(version));
    const int s = static_cast<int>(detail::read_le<std::uint32_t>(is));
    const int lag = static_cast<int>(detail::read_le<std::uint32_t>(is));
    const int r_total = static_cast<int>(detail::read_le<std::uint32_t>(is));
    const int hidden = static_cast<int>(detail::read_le<std::uint32_t>(is));
    const int dec1 = static_cast<int>(detail::read_le<std::uint32_t>(is));
    const int dec2 = static_cast<int>(detail::read_le<std::uint32_t>(is));
    const double dropout = detail::read_le<double>(is);
    ShredModel m = init_model(s, lag, r_total, 0, hidden, dec1, dec2, dropout);
    m.for_each_param([&](const std::string&, double* p, std::int64_t n) {
        is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 8));
    });
    is.read(reinterpret_cast<char*>(m.target_mean.data()),
            static_cast<std::streamsize>(m.target_mean.size() * 8));
    is.read(reinterpret_cast<char*>(m.target_std.data()),
            static_cast<std::streamsize>(m.target_std.size() * 8));
    is.read(reinterpret_cast<char*>(m.input_mean.data()),
            static_cast<std::streamsize>(m.input_mean.size() * 8));
    is.read(reinterpret_cast<char*>(m.input_std.data()),
            static_cast<std::streamsize>(m.input_std.size() * 8));
    if (!is) throw TruncatedFileError("truncated model file: " + path.string());
    return m;
}

}  // namespace shred

#endif
