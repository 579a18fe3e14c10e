// Loss functions and the two-stage training pipeline: greedy layer-wise
// RBM pre-training followed by supervised fine-tuning, all mask-respecting.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kdlw/common.hpp"
#include "kdlw/model.hpp"

namespace kdlw {

constexpr double kNllProbFloor = 1e-12;

struct LossConfig {
    double lambda1 = 0.0;  // Lasso weight
    double lambda2 = 0.0;  // Ridge weight
    bool include_reconstruction = false;
};

struct TrainConfig {
    int cd_steps = 1;
    double learning_rate = 0.1;
    int epochs_pretrain = 1;
    int epochs_finetune = 1;
    int batch_size = 10;
    uint64_t seed = 0;
};

struct LabeledBatch {
    Matrix inputs;            // samples x input width
    std::vector<int> labels;  // class indices

    int size() const { return inputs.rows; }
};

inline void validate(const LabeledBatch& batch, int input_width, int classes) {
    if (batch.inputs.cols != input_width)
        throw ConfigError("batch input width does not match the model");
    if (static_cast<int>(batch.labels.size()) != batch.inputs.rows)
        throw ConfigError("batch label count does not match sample count");
    for (int l : batch.labels)
        if (l < 0 || l >= classes) throw ConfigError("label out of range");
}

inline double training_error(const std::vector<double>& y, const std::vector<double>& target) {
    if (y.size() != target.size()) throw ConfigError("training_error length mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - target[i];
        acc += d * d;
    }
    return 0.5 * acc;
}

inline double reconstruction_error(const std::vector<double>& xhat, const std::vector<double>& x) {
    return training_error(xhat, x);
}

// -log P(label); probabilities below the floor are clamped and the
// event counted through `clamps` when provided.
inline double nll(const std::vector<double>& probs, int label, long long* clamps = nullptr) {
    if (label < 0 || label >= static_cast<int>(probs.size()))
        throw ConfigError("nll label out of range");
    double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("nll input is not a probability vector");
    double p = probs[label];
    if (p < kNllProbFloor) {
        p = kNllProbFloor;
        if (clamps) ++*clamps;
    }
    return -std::log(p);
}

struct LossStats {
    double value = 0.0;
    long long nll_clamps = 0;
};

struct Gradient {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> hidden_bias;
    std::vector<std::vector<double>> visible_bias;
};

inline Gradient zero_gradient(const Model& model) {
    Gradient g;
    for (int p = 0; p < model.pair_count(); ++p) {
        g.weights.emplace_back(model.spec.layer_widths[p], model.spec.layer_widths[p + 1]);
        g.hidden_bias.emplace_back(static_cast<size_t>(model.spec.layer_widths[p + 1]), 0.0);
        g.visible_bias.emplace_back(static_cast<size_t>(model.spec.layer_widths[p]), 0.0);
    }
    return g;
}

inline void mask_gradient(Gradient& g, const EdgeMask& mask) {
    for (size_t p = 0; p < g.weights.size(); ++p)
        for (size_t e = 0; e < g.weights[p].data.size(); ++e)
            if (!mask.pairs[p][e]) g.weights[p].data[e] = 0.0;
}

namespace detail {

inline double regularization_value(const Model& model, const LossConfig& cfg) {
    if (cfg.lambda1 == 0.0 && cfg.lambda2 == 0.0) return 0.0;
    double l1 = 0.0, l2 = 0.0;
    for (int p = 0; p < model.pair_count(); ++p) {
        const auto& w = model.weights[p];
        const auto& m = model.mask.pairs[p];
        for (size_t e = 0; e < w.data.size(); ++e) {
            if (!m[e]) continue;
            l1 += std::abs(w.data[e]);
            l2 += w.data[e] * w.data[e];
        }
    }
    return cfg.lambda1 * l1 + cfg.lambda2 * l2;
}

inline void add_regularization_gradient(const Model& model, const LossConfig& cfg, Gradient& g) {
    if (cfg.lambda1 == 0.0 && cfg.lambda2 == 0.0) return;
    for (int p = 0; p < model.pair_count(); ++p) {
        const auto& w = model.weights[p];
        const auto& m = model.mask.pairs[p];
        for (size_t e = 0; e < w.data.size(); ++e) {
            if (!m[e]) continue;
            const double v = w.data[e];
            const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
            g.weights[p].data[e] += cfg.lambda1 * sign + 2.0 * cfg.lambda2 * v;
        }
    }
}

// First-layer reconstruction term and (optionally) its gradient.
inline double reconstruction_term(const Model& model, const std::vector<double>& x,
                                  const std::vector<double>& h1, Gradient* g) {
    const int n_vis = model.spec.layer_widths[0];
    const int n_hid = model.spec.layer_widths[1];
    const Matrix& w = model.weights[0];
    std::vector<double> xhat(model.visible_bias[0]);
    for (int i = 0; i < n_vis; ++i) {
        const double* wrow = w.row(i);
        double acc = 0.0;
        for (int j = 0; j < n_hid; ++j) acc += wrow[j] * h1[j];
        xhat[i] = sigmoid(xhat[i] + acc);
    }
    double er = 0.0;
    for (int i = 0; i < n_vis; ++i) {
        const double d = xhat[i] - x[i];
        er += d * d;
    }
    er *= 0.5;
    if (!g) return er;
    std::vector<double> dh(static_cast<size_t>(n_hid), 0.0);
    for (int i = 0; i < n_vis; ++i) {
        const double dvis = (xhat[i] - x[i]) * xhat[i] * (1.0 - xhat[i]);
        g->visible_bias[0][i] += dvis;
        const double* wrow = w.row(i);
        double* grow = g->weights[0].row(i);
        for (int j = 0; j < n_hid; ++j) {
            grow[j] += dvis * h1[j];     // decoder use of the tied weight
            dh[j] += dvis * wrow[j];
        }
    }
    for (int j = 0; j < n_hid; ++j) {
        const double dz = dh[j] * h1[j] * (1.0 - h1[j]);
        g->hidden_bias[0][j] += dz;
        for (int i = 0; i < n_vis; ++i) g->weights[0].at(i, j) += x[i] * dz;  // encoder use
    }
    return er;
}

}  // namespace detail

// E(theta, D) over a batch: summed NLL, optional first-layer
// reconstruction term, and L1/L2 penalties over mask-true weights.
// When `grad` is non-null the exact gradient is accumulated into it.
inline LossStats total_loss(const Model& model, const LabeledBatch& batch,
                            const LossConfig& cfg, Gradient* grad = nullptr) {
    if (model.activation != Activation::sigmoid_softmax)
        throw ConfigError("total_loss requires the sigmoid/softmax activation mode");
    const int classes = model.spec.layer_widths.back();
    validate(batch, model.spec.layer_widths[0], classes);
    const int pairs = model.pair_count();
    LossStats stats;
    std::vector<double> x(static_cast<size_t>(batch.inputs.cols));
    for (int s = 0; s < batch.size(); ++s) {
        std::copy(batch.inputs.row(s), batch.inputs.row(s) + batch.inputs.cols, x.begin());
        const auto acts = forward(model, x);
        const auto& probs = acts.back();
        stats.value += nll(probs, batch.labels[s], &stats.nll_clamps);
        if (cfg.include_reconstruction)
            stats.value += detail::reconstruction_term(model, x, acts[1], grad);
        if (grad) {
            std::vector<double> delta(probs);
            delta[batch.labels[s]] -= 1.0;
            for (int p = pairs - 1; p >= 0; --p) {
                const int n_in = model.spec.layer_widths[p];
                const int n_out = model.spec.layer_widths[p + 1];
                for (int j = 0; j < n_out; ++j) grad->hidden_bias[p][j] += delta[j];
                const auto& below = acts[p];
                for (int i = 0; i < n_in; ++i) {
                    const double ai = below[i];
                    if (ai != 0.0) {
                        double* grow = grad->weights[p].row(i);
                        for (int j = 0; j < n_out; ++j) grow[j] += ai * delta[j];
                    }
                }
                if (p > 0) {
                    std::vector<double> next(static_cast<size_t>(n_in), 0.0);
                    const Matrix& w = model.weights[p];
                    for (int i = 0; i < n_in; ++i) {
                        const double* wrow = w.row(i);
                        double acc = 0.0;
                        for (int j = 0; j < n_out; ++j) acc += wrow[j] * delta[j];
                        next[i] = acc * below[i] * (1.0 - below[i]);
                    }
                    delta = std::move(next);
                }
            }
        }
    }
    stats.value += detail::regularization_value(model, cfg);
    if (grad) {
        detail::add_regularization_gradient(model, cfg, *grad);
        mask_gradient(*grad, model.mask);
    }
    return stats;
}

// ---- RBM contrastive divergence ---------------------------------------

struct RbmDelta {
    Matrix weights;                   // gradient estimate, mask-true entries only
    std::vector<double> hidden_bias;
    std::vector<double> visible_bias;
};

// CD-k on pair (layer-1, layer): sampled hidden states, mean-field
// visible reconstruction. Returns the averaged update direction; the
// caller scales by a learning rate.
inline RbmDelta rbm_cd_update(const Model& model, int layer, const Matrix& visible_batch,
                              const TrainConfig& cfg, Rng& rng) {
    if (layer < 1 || layer > model.pair_count()) throw ConfigError("rbm layer out of range");
    const int p = layer - 1;
    const int n_vis = model.spec.layer_widths[p];
    const int n_hid = model.spec.layer_widths[layer];
    if (visible_batch.cols != n_vis) throw ConfigError("visible batch width mismatch");
    const Matrix& w = model.weights[p];
    RbmDelta d;
    d.weights = Matrix(n_vis, n_hid);
    d.hidden_bias.assign(static_cast<size_t>(n_hid), 0.0);
    d.visible_bias.assign(static_cast<size_t>(n_vis), 0.0);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> hp(static_cast<size_t>(n_hid)), hs(static_cast<size_t>(n_hid));
    std::vector<double> vneg(static_cast<size_t>(n_vis)), hneg(static_cast<size_t>(n_hid));
    auto hidden_probs = [&](const double* v, std::vector<double>& out) {
        for (int j = 0; j < n_hid; ++j) out[j] = model.hidden_bias[p][j];
        for (int i = 0; i < n_vis; ++i) {
            const double vi = v[i];
            if (vi == 0.0) continue;
            const double* wrow = w.row(i);
            for (int j = 0; j < n_hid; ++j) out[j] += wrow[j] * vi;
        }
        for (double& z : out) z = sigmoid(z);
    };
    auto visible_means = [&](const std::vector<double>& h, std::vector<double>& out) {
        for (int i = 0; i < n_vis; ++i) {
            const double* wrow = w.row(i);
            double acc = model.visible_bias[p][i];
            for (int j = 0; j < n_hid; ++j) acc += wrow[j] * h[j];
            out[i] = sigmoid(acc);
        }
    };

    for (int s = 0; s < visible_batch.rows; ++s) {
        const double* v0 = visible_batch.row(s);
        hidden_probs(v0, hp);
        for (int j = 0; j < n_hid; ++j) hs[j] = unit(rng) < hp[j] ? 1.0 : 0.0;
        for (int step = 0; step < cfg.cd_steps; ++step) {
            visible_means(hs, vneg);
            hidden_probs(vneg.data(), hneg);
            if (step + 1 < cfg.cd_steps)
                for (int j = 0; j < n_hid; ++j) hs[j] = unit(rng) < hneg[j] ? 1.0 : 0.0;
        }
        for (int i = 0; i < n_vis; ++i) {
            double* drow = d.weights.row(i);
            const double pos = v0[i];
            const double neg = vneg[i];
            for (int j = 0; j < n_hid; ++j) drow[j] += pos * hp[j] - neg * hneg[j];
        }
        for (int j = 0; j < n_hid; ++j) d.hidden_bias[j] += hp[j] - hneg[j];
        for (int i = 0; i < n_vis; ++i) d.visible_bias[i] += v0[i] - vneg[i];
    }
    const double inv = 1.0 / std::max(1, visible_batch.rows);
    for (double& v : d.weights.data) v *= inv;
    for (double& v : d.hidden_bias) v *= inv;
    for (double& v : d.visible_bias) v *= inv;
    for (size_t e = 0; e < d.weights.data.size(); ++e)
        if (!model.mask.pairs[p][e]) d.weights.data[e] = 0.0;
    return d;
}

inline void apply_rbm_delta(Model& model, int layer, const RbmDelta& d, double lr) {
    const int p = layer - 1;
    auto& w = model.weights[p];
    for (size_t e = 0; e < w.data.size(); ++e) w.data[e] += lr * d.weights.data[e];
    for (size_t j = 0; j < model.hidden_bias[p].size(); ++j)
        model.hidden_bias[p][j] += lr * d.hidden_bias[j];
    for (size_t i = 0; i < model.visible_bias[p].size(); ++i)
        model.visible_bias[p][i] += lr * d.visible_bias[i];
    model.clamp_to_mask();
}

// Mean activations of layer `layer` for every row of `data` at layer-1.
inline Matrix propagate_mean(const Model& model, int layer, const Matrix& data) {
    const int p = layer - 1;
    const int n_vis = model.spec.layer_widths[p];
    const int n_hid = model.spec.layer_widths[layer];
    if (data.cols != n_vis) throw ConfigError("propagate width mismatch");
    Matrix out(data.rows, n_hid);
    const Matrix& w = model.weights[p];
    for (int s = 0; s < data.rows; ++s) {
        const double* v = data.row(s);
        double* o = out.row(s);
        for (int j = 0; j < n_hid; ++j) o[j] = model.hidden_bias[p][j];
        for (int i = 0; i < n_vis; ++i) {
            const double vi = v[i];
            if (vi == 0.0) continue;
            const double* wrow = w.row(i);
            for (int j = 0; j < n_hid; ++j) o[j] += wrow[j] * vi;
        }
        for (int j = 0; j < n_hid; ++j) o[j] = sigmoid(o[j]);
    }
    return out;
}

// One CD epoch over seeded mini-batches of `data` on pair (layer-1, layer).
inline void rbm_train_epoch(Model& model, int layer, const Matrix& data,
                            const TrainConfig& cfg, Rng& rng) {
    std::vector<int> order(static_cast<size_t>(data.rows));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < data.rows; start += cfg.batch_size) {
        const int stop = std::min(data.rows, start + cfg.batch_size);
        Matrix batch(stop - start, data.cols);
        for (int s = start; s < stop; ++s)
            std::copy(data.row(order[s]), data.row(order[s]) + data.cols, batch.row(s - start));
        const RbmDelta d = rbm_cd_update(model, layer, batch, cfg, rng);
        apply_rbm_delta(model, layer, d, cfg.learning_rate);
    }
}

// Greedy layer-wise pre-training of pairs 1..H, propagating mean
// activations upward as the next pair's training data. The output pair
// is left to fine-tuning.
inline Model pretrain(Model model, const Matrix& data, const TrainConfig& cfg) {
    if (data.cols != model.spec.layer_widths[0]) throw ConfigError("pretrain data width mismatch");
    Rng rng(cfg.seed);
    Matrix current = data;
    const int rbm_pairs = model.pair_count() - 1;
    for (int layer = 1; layer <= rbm_pairs; ++layer) {
        for (int epoch = 0; epoch < cfg.epochs_pretrain; ++epoch)
            rbm_train_epoch(model, layer, current, cfg, rng);
        if (layer < rbm_pairs) current = propagate_mean(model, layer, current);
    }
    return model;
}

// ---- supervised fine-tuning -------------------------------------------

struct TraceRow {
    int epoch = 0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double valid_error_rate = 0.0;  // fraction in [0,1]
};

struct FinetuneResult {
    Model model;  // best-validation snapshot
    std::vector<TraceRow> trace;
    double best_valid_loss = 0.0;
    long long nll_clamps = 0;
};

inline double error_rate(const Model& model, const LabeledBatch& batch) {
    int wrong = 0;
    std::vector<double> x(static_cast<size_t>(batch.inputs.cols));
    for (int s = 0; s < batch.size(); ++s) {
        std::copy(batch.inputs.row(s), batch.inputs.row(s) + batch.inputs.cols, x.begin());
        const auto acts = forward(model, x);
        const auto& probs = acts.back();
        const int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        if (pred != batch.labels[s]) ++wrong;
    }
    return batch.size() ? static_cast<double>(wrong) / batch.size() : 0.0;
}

inline LabeledBatch slice(const LabeledBatch& batch, const std::vector<int>& order,
                          int start, int stop) {
    LabeledBatch out;
    out.inputs = Matrix(stop - start, batch.inputs.cols);
    for (int s = start; s < stop; ++s) {
        std::copy(batch.inputs.row(order[s]), batch.inputs.row(order[s]) + batch.inputs.cols,
                  out.inputs.row(s - start));
        out.labels.push_back(batch.labels[order[s]]);
    }
    return out;
}

// Mini-batch gradient descent on total_loss with masked gradients and a
// best-validation snapshot as the returned model.
inline FinetuneResult finetune(Model model, const LabeledBatch& train, const LabeledBatch& valid,
                               const TrainConfig& cfg, const LossConfig& loss) {
    Rng rng(cfg.seed + 0x9e3779b97f4a7c15ULL);
    FinetuneResult result;
    result.model = model;
    LossConfig valid_loss_cfg = loss;  // same objective on the validation split
    {
        const LossStats v = total_loss(model, valid, valid_loss_cfg);
        result.best_valid_loss = v.value;
    }
    std::vector<int> order(static_cast<size_t>(train.size()));
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 1; epoch <= cfg.epochs_finetune; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (int start = 0; start < train.size(); start += cfg.batch_size) {
            const int stop = std::min(train.size(), start + cfg.batch_size);
            const LabeledBatch batch = slice(train, order, start, stop);
            Gradient grad = zero_gradient(model);
            const LossStats stats = total_loss(model, batch, loss, &grad);
            result.nll_clamps += stats.nll_clamps;
            if (!std::isfinite(stats.value))
                throw ConstraintError("non-finite loss at epoch " + std::to_string(epoch));
            epoch_loss += stats.value;
            const double step = cfg.learning_rate / batch.size();
            for (int p = 0; p < model.pair_count(); ++p) {
                auto& w = model.weights[p];
                for (size_t e = 0; e < w.data.size(); ++e)
                    w.data[e] -= step * grad.weights[p].data[e];
                for (size_t j = 0; j < model.hidden_bias[p].size(); ++j)
                    model.hidden_bias[p][j] -= step * grad.hidden_bias[p][j];
                for (size_t i = 0; i < model.visible_bias[p].size(); ++i)
                    model.visible_bias[p][i] -= step * grad.visible_bias[p][i];
            }
            model.clamp_to_mask();
        }
        const LossStats v = total_loss(model, valid, valid_loss_cfg);
        TraceRow row;
        row.epoch = epoch;
        row.train_loss = epoch_loss;
        row.valid_loss = v.value;
        row.valid_error_rate = error_rate(model, valid);
        result.trace.push_back(row);
        if (v.value <= result.best_valid_loss) {
            result.best_valid_loss = v.value;
            result.model = model;
        }
    }
    return result;
}

inline void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& out) {
    out << "epoch,train_loss,valid_loss,valid_error_rate\n";
    char buf[160];
    for (const auto& row : trace) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", row.epoch, row.train_loss,
                      row.valid_loss, row.valid_error_rate);
        out << buf;
    }
}

}  // namespace kdlw
