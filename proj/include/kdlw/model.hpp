// Masked model parameters and the forward / reverse mappings.
#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "kdlw/common.hpp"
#include "kdlw/mask.hpp"
#include "kdlw/topology.hpp"

namespace kdlw {

enum class Activation : uint8_t {
    sigmoid_softmax = 0,  // logistic hidden units, softmax output
    identity = 1,         // analytic test mode, all layers linear
};

struct Model {
    TopologySpec spec;
    EdgeMask mask;
    std::vector<Matrix> weights;                   // per pair, n_h x n_{h+1}
    std::vector<std::vector<double>> hidden_bias;  // per pair, bias of layer p+1
    std::vector<std::vector<double>> visible_bias; // per pair, reverse bias of layer p
    Activation activation = Activation::sigmoid_softmax;

    int pair_count() const { return spec.pair_count(); }

    // Re-establish weight[i][j] == 0 wherever mask[i][j] is false.
    void clamp_to_mask() {
        for (int p = 0; p < pair_count(); ++p) {
            auto& w = weights[p];
            const auto& m = mask.pairs[p];
            for (size_t e = 0; e < m.size(); ++e)
                if (!m[e]) w.data[e] = 0.0;
        }
    }
};

inline Model make_model(const TopologySpec& spec, EdgeMask mask, uint64_t seed,
                        double init_scale = 0.1,
                        Activation act = Activation::sigmoid_softmax) {
    Model model;
    model.spec = spec;
    model.mask = std::move(mask);
    model.activation = act;
    Rng rng(seed);
    std::normal_distribution<double> dist(0.0, init_scale);
    for (int p = 0; p < spec.pair_count(); ++p) {
        Matrix w(spec.layer_widths[p], spec.layer_widths[p + 1]);
        for (double& v : w.data) v = dist(rng);
        model.weights.push_back(std::move(w));
        model.hidden_bias.emplace_back(static_cast<size_t>(spec.layer_widths[p + 1]), 0.0);
        model.visible_bias.emplace_back(static_cast<size_t>(spec.layer_widths[p]), 0.0);
    }
    model.clamp_to_mask();
    return model;
}

inline void softmax_inplace(std::vector<double>& z) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

// Activations for every layer, input included. Mask-false weights are
// zero by invariant, so a plain matvec is the masked product.
inline std::vector<std::vector<double>> forward(const Model& model,
                                                const std::vector<double>& input) {
    if (static_cast<int>(input.size()) != model.spec.layer_widths[0])
        throw ConfigError("input length does not match the input layer width");
    std::vector<std::vector<double>> acts;
    acts.push_back(input);
    for (int p = 0; p < model.pair_count(); ++p) {
        const int n_in = model.spec.layer_widths[p];
        const int n_out = model.spec.layer_widths[p + 1];
        std::vector<double> z(model.hidden_bias[p]);
        const auto& prev = acts.back();
        const Matrix& w = model.weights[p];
        for (int i = 0; i < n_in; ++i) {
            const double xi = prev[i];
            if (xi == 0.0) continue;
            const double* wrow = w.row(i);
            for (int j = 0; j < n_out; ++j) z[j] += wrow[j] * xi;
        }
        if (model.activation == Activation::sigmoid_softmax) {
            if (p + 1 == model.pair_count())
                softmax_inplace(z);
            else
                for (double& v : z) v = sigmoid(v);
        }
        acts.push_back(std::move(z));
    }
    return acts;
}

// Reverse mapping of layer `layer` back to layer-1 through the
// transposed masked weights of pair (layer-1, layer), with that pair's
// visible biases (tied-weight decoder).
inline std::vector<double> reconstruct(const Model& model, const std::vector<double>& hidden,
                                       int layer) {
    if (layer < 1 || layer > model.pair_count())
        throw ConfigError("reconstruct layer out of range");
    const int p = layer - 1;
    if (static_cast<int>(hidden.size()) != model.spec.layer_widths[layer])
        throw ConfigError("hidden length does not match layer width");
    const int n_vis = model.spec.layer_widths[p];
    const int n_hid = model.spec.layer_widths[layer];
    std::vector<double> z(model.visible_bias[p]);
    const Matrix& w = model.weights[p];
    for (int i = 0; i < n_vis; ++i) {
        const double* wrow = w.row(i);
        double acc = 0.0;
        for (int j = 0; j < n_hid; ++j) acc += wrow[j] * hidden[j];
        z[i] += acc;
    }
    if (model.activation == Activation::sigmoid_softmax)
        for (double& v : z) v = sigmoid(v);
    return z;
}

// ---- checkpoint format -------------------------------------------------
// magic "KDLWCKPT", u32 version, topology block, activation byte,
// per-pair little-endian doubles row-major (weights, hidden bias,
// visible bias), then the mask as an edge list (u32 pair, u32 src,
// u32 dst). Host is assumed little-endian.

namespace detail {
template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated checkpoint");
    return v;
}
}  // namespace detail

inline void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write("KDLWCKPT", 8);
    detail::put<uint32_t>(out, 1);
    detail::put<uint32_t>(out, static_cast<uint32_t>(model.spec.layer_widths.size()));
    for (int w : model.spec.layer_widths) detail::put<int64_t>(out, w);
    for (int k : model.spec.degree_schedule) detail::put<int64_t>(out, k);
    detail::put<int64_t>(out, model.spec.partition_layer);
    detail::put<int64_t>(out, model.spec.section_count);
    detail::put<uint8_t>(out, static_cast<uint8_t>(model.activation));
    for (int p = 0; p < model.pair_count(); ++p) {
        for (double v : model.weights[p].data) detail::put<double>(out, v);
        for (double v : model.hidden_bias[p]) detail::put<double>(out, v);
        for (double v : model.visible_bias[p]) detail::put<double>(out, v);
    }
    detail::put<uint64_t>(out, static_cast<uint64_t>(model.mask.total_edges()));
    for (int p = 0; p < model.pair_count(); ++p)
        for (int i = 0; i < model.mask.widths[p]; ++i)
            for (int j = 0; j < model.mask.widths[p + 1]; ++j)
                if (model.mask.get(p, i, j)) {
                    detail::put<uint32_t>(out, static_cast<uint32_t>(p));
                    detail::put<uint32_t>(out, static_cast<uint32_t>(i));
                    detail::put<uint32_t>(out, static_cast<uint32_t>(j));
                }
    if (!out) throw IoError("write failure on checkpoint: " + path);
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "KDLWCKPT", 8) != 0)
        throw IoError("bad checkpoint magic: " + path);
    if (detail::get<uint32_t>(in) != 1) throw IoError("unsupported checkpoint version");
    const auto layers = detail::get<uint32_t>(in);
    TopologySpec spec;
    for (uint32_t i = 0; i < layers; ++i)
        spec.layer_widths.push_back(static_cast<int>(detail::get<int64_t>(in)));
    for (uint32_t i = 0; i + 1 < layers; ++i)
        spec.degree_schedule.push_back(static_cast<int>(detail::get<int64_t>(in)));
    spec.partition_layer = static_cast<int>(detail::get<int64_t>(in));
    spec.section_count = static_cast<int>(detail::get<int64_t>(in));
    const auto act = static_cast<Activation>(detail::get<uint8_t>(in));
    Model model;
    model.spec = spec;
    model.activation = act;
    model.mask = empty_mask(spec);
    for (int p = 0; p < spec.pair_count(); ++p) {
        Matrix w(spec.layer_widths[p], spec.layer_widths[p + 1]);
        for (double& v : w.data) v = detail::get<double>(in);
        model.weights.push_back(std::move(w));
        std::vector<double> hb(static_cast<size_t>(spec.layer_widths[p + 1]));
        for (double& v : hb) v = detail::get<double>(in);
        model.hidden_bias.push_back(std::move(hb));
        std::vector<double> vb(static_cast<size_t>(spec.layer_widths[p]));
        for (double& v : vb) v = detail::get<double>(in);
        model.visible_bias.push_back(std::move(vb));
    }
    const auto edges = detail::get<uint64_t>(in);
    for (uint64_t e = 0; e < edges; ++e) {
        const auto p = detail::get<uint32_t>(in);
        const auto i = detail::get<uint32_t>(in);
        const auto j = detail::get<uint32_t>(in);
        model.mask.set(static_cast<int>(p), static_cast<int>(i), static_cast<int>(j), true);
    }
    model.clamp_to_mask();
    return model;
}

}  // namespace kdlw
