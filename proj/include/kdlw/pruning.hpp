// Degree-constrained pruning: threshold screening plus probabilistic
// deletion until every source neuron sits at exactly k^(h) out-edges.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <vector>

#include "kdlw/common.hpp"
#include "kdlw/learning.hpp"
#include "kdlw/model.hpp"

namespace kdlw {

struct PruneConfig {
    double weight_threshold = 0.05;  // screen edges with |w| below this
    int eval_subset_size = 20;       // samples used to estimate E_r and dE_r
    int max_rounds = 10;             // screening rounds before force-pruning
    uint64_t seed = 0;
};

struct AuditRow {
    int round = 0;  // 0 = force-prune phase
    int pair = 0;
    int src = 0;
    int dst = 0;
    double abs_weight = 0.0;
    double delta_er = 0.0;
    double probability = 0.0;
    bool deleted = false;
};

inline void write_audit_csv(const std::vector<AuditRow>& rows, std::ostream& out) {
    out << "round,pair,src,dst,abs_weight,delta_er,probability,deleted\n";
    char buf[200];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.9g,%.9g,%.9g,%d\n", r.round, r.pair, r.src,
                      r.dst, r.abs_weight, r.delta_er, r.probability, r.deleted ? 1 : 0);
        out << buf;
    }
}

// min(1, exp(-dE/E)): removals that do not hurt reconstruction are
// always accepted, harmful ones survive with decaying probability.
inline double deletion_probability(double delta_er, double er) {
    if (!(er > 0.0)) throw ConfigError("deletion_probability needs a positive reference error");
    return std::min(1.0, std::exp(-delta_er / er));
}

namespace detail {

// Cached per-sample forward/reconstruction state of one layer pair,
// updated in place as edges are deleted.
struct PairEvalState {
    int n_vis = 0, n_hid = 0;
    std::vector<std::vector<double>> v;     // subset samples
    std::vector<std::vector<double>> zh;    // hidden pre-activations
    std::vector<std::vector<double>> h;     // hidden means
    std::vector<std::vector<double>> zv;    // reconstruction pre-activations
    std::vector<std::vector<double>> vhat;  // reconstructions
    std::vector<double> er;                 // per-sample reconstruction error
    std::vector<std::vector<int>> col_sources;  // mask-true sources per hidden unit

    double mean_er() const {
        return std::accumulate(er.begin(), er.end(), 0.0) / std::max<size_t>(1, er.size());
    }
};

inline PairEvalState build_eval_state(const Model& model, int pair, const Matrix& data,
                                      int subset_size, Rng& rng) {
    PairEvalState st;
    st.n_vis = model.spec.layer_widths[pair];
    st.n_hid = model.spec.layer_widths[pair + 1];
    std::vector<int> all(static_cast<size_t>(data.rows));
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> chosen;
    std::sample(all.begin(), all.end(), std::back_inserter(chosen),
                std::min(subset_size, data.rows), rng);
    const Matrix& w = model.weights[pair];
    st.col_sources.assign(static_cast<size_t>(st.n_hid), {});
    for (int i = 0; i < st.n_vis; ++i)
        for (int j = 0; j < st.n_hid; ++j)
            if (model.mask.get(pair, i, j)) st.col_sources[j].push_back(i);
    for (int row : chosen) {
        std::vector<double> v(data.row(row), data.row(row) + st.n_vis);
        std::vector<double> zh(model.hidden_bias[pair]);
        for (int i = 0; i < st.n_vis; ++i) {
            const double vi = v[i];
            if (vi == 0.0) continue;
            const double* wrow = w.row(i);
            for (int j = 0; j < st.n_hid; ++j) zh[j] += wrow[j] * vi;
        }
        std::vector<double> h(zh);
        for (double& z : h) z = sigmoid(z);
        std::vector<double> zv(model.visible_bias[pair]);
        for (int i = 0; i < st.n_vis; ++i) {
            const double* wrow = w.row(i);
            double acc = 0.0;
            for (int j = 0; j < st.n_hid; ++j) acc += wrow[j] * h[j];
            zv[i] += acc;
        }
        std::vector<double> vhat(zv);
        for (double& z : vhat) z = sigmoid(z);
        double er = 0.0;
        for (int i = 0; i < st.n_vis; ++i) {
            const double d = vhat[i] - v[i];
            er += d * d;
        }
        st.v.push_back(std::move(v));
        st.zh.push_back(std::move(zh));
        st.h.push_back(std::move(h));
        st.zv.push_back(std::move(zv));
        st.vhat.push_back(std::move(vhat));
        st.er.push_back(0.5 * er);
    }
    return st;
}

// Mean reconstruction error with edge (src,dst) removed; commits the
// removal into the cached state when `commit` is set.
inline double removed_edge_er(PairEvalState& st, const Matrix& w, int src, int dst, bool commit) {
    double total = 0.0;
    const double w_edge = w.at(src, dst);
    for (size_t s = 0; s < st.v.size(); ++s) {
        const double zh_new = st.zh[s][dst] - w_edge * st.v[s][src];
        const double h_new = sigmoid(zh_new);
        const double dh = h_new - st.h[s][dst];
        double er = st.er[s];
        for (int i : st.col_sources[dst]) {
            const double delta = (i == src) ? -w_edge * st.h[s][dst] : w.at(i, dst) * dh;
            const double zv_new = st.zv[s][i] + delta;
            const double vhat_new = sigmoid(zv_new);
            const double d_old = st.vhat[s][i] - st.v[s][i];
            const double d_new = vhat_new - st.v[s][i];
            er += 0.5 * (d_new * d_new - d_old * d_old);
            if (commit) {
                st.zv[s][i] = zv_new;
                st.vhat[s][i] = vhat_new;
            }
        }
        if (commit) {
            st.zh[s][dst] = zh_new;
            st.h[s][dst] = h_new;
            st.er[s] = er;
        }
        total += er;
    }
    return total / std::max<size_t>(1, st.v.size());
}

}  // namespace detail

// Reduce pair `pair` to exactly `target_k` out-edges per source row.
// `data` holds visible activations for this pair, one sample per row.
inline void prune_pair(Model& model, int pair, const Matrix& data, const PruneConfig& cfg,
                       int target_k, const TrainConfig& adjust,
                       std::vector<AuditRow>* audit = nullptr) {
    if (pair < 0 || pair >= model.pair_count()) throw ConfigError("prune pair out of range");
    const int n_vis = model.spec.layer_widths[pair];
    const int n_hid = model.spec.layer_widths[pair + 1];
    std::vector<int> degree(static_cast<size_t>(n_vis));
    for (int i = 0; i < n_vis; ++i) {
        degree[i] = model.mask.row_degree(pair, i);
        if (degree[i] < target_k)
            throw ConstraintError("source neuron " + std::to_string(i) + " of pair " +
                                  std::to_string(pair) + " has out-degree " +
                                  std::to_string(degree[i]) + " below target " +
                                  std::to_string(target_k) + "; edges cannot regrow");
    }
    auto done = [&] {
        return std::all_of(degree.begin(), degree.end(),
                           [&](int d) { return d == target_k; });
    };
    Rng rng(cfg.seed ^ (0xa076'1d64'78bd'642fULL + static_cast<uint64_t>(pair)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int round = 1; round <= cfg.max_rounds && !done(); ++round) {
        rbm_train_epoch(model, pair + 1, data, adjust, rng);  // Step 3 weight adjustment
        auto st = detail::build_eval_state(model, pair, data, cfg.eval_subset_size, rng);
        struct Cand {
            double aw;
            int src, dst;
        };
        std::vector<Cand> cands;
        const Matrix& w = model.weights[pair];
        for (int i = 0; i < n_vis; ++i) {
            if (degree[i] <= target_k) continue;
            for (int j = 0; j < n_hid; ++j) {
                if (!model.mask.get(pair, i, j)) continue;
                const double aw = std::abs(w.at(i, j));
                if (aw < cfg.weight_threshold) cands.push_back({aw, i, j});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.aw != b.aw) return a.aw < b.aw;
            if (a.src != b.src) return a.src < b.src;
            return a.dst < b.dst;
        });
        for (const Cand& c : cands) {
            if (degree[c.src] <= target_k) continue;  // frozen at k
            const double er_with = st.mean_er();
            const double er_without =
                detail::removed_edge_er(st, model.weights[pair], c.src, c.dst, false);
            const double delta = er_without - er_with;
            const double prob = er_with > 0.0 ? deletion_probability(delta, er_with) : 1.0;
            const bool del = unit(rng) < prob;
            if (audit) audit->push_back({round, pair, c.src, c.dst, c.aw, delta, prob, del});
            if (del) {
                detail::removed_edge_er(st, model.weights[pair], c.src, c.dst, true);
                auto& col = st.col_sources[c.dst];
                col.erase(std::remove(col.begin(), col.end(), c.src), col.end());
                model.mask.set(pair, c.src, c.dst, false);
                model.weights[pair].at(c.src, c.dst) = 0.0;
                --degree[c.src];
            }
        }
    }
    // deterministic fallback: drop smallest-|w| edges, ties to lowest dst
    for (int i = 0; i < n_vis; ++i) {
        if (degree[i] <= target_k) continue;
        std::vector<std::pair<double, int>> kept;
        for (int j = 0; j < n_hid; ++j)
            if (model.mask.get(pair, i, j))
                kept.emplace_back(std::abs(model.weights[pair].at(i, j)), j);
        std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return a.second < b.second;
        });
        const int excess = degree[i] - target_k;
        for (int e = 0; e < excess; ++e) {
            const auto [aw, j] = kept[e];
            if (audit) audit->push_back({0, pair, i, j, aw, 0.0, 1.0, true});
            model.mask.set(pair, i, j, false);
            model.weights[pair].at(i, j) = 0.0;
        }
        degree[i] = target_k;
    }
}

// Bottom-up degree-constrained construction across all pairs, checking
// the monotone layer-wise totals after each one.
inline void run_procedure_one(Model& model, const Matrix& input_data, const TopologySpec& spec,
                              const PruneConfig& cfg, const TrainConfig& adjust,
                              std::vector<AuditRow>* audit = nullptr) {
    validate(spec);
    if (model.spec.layer_widths != spec.layer_widths)
        throw ConfigError("model layer widths do not match the spec");
    apply_hard_constraint(model.mask, spec);
    model.clamp_to_mask();
    Matrix current = input_data;
    long long prev_total = -1;
    for (int p = 0; p < spec.pair_count(); ++p) {
        prune_pair(model, p, current, cfg, spec.degree_schedule[p], adjust, audit);
        const long long total = model.mask.pair_edge_total(p);
        if (prev_total >= 0 && total > prev_total)
            throw ConstraintError("layer-wise totals increase between pairs " +
                                  std::to_string(p - 1) + " and " + std::to_string(p));
        prev_total = total;
        if (p + 1 < spec.pair_count()) current = propagate_mean(model, p + 1, current);
    }
}

}  // namespace kdlw
