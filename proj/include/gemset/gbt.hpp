#pragma once

// Gradient-boosted regression trees over the six design features.
// Exact greedy splits, Newton leaves, no subsampling: training is fully
// deterministic.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gemset/error.hpp"
#include "gemset/features.hpp"
#include "json.hpp"

namespace gemset {

using FeatureRow = std::array<double, 6>;

enum class Loss { Logistic, Squared };

inline const char* loss_name(Loss l) { return l == Loss::Logistic ? "logistic" : "squared"; }

inline Loss parse_loss(const std::string& s) {
    if (s == "logistic") return Loss::Logistic;
    if (s == "squared") return Loss::Squared;
    throw ValidationError("unknown loss '" + s + "' (expected logistic or squared)");
}

struct TrainConfig {
    int n_trees = 200;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_leaf = 5;
    Loss loss = Loss::Logistic;

    void validate() const {
        if (n_trees < 1) throw ValidationError("train config: n_trees must be >= 1");
        if (max_depth < 1) throw ValidationError("train config: max_depth must be >= 1");
        if (!(learning_rate > 0 && learning_rate <= 1)) throw ValidationError("train config: learning_rate must be in (0, 1]");
        if (min_samples_leaf < 1) throw ValidationError("train config: min_samples_leaf must be >= 1");
    }
};

/// Internal node when `feature >= 0`; rows with x[feature] < threshold go left.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output before the learning rate

    bool is_leaf() const noexcept { return feature < 0; }
};

using Tree = std::vector<TreeNode>;

inline double tree_output(const Tree& t, const FeatureRow& x) {
    std::size_t k = 0;
    while (!t[k].is_leaf()) k = static_cast<std::size_t>(x[static_cast<std::size_t>(t[k].feature)] < t[k].threshold ? t[k].left : t[k].right);
    return t[k].value;
}

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct GbtModel {
    Loss loss = Loss::Logistic;
    double learning_rate = 0.1;
    double base_score = 0.0;  // log-odds for logistic, mean for squared
    std::vector<Tree> trees;

    /// base_score + lr·Σ tree outputs.
    double raw(const FeatureRow& x) const {
        double s = 0.0;
        for (const Tree& t : trees) s += tree_output(t, x);
        return base_score + learning_rate * s;
    }

    double predict(const FeatureRow& x) const {
        for (double v : x)
            if (!std::isfinite(v)) throw PreconditionError("predict: non-finite feature value");
        const double r = raw(x);
        return loss == Loss::Logistic ? sigmoid(r) : std::clamp(r, 0.0, 1.0);
    }
};

inline FeatureRow to_row(const FeatureVector& f) { return f.values(); }

struct TrainTrace {
    std::vector<double> loss;  // training loss after each round; entry 0 is the base model
};

namespace detail {

inline double training_loss(Loss loss, std::span<const double> f, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (loss == Loss::Squared) {
            s += 0.5 * (f[i] - y[i]) * (f[i] - y[i]);
        } else {
            // log(1 + e^f) − y·f, stable for large |f|
            s += std::max(f[i], 0.0) + std::log1p(std::exp(-std::abs(f[i]))) - y[i] * f[i];
        }
    }
    return s / static_cast<double>(f.size());
}

struct TreeBuilder {
    std::span<const FeatureRow> x;
    std::span<const double> g;
    std::span<const double> h;
    const TrainConfig& cfg;
    Tree nodes;

    static double leaf_value(double gs, double hs) { return hs < 1e-12 ? 0.0 : -gs / hs; }

    int build(std::vector<std::size_t> rows, int depth) {
        double gs = 0.0, hs = 0.0;
        for (std::size_t r : rows) gs += g[r], hs += h[r];
        const int id = static_cast<int>(nodes.size());
        nodes.push_back({});
        nodes.back().value = leaf_value(gs, hs);
        const std::size_t min_leaf = static_cast<std::size_t>(cfg.min_samples_leaf);
        if (depth >= cfg.max_depth || rows.size() < 2 * min_leaf) return id;

        const double parent = hs < 1e-12 ? 0.0 : gs * gs / hs;
        double best_gain = 1e-12;
        int best_f = -1;
        double best_t = 0.0;
        std::vector<std::size_t> order = rows;
        for (int f = 0; f < static_cast<int>(FeatureRow{}.size()); ++f) {
            const auto fi = static_cast<std::size_t>(f);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a][fi] < x[b][fi]; });
            double gl = 0.0, hl = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                gl += g[order[k]];
                hl += h[order[k]];
                const double a = x[order[k]][fi], b = x[order[k + 1]][fi];
                if (!(a < b)) continue;
                const std::size_t nl = k + 1, nr = order.size() - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double gr = gs - gl, hr = hs - hl;
                if (hl < 1e-12 || hr < 1e-12) continue;
                const double gain = gl * gl / hl + gr * gr / hr - parent;
                if (gain > best_gain) {
                    double t = a + 0.5 * (b - a);
                    if (!(t > a)) t = b;
                    best_gain = gain, best_f = f, best_t = t;
                }
            }
        }
        if (best_f < 0) return id;
        std::vector<std::size_t> lrows, rrows;
        for (std::size_t r : rows) (x[r][static_cast<std::size_t>(best_f)] < best_t ? lrows : rrows).push_back(r);
        const int l = build(std::move(lrows), depth + 1);
        const int r = build(std::move(rrows), depth + 1);
        TreeNode& n = nodes[static_cast<std::size_t>(id)];
        n.feature = best_f;
        n.threshold = best_t;
        n.left = l;
        n.right = r;
        return id;
    }
};

}  // namespace detail

inline GbtModel train(std::span<const FeatureRow> x, std::span<const double> y, const TrainConfig& cfg = {},
                      TrainTrace* trace = nullptr) {
    cfg.validate();
    if (x.size() != y.size())
        throw ValidationError("train: " + std::to_string(x.size()) + " feature rows but " + std::to_string(y.size()) + " labels");
    if (x.size() < 2 * static_cast<std::size_t>(cfg.min_samples_leaf))
        throw ValidationError("train: need at least 2*min_samples_leaf samples");
    for (const FeatureRow& r : x)
        for (double v : r)
            if (!std::isfinite(v)) throw ValidationError("train: non-finite feature value");
    const std::size_t n = x.size();
    GbtModel m;
    m.loss = cfg.loss;
    m.learning_rate = cfg.learning_rate;
    if (cfg.loss == Loss::Logistic) {
        std::size_t pos = 0;
        for (double v : y) {
            if (v != 0.0 && v != 1.0) throw ValidationError("train: logistic labels must be 0 or 1");
            pos += v == 1.0;
        }
        if (pos == 0 || pos == n) throw ValidationError("train: logistic loss needs both classes present");
        const double p = static_cast<double>(pos) / static_cast<double>(n);
        m.base_score = std::log(p / (1.0 - p));
    } else {
        m.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    }

    std::vector<double> f(n, m.base_score), g(n), h(n);
    if (trace) trace->loss = {detail::training_loss(cfg.loss, f, y)};
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (int round = 0; round < cfg.n_trees; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            if (cfg.loss == Loss::Logistic) {
                const double p = sigmoid(f[i]);
                g[i] = p - y[i];
                h[i] = p * (1.0 - p);
            } else {
                g[i] = f[i] - y[i];
                h[i] = 1.0;
            }
        }
        detail::TreeBuilder b{x, g, h, cfg, {}};
        b.build(all, 0);
        for (std::size_t i = 0; i < n; ++i) f[i] += cfg.learning_rate * tree_output(b.nodes, x[i]);
        m.trees.push_back(std::move(b.nodes));
        if (trace) trace->loss.push_back(detail::training_loss(cfg.loss, f, y));
    }
    return m;
}

// ---- model.json ----

inline nlohmann::json model_to_json(const GbtModel& m) {
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : m.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const TreeNode& n : t) {
            if (n.is_leaf())
                nodes.push_back({{"v", n.value}});
            else
                nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
        }
        trees.push_back({{"nodes", nodes}});
    }
    nlohmann::json names = nlohmann::json::array();
    for (const char* s : kFeatureNames) names.push_back(s);
    return {{"loss", loss_name(m.loss)},
            {"learning_rate", m.learning_rate},
            {"base_score", m.base_score},
            {"feature_names", names},
            {"trees", trees}};
}

inline GbtModel model_from_json(const nlohmann::json& j) {
    try {
        GbtModel m;
        m.loss = parse_loss(j.at("loss").get<std::string>());
        m.learning_rate = j.at("learning_rate").get<double>();
        m.base_score = j.at("base_score").get<double>();
        if (!(m.learning_rate > 0 && m.learning_rate <= 1)) throw ParseError("model: learning_rate must be in (0, 1]");
        for (const auto& jt : j.at("trees")) {
            Tree t;
            const auto& nodes = jt.at("nodes");
            if (!nodes.is_array() || nodes.empty()) throw ParseError("model: tree without nodes");
            for (const auto& jn : nodes) {
                TreeNode n;
                if (jn.contains("v")) {
                    n.value = jn.at("v").get<double>();
                } else {
                    n.feature = jn.at("f").get<int>();
                    n.threshold = jn.at("t").get<double>();
                    n.left = jn.at("l").get<int>();
                    n.right = jn.at("r").get<int>();
                }
                t.push_back(n);
            }
            // children must point forward so every walk terminates
            for (std::size_t k = 0; k < t.size(); ++k) {
                const TreeNode& n = t[k];
                if (n.is_leaf()) continue;
                if (n.feature < 0 || n.feature >= 6) throw ParseError("model: feature index out of range");
                for (int c : {n.left, n.right})
                    if (c <= static_cast<int>(k) || c >= static_cast<int>(t.size())) throw ParseError("model: bad child index");
            }
            m.trees.push_back(std::move(t));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model: ") + e.what());
    } catch (const ValidationError& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
}

inline std::string model_document(const GbtModel& m) { return model_to_json(m).dump(2) + "\n"; }

inline void save_model(const GbtModel& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << model_document(m);
    if (!out) throw IoError("write failed for " + path.string());
}

inline GbtModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace gemset
