#pragma once

// The six handcrafted aesthetic features of a design: balance, emphasis,
// harmony of shape, harmony of orientation, proportion and unity.

#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "gemset/catalog.hpp"
#include "gemset/design.hpp"
#include "gemset/error.hpp"
#include "gemset/geometry.hpp"
#include "json.hpp"

namespace gemset {

struct FeatureParams {
    /// Stones whose boundary gap is at most this are neighbors (3 × bezel margin).
    double neighbor_threshold_mm = 1.5;
};

inline constexpr std::array<const char*, 6> kFeatureNames{
    "balance", "emphasis", "harmony_shape", "harmony_orientation", "proportion", "unity"};

struct FeatureVector {
    double balance = 0.0;              // mm
    double emphasis = 0.0;             // mm⁴
    double harmony_shape = 0.0;        // count
    double harmony_orientation = 0.0;  // rad
    double proportion = 0.0;           // mm²
    double unity = 0.0;                // mm

    std::array<double, 6> values() const {
        return {balance, emphasis, harmony_shape, harmony_orientation, proportion, unity};
    }
};

/// A placed stone with its outline materialized.
struct PlacedStone {
    int shape_id = 0;
    int symmetry_order = 1;
    double theta = 0.0;
    double area = 0.0;  // nominal, pose independent
    Point centroid;
    Polygon outline;
};

struct Layout {
    Polygon container;
    std::vector<PlacedStone> stones;
};

inline PlacedStone place_stone(const Catalog& c, int shape_id, int size_index, const Pose& pose) {
    Polygon outline = stone_polygon(c, shape_id, size_index, pose);
    const Point ctr = centroid(outline);
    return {shape_id, c.shape(shape_id).symmetry_order, pose.theta, c.stone_area(shape_id, size_index), ctr,
            std::move(outline)};
}

inline Layout make_layout(const Design& d, const Catalog& c) {
    Layout l{d.container, {}};
    l.stones.reserve(d.placements.size());
    for (const Placement& p : d.placements) l.stones.push_back(place_stone(c, p.shape_id, p.size_index, p.pose));
    return l;
}

// ---- statistics helpers ----

/// Population standard deviation, two-pass. Empty input gives 0.
inline double pop_stddev(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / n);
}

/// (A_max − mean(rest)) × popstddev(rest), excluding the first maximal entry.
inline double emphasis_from_areas(std::span<const double> areas) {
    if (areas.size() < 2) throw UndefinedFeatureError("emphasis needs at least 2 stones");
    const auto max_it = std::max_element(areas.begin(), areas.end());  // first maximum
    std::vector<double> rest;
    rest.reserve(areas.size() - 1);
    for (auto it = areas.begin(); it != areas.end(); ++it)
        if (it != max_it) rest.push_back(*it);
    const double mean_rest = std::accumulate(rest.begin(), rest.end(), 0.0) / static_cast<double>(rest.size());
    return (*max_it - mean_rest) * pop_stddev(rest);
}

inline double harmony_shape_from_counts(const std::array<int, kShapeCount>& counts) {
    std::array<double, kShapeCount> v{};
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = counts[i];
    return pop_stddev(v);
}

struct OrientedStone {
    int shape_id = 0;
    int symmetry_order = 1;
    double theta = 0.0;
};

/// Circular standard deviation √(−2 ln R) of symmetry-canonical orientations.
/// Each stone contributes the angle symmetry_order·θ; stones are grouped by
/// shape and R is the pooled mean resultant length Σ|S_g| / N, so rotating a
/// whole design leaves the value unchanged. 1 − R is accumulated from pairwise
/// differences to stay exact near R = 1.
inline double circular_spread(std::span<const OrientedStone> stones) {
    if (stones.empty()) return 0.0;
    std::array<std::vector<double>, kShapeCount> groups;
    for (const OrientedStone& s : stones)
        groups[static_cast<std::size_t>(s.shape_id)].push_back(
            normalize_angle(normalize_angle(s.theta) * s.symmetry_order));
    double deficit = 0.0;  // Σ_g (n_g − |S_g|)
    for (const auto& g : groups) {
        if (g.empty()) continue;
        const double n = static_cast<double>(g.size());
        double c = 0.0, s = 0.0, pair = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            c += std::cos(g[i]);
            s += std::sin(g[i]);
            for (std::size_t j = i + 1; j < g.size(); ++j) {
                const double h = std::sin(0.5 * (g[i] - g[j]));
                pair += 4.0 * h * h;  // ordered pairs (i,j),(j,i): 2·(1 − cos)
            }
        }
        const double resultant = std::hypot(c, s);
        deficit += pair / (n + resultant);  // n² − |S|² = Σ_{i,j} (1 − cos Δ)
    }
    const double one_minus_r = deficit / static_cast<double>(stones.size());
    if (one_minus_r >= 1.0) return std::sqrt(-2.0 * std::log(std::numeric_limits<double>::min()));
    return std::sqrt(std::max(0.0, -2.0 * std::log1p(-one_minus_r)));
}

// ---- per-feature operations on a layout ----

inline double balance(const Layout& l) {
    if (l.stones.empty()) throw UndefinedFeatureError("balance needs at least 1 stone");
    Point mean{};
    for (const PlacedStone& s : l.stones) mean = mean + s.centroid;
    mean = (1.0 / static_cast<double>(l.stones.size())) * mean;
    return distance(centroid(l.container), mean);
}

inline std::vector<double> stone_areas(const Layout& l) {
    std::vector<double> a;
    a.reserve(l.stones.size());
    for (const PlacedStone& s : l.stones) a.push_back(s.area);
    return a;
}

inline double emphasis(const Layout& l) { return emphasis_from_areas(stone_areas(l)); }

inline double harmony_shape(const Layout& l) {
    std::array<int, kShapeCount> counts{};
    for (const PlacedStone& s : l.stones) ++counts[static_cast<std::size_t>(s.shape_id)];
    return harmony_shape_from_counts(counts);
}

inline double harmony_orientation(const Layout& l) {
    std::vector<OrientedStone> o;
    o.reserve(l.stones.size());
    for (const PlacedStone& s : l.stones) o.push_back({s.shape_id, s.symmetry_order, s.theta});
    return circular_spread(o);
}

inline double proportion(const Layout& l) {
    const auto a = stone_areas(l);
    return pop_stddev(a);
}

struct Neighbor {
    std::size_t index = 0;
    double gap = 0.0;
};
using Adjacency = std::vector<std::vector<Neighbor>>;

/// Adjacency from a symmetric gap matrix: pairs with gap ≤ threshold, plus
/// an edge from every otherwise isolated stone to its nearest stone (lowest
/// index on ties). Symmetric; neighbor lists ascend by index.
inline Adjacency adjacency_from_gaps(const std::vector<std::vector<double>>& gaps, double threshold) {
    const std::size_t n = gaps.size();
    std::vector<std::vector<bool>> edge(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (gaps[i][j] <= threshold) edge[i][j] = edge[j][i] = true;
    std::vector<bool> isolated(n);
    for (std::size_t i = 0; i < n; ++i) isolated[i] = std::find(edge[i].begin(), edge[i].end(), true) == edge[i].end();
    for (std::size_t i = 0; i < n; ++i) {
        if (n < 2 || !isolated[i]) continue;
        std::size_t best = i == 0 ? 1 : 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && gaps[i][j] < gaps[i][best]) best = j;
        edge[i][best] = edge[best][i] = true;
    }
    Adjacency adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (edge[i][j]) adj[i].push_back({j, gaps[i][j]});
    return adj;
}

inline std::vector<std::vector<double>> gap_matrix(const Layout& l) {
    const std::size_t n = l.stones.size();
    std::vector<std::vector<double>> g(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) g[i][j] = g[j][i] = boundary_distance(l.stones[i].outline, l.stones[j].outline);
    return g;
}

inline Adjacency neighbors(const Layout& l, const FeatureParams& fp = {}) {
    if (l.stones.size() < 2) return Adjacency(l.stones.size());
    return adjacency_from_gaps(gap_matrix(l), fp.neighbor_threshold_mm);
}

/// Population stddev over stones of each stone's mean gap to its neighbors.
inline double unity_from_adjacency(const Adjacency& adj) {
    if (adj.size() < 2) throw UndefinedFeatureError("unity needs at least 2 stones");
    std::vector<double> means;
    means.reserve(adj.size());
    for (const auto& nb : adj) {
        double s = 0.0;
        for (const Neighbor& x : nb) s += x.gap;
        means.push_back(s / static_cast<double>(nb.size()));
    }
    return pop_stddev(means);
}

inline double unity(const Layout& l, const FeatureParams& fp = {}) {
    if (l.stones.size() < 2) throw UndefinedFeatureError("unity needs at least 2 stones");
    return unity_from_adjacency(neighbors(l, fp));
}

inline FeatureVector feature_vector(const Layout& l, const FeatureParams& fp = {}) {
    if (l.stones.size() < 2) throw UndefinedFeatureError("feature vector needs at least 2 stones");
    return {balance(l), emphasis(l), harmony_shape(l), harmony_orientation(l), proportion(l), unity(l, fp)};
}

inline FeatureVector feature_vector(const Design& d, const Catalog& c, const FeatureParams& fp = {}) {
    return feature_vector(make_layout(d, c), fp);
}

inline nlohmann::json features_to_json(const std::string& design_id, const FeatureVector& f) {
    nlohmann::json j{{"design_id", design_id}};
    const auto v = f.values();
    for (std::size_t i = 0; i < v.size(); ++i) j[kFeatureNames[i]] = v[i];
    return j;
}

}  // namespace gemset
