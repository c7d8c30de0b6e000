#pragma once

// Label aggregation into training targets, and model-based pruning of a
// design corpus.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gemset/design.hpp"
#include "gemset/error.hpp"
#include "gemset/features.hpp"
#include "gemset/gbt.hpp"
#include "gemset/metrics.hpp"
#include "json.hpp"

namespace gemset {

enum class Aggregation { Majority, Any, All };

inline Aggregation parse_aggregation(const std::string& s) {
    if (s == "majority") return Aggregation::Majority;
    if (s == "any") return Aggregation::Any;
    if (s == "all") return Aggregation::All;
    throw ValidationError("unknown aggregation '" + s + "' (expected majority, any or all)");
}

/// Binary target from one design's labels. Majority needs strictly more
/// likes than dislikes.
inline int aggregate(int likes, int total, Aggregation scheme) {
    if (total <= 0) throw PreconditionError("aggregate: no labels");
    switch (scheme) {
        case Aggregation::Majority: return 2 * likes > total ? 1 : 0;
        case Aggregation::Any: return likes > 0 ? 1 : 0;
        case Aggregation::All: return likes == total ? 1 : 0;
    }
    return 0;
}

/// design_id → target, after last-wins deduplication per (design, judge).
inline std::map<std::string, int> aggregate_labels(const std::vector<LabelRecord>& records, Aggregation scheme) {
    std::map<std::string, std::pair<int, int>> counts;
    for (const auto& [key, label] : last_wins(records)) {
        auto& c = counts[key.first];
        c.first += label;
        ++c.second;
    }
    std::map<std::string, int> out;
    for (const auto& [id, c] : counts) out[id] = aggregate(c.first, c.second, scheme);
    return out;
}

struct Discarded {
    std::string id;
    std::optional<double> score;
    std::string reason;
};

struct PruneResult {
    std::vector<std::string> kept;
    std::vector<Discarded> discarded;
    std::optional<double> threshold;
    std::optional<double> keep_fraction;
};

struct ScoredDesign {
    std::string id;
    std::optional<double> score;  // empty when features could not be computed
    std::string error;
};

/// Threshold mode keeps score ≥ threshold. Keep-fraction mode keeps the
/// floor(f·n + 0.5) best scores, ties by design_id. Unscored designs are
/// always discarded and count toward n. Both lists ascend by design_id.
inline PruneResult prune_scored(std::vector<ScoredDesign> designs, std::optional<double> threshold,
                                std::optional<double> keep_fraction) {
    if (threshold.has_value() == keep_fraction.has_value())
        throw ValidationError("prune: give exactly one of threshold or keep_fraction");
    if (keep_fraction && !(*keep_fraction >= 0 && *keep_fraction <= 1))
        throw ValidationError("prune: keep_fraction must be in [0, 1]");
    if (threshold && std::isnan(*threshold)) throw ValidationError("prune: threshold is NaN");
    std::sort(designs.begin(), designs.end(), [](const ScoredDesign& a, const ScoredDesign& b) { return a.id < b.id; });
    for (std::size_t k = 1; k < designs.size(); ++k)
        if (designs[k].id == designs[k - 1].id) throw ValidationError("prune: duplicate design_id " + designs[k].id);

    PruneResult r{{}, {}, threshold, keep_fraction};
    std::vector<bool> keep(designs.size(), false);
    if (threshold) {
        for (std::size_t k = 0; k < designs.size(); ++k) keep[k] = designs[k].score && *designs[k].score >= *threshold;
    } else {
        std::vector<std::size_t> order;
        for (std::size_t k = 0; k < designs.size(); ++k)
            if (designs[k].score) order.push_back(k);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return *designs[a].score > *designs[b].score; });
        const auto n = static_cast<std::size_t>(std::floor(*keep_fraction * static_cast<double>(designs.size()) + 0.5));
        for (std::size_t k = 0; k < std::min(n, order.size()); ++k) keep[order[k]] = true;
    }
    for (std::size_t k = 0; k < designs.size(); ++k) {
        const ScoredDesign& d = designs[k];
        if (keep[k])
            r.kept.push_back(d.id);
        else if (!d.score)
            r.discarded.push_back({d.id, std::nullopt, "feature-error: " + d.error});
        else
            r.discarded.push_back({d.id, d.score, threshold ? "below-threshold" : "below-keep-fraction"});
    }
    return r;
}

/// Model probability per design; feature failures are recorded, not thrown.
inline std::vector<ScoredDesign> score_designs(const std::vector<Design>& designs, const Catalog& c, const GbtModel& m,
                                               const FeatureParams& fp = {}) {
    std::vector<ScoredDesign> out;
    out.reserve(designs.size());
    for (const Design& d : designs) {
        try {
            out.push_back({d.design_id, m.predict(to_row(feature_vector(d, c, fp))), {}});
        } catch (const Error& e) {
            out.push_back({d.design_id, std::nullopt, e.what()});
        }
    }
    return out;
}

inline nlohmann::json prune_manifest(const PruneResult& r) {
    nlohmann::json disc = nlohmann::json::array();
    for (const Discarded& d : r.discarded) {
        nlohmann::json j{{"id", d.id}, {"reason", d.reason}};
        j["score"] = d.score ? nlohmann::json(*d.score) : nlohmann::json(nullptr);
        disc.push_back(j);
    }
    nlohmann::json m{{"kept", r.kept}, {"discarded", disc}};
    m["threshold"] = r.threshold ? nlohmann::json(*r.threshold) : nlohmann::json(nullptr);
    if (r.keep_fraction) m["keep_fraction"] = *r.keep_fraction;
    return m;
}

}  // namespace gemset
