#pragma once

// Label log (labels.jsonl) and the designs × judges like statistics.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gemset/error.hpp"
#include "json.hpp"

namespace gemset {

struct LabelRecord {
    std::string design_id;
    std::string judge_id;
    int label = 0;  // 1 like, 0 dislike
    std::string ts;
};

inline nlohmann::json label_to_json(const LabelRecord& r) {
    nlohmann::json j{{"design_id", r.design_id}, {"judge_id", r.judge_id}, {"label", r.label}};
    if (!r.ts.empty()) j["ts"] = r.ts;
    return j;
}

inline LabelRecord label_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("label record must be an object");
    LabelRecord r;
    if (!j.contains("design_id") || !j["design_id"].is_string() || j["design_id"].get<std::string>().empty())
        throw ValidationError("label record: design_id must be a non-empty string");
    if (!j.contains("judge_id") || !j["judge_id"].is_string() || j["judge_id"].get<std::string>().empty())
        throw ValidationError("label record: judge_id must be a non-empty string");
    if (!j.contains("label") || !j["label"].is_number_integer() || (j["label"] != 0 && j["label"] != 1))
        throw ValidationError("label record: label must be 0 or 1");
    r.design_id = j["design_id"].get<std::string>();
    r.judge_id = j["judge_id"].get<std::string>();
    r.label = j["label"].get<int>();
    if (j.contains("ts") && j["ts"].is_string()) r.ts = j["ts"].get<std::string>();
    return r;
}

/// Every record in file order. Blank lines are skipped.
inline std::vector<LabelRecord> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<LabelRecord> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(label_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ParseError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

/// (design, judge) → label, the last record winning.
using LabelMap = std::map<std::pair<std::string, std::string>, int>;

inline LabelMap last_wins(const std::vector<LabelRecord>& records) {
    LabelMap m;
    for (const LabelRecord& r : records) m[{r.design_id, r.judge_id}] = r.label;
    return m;
}

/// Rows are designs, columns judges; cells are 1, 0 or missing (−1).
class LabelMatrix {
public:
    static constexpr std::int8_t kMissing = -1;

    LabelMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), cells_(rows * cols, kMissing) {
        if (rows == 0 || cols == 0) throw ValidationError("label matrix needs at least one row and one column");
    }

    /// Designs and judges in sorted id order.
    static LabelMatrix from_labels(const LabelMap& labels) {
        std::vector<std::string> designs, judges;
        for (const auto& [k, v] : labels) {
            designs.push_back(k.first);
            judges.push_back(k.second);
        }
        auto uniq = [](std::vector<std::string>& v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        };
        uniq(designs);
        uniq(judges);
        if (designs.empty()) throw UndefinedMetricError("no labels");
        LabelMatrix m(designs.size(), judges.size());
        m.design_ids_ = designs;
        m.judge_ids_ = judges;
        for (const auto& [k, v] : labels) {
            const auto r = static_cast<std::size_t>(std::lower_bound(designs.begin(), designs.end(), k.first) - designs.begin());
            const auto c = static_cast<std::size_t>(std::lower_bound(judges.begin(), judges.end(), k.second) - judges.begin());
            m.set(r, c, static_cast<std::int8_t>(v));
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::int8_t at(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }
    void set(std::size_t r, std::size_t c, std::int8_t v) {
        if (v != 0 && v != 1 && v != kMissing) throw ValidationError("label matrix cell must be 0, 1 or missing");
        cells_[r * cols_ + c] = v;
    }
    const std::vector<std::string>& design_ids() const noexcept { return design_ids_; }
    const std::vector<std::string>& judge_ids() const noexcept { return judge_ids_; }

private:
    std::size_t rows_, cols_;
    std::vector<std::int8_t> cells_;
    std::vector<std::string> design_ids_, judge_ids_;
};

namespace detail {

struct RowTally {
    int likes = 0;
    int seen = 0;
};

inline std::vector<RowTally> tally(const LabelMatrix& m) {
    std::vector<RowTally> out;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        RowTally t;
        for (std::size_t c = 0; c < m.cols(); ++c) {
            const auto v = m.at(r, c);
            if (v == LabelMatrix::kMissing) continue;
            ++t.seen;
            t.likes += v;
        }
        if (t.seen > 0) out.push_back(t);
    }
    if (out.empty()) throw UndefinedMetricError("every design has only missing labels");
    return out;
}

}  // namespace detail

/// Fraction of designs (with at least one label) whose like rate is ≥ p.
inline double like_coverage(const LabelMatrix& m, double p) {
    if (!(p > 0 && p <= 1)) throw PreconditionError("like_coverage: p must be in (0, 1]");
    const auto rows = detail::tally(m);
    std::size_t hit = 0;
    for (const auto& t : rows) hit += t.likes >= p * t.seen - 1e-9;
    return static_cast<double>(hit) / static_cast<double>(rows.size());
}

/// Largest q on the 0.01 grid with like_coverage(q) ≥ q; 0 when none.
inline double symmetric_like_point(const LabelMatrix& m) {
    const auto rows = detail::tally(m);
    const auto n = static_cast<long>(rows.size());
    for (long k = 100; k >= 1; --k) {
        long hit = 0;
        for (const auto& t : rows) hit += 100L * t.likes >= k * t.seen;
        if (100L * hit >= k * n) return static_cast<double>(k) / 100.0;
    }
    return 0.0;
}

}  // namespace gemset
