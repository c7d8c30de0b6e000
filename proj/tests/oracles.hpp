#pragma once

// Brute-force reference implementations shared by the tests and the
// acceptance binary. The packing oracles use only the raw masks from the
// footprint table, never the library's fit or component routines.

#include <algorithm>
#include <numeric>
#include <queue>
#include <vector>

#include "gemset/generator.hpp"
#include "gemset/metrics.hpp"

namespace oracle {

using gemset::CellMask;
using gemset::FootprintTable;

inline std::vector<std::vector<int>> components(const std::vector<std::uint8_t>& occ, int w, int h) {
    std::vector<int> label(occ.size(), -1);
    std::vector<std::vector<int>> out;
    for (int s = 0; s < w * h; ++s) {
        if (occ[s] || label[s] >= 0) continue;
        std::vector<int> comp;
        std::queue<int> q;
        q.push(s);
        label[s] = static_cast<int>(out.size());
        while (!q.empty()) {
            const int c = q.front();
            q.pop();
            comp.push_back(c);
            const int i = c % w, j = c / w;
            const int nb[4][2] = {{i + 1, j}, {i - 1, j}, {i, j + 1}, {i, j - 1}};
            for (const auto& n : nb) {
                if (n[0] < 0 || n[1] < 0 || n[0] >= w || n[1] >= h) continue;
                const int k = n[1] * w + n[0];
                if (occ[k] || label[k] >= 0) continue;
                label[k] = label[s];
                q.push(k);
            }
        }
        out.push_back(std::move(comp));
    }
    return out;
}

inline std::vector<std::pair<int, int>> cells_of(const CellMask& m) {
    std::vector<std::pair<int, int>> v;
    for (const auto& r : m.runs)
        for (int dx = r.dx0; dx <= r.dx1; ++dx) v.emplace_back(dx, r.dy);
    return v;
}

/// Slides every unique cover mask over every center inside the component.
inline bool fits_somewhere(const std::vector<int>& comp, int w, int h, const FootprintTable& t) {
    std::vector<std::uint8_t> in(static_cast<std::size_t>(w * h), 0);
    for (int c : comp) in[c] = 1;
    std::vector<int> order(t.unique_count());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return t[a].cover.cells < t[b].cover.cells; });
    for (int id : order) {
        if (t[id].cover.cells > static_cast<int>(comp.size())) break;
        const auto cells = cells_of(t[id].cover);
        for (int center : comp) {
            const int ci = center % w, cj = center / w;
            bool ok = true;
            for (const auto& [dx, dy] : cells) {
                const int i = ci + dx, j = cj + dy;
                if (i < 0 || j < 0 || i >= w || j >= h || !in[j * w + i]) {
                    ok = false;
                    break;
                }
            }
            if (ok) return true;
        }
    }
    return false;
}

/// A component is dead when it is at least the slack area and nothing fits.
inline bool is_dead(const std::vector<int>& comp, int w, int h, double cell_area, double slack, const FootprintTable& t) {
    return static_cast<double>(comp.size()) * cell_area >= slack && !fits_somewhere(comp, w, h, t);
}

inline bool any_dead(const std::vector<std::uint8_t>& occ, int w, int h, double cell_area, double slack,
                     const FootprintTable& t) {
    for (const auto& c : components(occ, w, h))
        if (is_dead(c, w, h, cell_area, slack, t)) return true;
    return false;
}

/// Exhaustive version of the filter: stamp, relabel everything, test every part.
inline bool creates_dead_space(const gemset::GenState& s, const gemset::Candidate& c) {
    const gemset::GridSpec& g = s.grid();
    std::vector<std::uint8_t> occ = s.occupancy().raw();
    for (const auto& [dx, dy] : cells_of(s.table().at(c.shape_id, c.size_index, c.orientation).stamp)) {
        const int i = c.ci + dx, j = c.cj + dy;
        if (i >= 0 && j >= 0 && i < g.width && j < g.height) occ[j * g.width + i] = 1;
    }
    return any_dead(occ, g.width, g.height, g.cell_area(), s.slack_area(), s.table());
}

/// Every (footprint, center) whose cover lies on free cells.
inline std::vector<gemset::Candidate> all_fitting(const gemset::GenState& s) {
    std::vector<gemset::Candidate> out;
    const gemset::GridSpec& g = s.grid();
    const FootprintTable& t = s.table();
    for (std::size_t id = 0; id < t.unique_count(); ++id) {
        const auto cells = cells_of(t[static_cast<int>(id)].cover);
        for (int cj = 0; cj < g.height; ++cj)
            for (int ci = 0; ci < g.width; ++ci) {
                bool ok = true;
                for (const auto& [dx, dy] : cells)
                    if (s.blocked(ci + dx, cj + dy)) {
                        ok = false;
                        break;
                    }
                if (ok) {
                    const auto& f = t[static_cast<int>(id)];
                    out.push_back(s.make_candidate(f.shape_id, f.size_index, f.orientation, ci, cj));
                }
            }
    }
    return out;
}

// Row scan in integer arithmetic: like rate ≥ k/100 ⇔ 100·likes ≥ k·seen.
inline double like_coverage(const gemset::LabelMatrix& m, int k) {
    int hit = 0, rows = 0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        int likes = 0, seen = 0;
        for (std::size_t c = 0; c < m.cols(); ++c)
            if (m.at(r, c) != gemset::LabelMatrix::kMissing) ++seen, likes += m.at(r, c);
        if (seen == 0) continue;
        ++rows;
        hit += 100 * likes >= k * seen;
    }
    return static_cast<double>(hit) / rows;
}

inline double symmetric_like_point(const gemset::LabelMatrix& m) {
    double best = 0.0;
    for (int k = 1; k <= 100; ++k)
        if (like_coverage(m, k) * 100 >= k - 1e-9) best = k / 100.0;
    return best;
}

}  // namespace oracle
