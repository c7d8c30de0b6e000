#pragma once

// Sequential stone placement. Each step proposes candidate stones along the
// boundary of the free space, drops those that would leave an unfillable
// pocket (memoized component-fillability over the occupancy grid), ranks the
// rest by the aesthetic objective and places the best one.
//
// Grid semantics: a stone's cover mask holds every cell whose square meets
// the stone; its stamp holds every cell whose square comes within the bezel
// margin of the stone. A container cell is free when its center lies inside
// the container with clearance ≥ margin + half the cell diagonal. A cover
// mask that avoids all blocked cells therefore guarantees exact clearance
// ≥ margin from the container and gap > margin to every placed stone.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "gemset/catalog.hpp"
#include "gemset/design.hpp"
#include "gemset/error.hpp"
#include "gemset/features.hpp"
#include "gemset/geometry.hpp"
#include "json.hpp"

namespace gemset {

struct GenParams {
    double cell_size = 0.25;          // mm
    int orientations = 16;            // evenly spaced over [0, 2π)
    double bezel_margin = 0.5;        // mm
    std::optional<double> slack_area;  // mm²; default 0.5 × smallest stone area
    double w_balance = 1.0;
    double w_harmony_shape = 1.0;
    double w_harmony_orientation = 1.0;
    double w_proportion = 1.0;
    double w_unity = 1.0;
    int min_stones = 5;
    int max_stones = 60;
    double stop_free_fraction = 0.0;  // 0 disables the stop
    std::uint64_t seed = 0;
    int pose_budget = 512;          // (anchor, orientation) pairs proposed per step
    int anchor_stride = 2;          // cells; one anchor per stride × stride block
    double keep_probability = 0.7;  // seeded anchor subsampling

    void validate() const {
        if (!(cell_size > 0)) throw ValidationError("gen params: cell_size must be > 0");
        if (orientations < 1) throw ValidationError("gen params: orientations must be >= 1");
        if (bezel_margin < 0) throw ValidationError("gen params: bezel_margin must be >= 0");
        if (slack_area && *slack_area < 0) throw ValidationError("gen params: slack_area must be >= 0");
        for (double w : {w_balance, w_harmony_shape, w_harmony_orientation, w_proportion, w_unity})
            if (!(w >= 0)) throw ValidationError("gen params: weights must be >= 0");
        if (min_stones < 0 || max_stones < 1 || min_stones > max_stones)
            throw ValidationError("gen params: need 0 <= min_stones <= max_stones, max_stones >= 1");
        if (!(stop_free_fraction >= 0 && stop_free_fraction < 1))
            throw ValidationError("gen params: stop_free_fraction must be in [0, 1)");
        if (pose_budget < 1 || anchor_stride < 1) throw ValidationError("gen params: pose_budget, anchor_stride >= 1");
        if (!(keep_probability > 0 && keep_probability <= 1))
            throw ValidationError("gen params: keep_probability must be in (0, 1]");
    }

    double neighbor_threshold() const { return 3.0 * bezel_margin; }
    double slack(const Catalog& c) const { return slack_area.value_or(0.5 * c.smallest_stone_area()); }

    nlohmann::json to_json() const {
        return {{"cell_size", cell_size},
                {"orientations", orientations},
                {"bezel_margin", bezel_margin},
                {"slack_area", slack_area ? nlohmann::json(*slack_area) : nlohmann::json(nullptr)},
                {"w_balance", w_balance},
                {"w_harmony_shape", w_harmony_shape},
                {"w_harmony_orientation", w_harmony_orientation},
                {"w_proportion", w_proportion},
                {"w_unity", w_unity},
                {"min_stones", min_stones},
                {"max_stones", max_stones},
                {"stop_free_fraction", stop_free_fraction},
                {"pose_budget", pose_budget},
                {"anchor_stride", anchor_stride},
                {"keep_probability", keep_probability}};
    }
    /// Seed-independent fingerprint of the knobs.
    std::string fingerprint() const { return fnv1a_hex(to_json().dump()); }
};

class GenerationFailed : public Error {
public:
    GenerationFailed(const std::string& msg, Design partial) : Error(msg), partial_(std::move(partial)) {}
    const Design& partial() const noexcept { return partial_; }

private:
    Design partial_;
};

class ContainerTooSmall : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// ---------------------------------------------------------------------------
// Cell masks and the footprint table

struct RowRun {
    int dy = 0;
    int dx0 = 0;
    int dx1 = 0;  // inclusive
};

/// Cell offsets relative to the cell holding the stone center.
struct CellMask {
    std::vector<RowRun> runs;
    int cells = 0;
    int min_dx = 0, max_dx = 0, min_dy = 0, max_dy = 0;
};

namespace detail {

// Horizontal extent of a convex CCW ring at height y.
inline bool convex_row_interval(const std::vector<Point>& ring, double y, double& xl, double& xr) {
    xl = std::numeric_limits<double>::infinity();
    xr = -xl;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const Point a = ring[j];
        const Point b = ring[i];
        if ((a.y < y && b.y < y) || (a.y > y && b.y > y)) continue;
        if (a.y == b.y) {
            xl = std::min({xl, a.x, b.x});
            xr = std::max({xr, a.x, b.x});
        } else {
            const double x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
            xl = std::min(xl, x);
            xr = std::max(xr, x);
        }
    }
    return xl <= xr;
}

// Cells whose center lies in the convex ring (boundary inclusive, widened by kEps).
inline CellMask mask_from_convex(const std::vector<Point>& ring, double h) {
    double ymin = ring.front().y, ymax = ymin;
    for (const Point& p : ring) ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
    CellMask m;
    bool first = true;
    const int j0 = static_cast<int>(std::ceil((ymin - kEps) / h));
    const int j1 = static_cast<int>(std::floor((ymax + kEps) / h));
    for (int dy = j0; dy <= j1; ++dy) {
        const double y = std::clamp(dy * h, ymin, ymax);
        double xl, xr;
        if (!convex_row_interval(ring, y, xl, xr)) continue;
        const int dx0 = static_cast<int>(std::ceil((xl - kEps) / h));
        const int dx1 = static_cast<int>(std::floor((xr + kEps) / h));
        if (dx0 > dx1) continue;
        m.runs.push_back({dy, dx0, dx1});
        m.cells += dx1 - dx0 + 1;
        if (first) {
            m.min_dx = dx0, m.max_dx = dx1, m.min_dy = dy, m.max_dy = dy;
            first = false;
        } else {
            m.min_dx = std::min(m.min_dx, dx0);
            m.max_dx = std::max(m.max_dx, dx1);
            m.min_dy = std::min(m.min_dy, dy);
            m.max_dy = std::max(m.max_dy, dy);
        }
    }
    return m;
}

inline std::vector<Point> minkowski_square(const std::vector<Point>& ring, double half) {
    std::vector<Point> pts;
    pts.reserve(ring.size() * 4);
    for (const Point& p : ring)
        for (double sx : {-half, half})
            for (double sy : {-half, half}) pts.push_back({p.x + sx, p.y + sy});
    return convex_hull(std::move(pts));
}

// Convex superset of ring ⊕ disk(r): each vertex expanded by a circumscribed 32-gon.
inline std::vector<Point> minkowski_disk(const std::vector<Point>& ring, double r) {
    if (r <= 0) return ring;
    constexpr int k = 32;
    const double rr = r / std::cos(std::numbers::pi / k) + kEps;
    std::vector<Point> pts;
    pts.reserve(ring.size() * k);
    for (const Point& p : ring)
        for (int q = 0; q < k; ++q) pts.push_back({p.x + rr * std::cos(kTwoPi * q / k), p.y + rr * std::sin(kTwoPi * q / k)});
    return convex_hull(std::move(pts));
}

}  // namespace detail

struct Footprint {
    int shape_id = 0;
    int size_index = 0;
    int orientation = 0;  // canonical orientation index
    CellMask cover;
    CellMask stamp;
    std::vector<Point> cover_hull;  // stone ⊕ half-cell square, relative to the stone center
    double radius = 0.0;            // circumradius of the stone about its center
    int inner2 = 0;                 // squared radius (cells) of the largest centered disc inside the cover mask
    std::array<double, 64> support{};  // max over cover_hull of dot(q, u_k), u_k at angle 2πk/64
};

namespace detail {

inline int inner_radius2(const CellMask& m) {
    std::set<std::pair<int, int>> in;
    for (const RowRun& r : m.runs)
        for (int dx = r.dx0; dx <= r.dx1; ++dx) in.emplace(dx, r.dy);
    int best = std::numeric_limits<int>::max();
    for (int dy = m.min_dy - 1; dy <= m.max_dy + 1; ++dy)
        for (int dx = m.min_dx - 1; dx <= m.max_dx + 1; ++dx)
            if (!in.count({dx, dy})) best = std::min(best, dx * dx + dy * dy);
    return best;
}

}  // namespace detail

/// Rasterized masks for every (shape, size, orientation), deduplicated over
/// orientations that the shape's rotational symmetry makes identical.
class FootprintTable {
public:
    FootprintTable(const Catalog& c, const GenParams& p)
        : shapes_(kShapeCount), sizes_(c.size_count()), orientations_(p.orientations), cell_(p.cell_size) {
        index_.assign(static_cast<std::size_t>(shapes_ * sizes_ * orientations_), -1);
        const double half = 0.5 * p.cell_size;
        for (int s = 0; s < shapes_; ++s) {
            for (int z = 0; z < sizes_; ++z) {
                for (int o = 0; o < orientations_; ++o) {
                    const int co = canonical_orientation(s, o);
                    const std::size_t slot = flat(s, z, o);
                    if (co != o) {
                        index_[slot] = index_[flat(s, z, co)];
                        continue;
                    }
                    const Polygon stone = stone_polygon(c, s, z, Pose(0, 0, angle(o)));
                    Footprint f;
                    f.shape_id = s;
                    f.size_index = z;
                    f.orientation = o;
                    f.cover_hull = detail::minkowski_square(stone.vertices(), half);
                    f.cover = detail::mask_from_convex(f.cover_hull, p.cell_size);
                    f.stamp = detail::mask_from_convex(detail::minkowski_disk(f.cover_hull, p.bezel_margin), p.cell_size);
                    for (const Point& q : stone.vertices()) f.radius = std::max(f.radius, norm(q));
                    f.inner2 = detail::inner_radius2(f.cover);
                    for (int k = 0; k < 64; ++k) {
                        const Point u{std::cos(kTwoPi * k / 64), std::sin(kTwoPi * k / 64)};
                        f.support[static_cast<std::size_t>(k)] = -std::numeric_limits<double>::infinity();
                        for (const Point& q : f.cover_hull)
                            f.support[static_cast<std::size_t>(k)] = std::max(f.support[static_cast<std::size_t>(k)], dot(q, u));
                    }
                    index_[slot] = static_cast<int>(fps_.size());
                    fps_.push_back(std::move(f));
                }
            }
        }
        by_cells_.resize(fps_.size());
        std::iota(by_cells_.begin(), by_cells_.end(), 0);
        std::stable_sort(by_cells_.begin(), by_cells_.end(),
                         [&](int a, int b) { return fps_[static_cast<std::size_t>(a)].cover.cells < fps_[static_cast<std::size_t>(b)].cover.cells; });
    }

    /// Logical entry count: shapes × sizes × orientations.
    std::size_t size() const { return index_.size(); }
    std::size_t unique_count() const { return fps_.size(); }
    int shapes() const { return shapes_; }
    int sizes() const { return sizes_; }
    int orientations() const { return orientations_; }
    double cell_size() const { return cell_; }

    double angle(int o) const { return kTwoPi * o / orientations_; }

    /// Smallest orientation index equivalent to `o` under the shape's symmetry.
    int canonical_orientation(int shape_id, int o) const {
        const int order = builtin_shapes()[static_cast<std::size_t>(shape_id)].symmetry_order;
        const int period = orientations_ / std::gcd(orientations_, order);
        return o % period;
    }

    int id(int shape_id, int size_index, int orientation) const { return index_[flat(shape_id, size_index, orientation)]; }
    const Footprint& operator[](int id) const { return fps_[static_cast<std::size_t>(id)]; }
    const Footprint& at(int shape_id, int size_index, int orientation) const { return (*this)[id(shape_id, size_index, orientation)]; }

    /// Unique footprint ids ordered by ascending cover cell count.
    const std::vector<int>& ids_by_cells() const { return by_cells_; }

private:
    std::size_t flat(int s, int z, int o) const {
        return static_cast<std::size_t>((s * sizes_ + z) * orientations_ + o);
    }

    int shapes_, sizes_, orientations_;
    double cell_;
    std::vector<int> index_;
    std::vector<Footprint> fps_;
    std::vector<int> by_cells_;
};

/// Process-wide memoized footprint table for (catalog sizes, cell size,
/// orientation count, margin).
inline std::shared_ptr<const FootprintTable> footprint_table(const Catalog& c, const GenParams& p) {
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<const FootprintTable>> cache;
    const std::string key = nlohmann::json{{"sizes", c.sizes_mm()}, {"cell", p.cell_size}, {"k", p.orientations},
                                           {"m", p.bezel_margin}}.dump();
    std::lock_guard lock(mu);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, std::make_shared<const FootprintTable>(c, p)).first;
    return it->second;
}

// ---------------------------------------------------------------------------
// Component fillability (the DP table)

/// A free region normalized to its bounding box.
struct CellPatch {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // 1 = member

    std::string key() const {
        std::string k(8 + bits.size(), '\0');
        std::memcpy(k.data(), &width, 4);
        std::memcpy(k.data() + 4, &height, 4);
        std::memcpy(k.data() + 8, bits.data(), bits.size());
        return k;
    }
};

inline CellPatch make_patch(std::span<const int> cells, int grid_width, int* out_i0 = nullptr, int* out_j0 = nullptr) {
    int i0 = std::numeric_limits<int>::max(), j0 = i0, i1 = -1, j1 = -1;
    for (int idx : cells) {
        const int i = idx % grid_width, j = idx / grid_width;
        i0 = std::min(i0, i), i1 = std::max(i1, i), j0 = std::min(j0, j), j1 = std::max(j1, j);
    }
    CellPatch p;
    if (cells.empty()) return p;
    p.width = i1 - i0 + 1;
    p.height = j1 - j0 + 1;
    p.bits.assign(static_cast<std::size_t>(p.width * p.height), 0);
    for (int idx : cells) p.bits[static_cast<std::size_t>((idx / grid_width - j0) * p.width + idx % grid_width - i0)] = 1;
    if (out_i0) *out_i0 = i0;
    if (out_j0) *out_j0 = j0;
    return p;
}

struct FitWitness {
    int footprint = 0;
    int ci = 0;  // patch-relative cell of the stone center
    int cj = 0;
};

/// Every (footprint, offset) at which a cover mask lies inside the patch;
/// stops after `limit` witnesses, visiting footprints by ascending size.
inline std::vector<FitWitness> patch_fits(const CellPatch& p, const FootprintTable& table, std::size_t limit,
                                          bool one_per_footprint = false) {
    std::vector<FitWitness> out;
    const int members = static_cast<int>(std::count(p.bits.begin(), p.bits.end(), 1));
    std::vector<int> prefix(static_cast<std::size_t>((p.width + 1) * p.height), 0);
    for (int j = 0; j < p.height; ++j)
        for (int i = 0; i < p.width; ++i)
            prefix[static_cast<std::size_t>(j * (p.width + 1) + i + 1)] =
                prefix[static_cast<std::size_t>(j * (p.width + 1) + i)] + p.bits[static_cast<std::size_t>(j * p.width + i)];
    for (int id : table.ids_by_cells()) {
        const CellMask& m = table[id].cover;
        if (m.cells > members) break;
        if (m.max_dx - m.min_dx + 1 > p.width || m.max_dy - m.min_dy + 1 > p.height) continue;
        for (int oy = -m.min_dy; oy + m.max_dy < p.height; ++oy) {
            for (int ox = -m.min_dx; ox + m.max_dx < p.width; ++ox) {
                bool ok = true;
                for (const RowRun& r : m.runs) {
                    const std::size_t row = static_cast<std::size_t>((oy + r.dy) * (p.width + 1));
                    if (prefix[row + static_cast<std::size_t>(ox + r.dx1 + 1)] - prefix[row + static_cast<std::size_t>(ox + r.dx0)] !=
                        r.dx1 - r.dx0 + 1) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) continue;
                out.push_back({id, ox, oy});
                if (out.size() >= limit) return out;
                if (one_per_footprint) goto next_footprint;
            }
        }
    next_footprint:;
    }
    return out;
}

/// Memo of fit-test results keyed by normalized component shape.
class SalvageMemo {
public:
    std::optional<bool> find(const std::string& key) const {
        const auto it = map_.find(key);
        if (it == map_.end()) return std::nullopt;
        ++hits_;
        return it->second;
    }
    void put(std::string key, bool v) { map_.emplace(std::move(key), v); }
    std::size_t size() const { return map_.size(); }
    std::size_t hits() const { return hits_; }

private:
    std::unordered_map<std::string, bool> map_;
    mutable std::size_t hits_ = 0;
};

/// A free component is salvageable when it is a sliver below the slack
/// area or some cover mask fits entirely inside it.
inline bool salvageable(const Component& comp, int grid_width, const FootprintTable& table, double slack_area,
                        SalvageMemo* memo = nullptr) {
    if (comp.area < slack_area) return true;
    const CellPatch patch = make_patch(comp.cells, grid_width);
    std::string key;
    if (memo) {
        key = patch.key();
        if (auto hit = memo->find(key)) return *hit;
    }
    const bool fits = !patch_fits(patch, table, 1).empty();
    if (memo) memo->put(std::move(key), fits);
    return fits;
}

// ---------------------------------------------------------------------------
// Generation state

struct Candidate {
    int shape_id = 0;
    int size_index = 0;
    int orientation = 0;  // canonical orientation index
    int kind_id = 0;
    int ci = 0;  // grid cell of the stone center
    int cj = 0;
    Pose pose;
};

struct PlacedRecord {
    Placement placement;
    PlacedStone stone;
    int footprint = 0;
    int ci = 0;
    int cj = 0;
};

/// Statistics maintained incrementally while placing.
struct RunningStats {
    std::size_t count = 0;
    double mean_size_mm = 0.0;
    std::array<int, kShapeCount> shape_counts{};
    Point centroid_mean;
    double proportion = 0.0;
    double emphasis = 0.0;  // 0 until two stones exist
};

/// Welford accumulator; M2 stays exactly zero for identical samples.
struct Welford {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double pop_stddev() const { return n == 0 ? 0.0 : std::sqrt(std::max(0.0, m2 / static_cast<double>(n))); }
};

enum class StopReason { None, MaxStones, FreeFraction, NoFeasibleCandidate };

inline const char* stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::None: return "none";
        case StopReason::MaxStones: return "max-stones";
        case StopReason::FreeFraction: return "free-fraction";
        case StopReason::NoFeasibleCandidate: return "no-feasible-candidate";
    }
    return "?";
}

struct RankedCandidate {
    Candidate candidate;
    double score = 0.0;      // higher is better
    double size_gap = 0.0;   // |size − mean placed size|, mm
    double alignment = 0.0;  // |cos(θ − radial direction)|
};

class GenState {
public:
    GenState(Polygon container, const Catalog& catalog, GenParams params)
        : container_(std::move(container)), catalog_(&catalog), params_(std::move(params)) {
        params_.validate();
        table_ = footprint_table(catalog, params_);
        slack_ = params_.slack(catalog);
        container_centroid_ = centroid(container_);
        build_grid();
        seed_and_refresh();
    }

    /// State with no stones over a given occupancy grid (true = blocked).
    /// The container is the grid rectangle.
    static GenState from_occupancy(const BitGrid& occupancy, const Catalog& catalog, GenParams params) {
        const GridSpec& g = occupancy.spec();
        params.cell_size = g.cell_size;
        const Point o = g.origin;
        const double w = g.width * g.cell_size, h = g.height * g.cell_size;
        return GenState(Polygon({o, {o.x + w, o.y}, {o.x + w, o.y + h}, {o.x, o.y + h}}), catalog, std::move(params), occupancy);
    }

    const Polygon& container() const noexcept { return container_; }
    const Catalog& catalog() const noexcept { return *catalog_; }
    const GenParams& params() const noexcept { return params_; }
    const FootprintTable& table() const noexcept { return *table_; }
    const GridSpec& grid() const noexcept { return grid_; }
    double slack_area() const noexcept { return slack_; }
    Point container_centroid() const noexcept { return container_centroid_; }

    bool blocked(int i, int j) const {
        if (i < 0 || j < 0 || i >= grid_.width || j >= grid_.height) return true;
        return occ_[static_cast<std::size_t>(grid_.index(i, j))] != 0;
    }
    BitGrid occupancy() const {
        BitGrid g(grid_);
        for (std::size_t k = 0; k < occ_.size(); ++k) g.set(k, occ_[k] != 0);
        return g;
    }
    std::size_t free_cells() const { return free_cells_; }
    /// Squared distance, in cells, from (i, j) to the nearest blocked cell.
    int clearance2(int i, int j) const {
        if (i < 0 || j < 0 || i >= grid_.width || j >= grid_.height) return 0;
        return edt_[static_cast<std::size_t>(grid_.index(i, j))];
    }
    double free_fraction() const {
        return initial_free_ == 0 ? 0.0 : static_cast<double>(free_cells_) / static_cast<double>(initial_free_);
    }

    const std::vector<PlacedRecord>& placed() const noexcept { return placed_; }
    const std::vector<Component>& components() const noexcept { return comps_; }
    const std::vector<bool>& component_salvageable() const noexcept { return comp_ok_; }
    /// Index into components() of the free cell (i, j); −1 when blocked.
    int component_of(int i, int j) const { return blocked(i, j) ? -1 : label_[static_cast<std::size_t>(grid_.index(i, j))]; }
    SalvageMemo& memo() const { return memo_; }

    /// True when the footprint's cover mask centered at (ci, cj) touches no blocked cell.
    bool fits(int footprint, int ci, int cj) const {
        const CellMask& m = (*table_)[footprint].cover;
        if (ci + m.min_dx < 0 || ci + m.max_dx >= grid_.width || cj + m.min_dy < 0 || cj + m.max_dy >= grid_.height)
            return false;
        const int stride = grid_.width + 1;
        for (const RowRun& r : m.runs) {
            const std::size_t row = static_cast<std::size_t>((cj + r.dy) * stride);
            if (prefix_[row + static_cast<std::size_t>(ci + r.dx1 + 1)] != prefix_[row + static_cast<std::size_t>(ci + r.dx0)])
                return false;
        }
        return true;
    }

    Candidate make_candidate(int shape_id, int size_index, int orientation, int ci, int cj) const {
        const int co = table_->canonical_orientation(shape_id, orientation);
        const Point c = grid_.center(ci, cj);
        return {shape_id, size_index, co, palette_[static_cast<std::size_t>(shape_id) % palette_.size()], ci, cj,
                Pose(c.x, c.y, table_->angle(co))};
    }

    /// True when stamping the candidate leaves some new free component with
    /// area ≥ slack into which no stone fits. Components the stamp does not
    /// touch are not re-examined.
    bool creates_dead_space(const Candidate& c) const {
        const CellMask& stamp = table_->at(c.shape_id, c.size_index, c.orientation).stamp;
        ++epoch_;
        std::vector<int> touched;
        for (const RowRun& r : stamp.runs) {
            const int j = c.cj + r.dy;
            if (j < 0 || j >= grid_.height) continue;
            for (int i = std::max(0, c.ci + r.dx0); i <= std::min(grid_.width - 1, c.ci + r.dx1); ++i) {
                const std::size_t idx = static_cast<std::size_t>(grid_.index(i, j));
                if (occ_[idx]) continue;
                mark_[idx] = epoch_;
                touched.push_back(label_[idx]);
            }
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        std::vector<int> stack;
        for (int comp : touched) {
            for (int seed : comps_[static_cast<std::size_t>(comp)].cells) {
                if (mark_[static_cast<std::size_t>(seed)] == epoch_) continue;
                Component part;
                mark_[static_cast<std::size_t>(seed)] = epoch_;
                stack.push_back(seed);
                while (!stack.empty()) {
                    const int idx = stack.back();
                    stack.pop_back();
                    part.cells.push_back(idx);
                    const int i = idx % grid_.width, j = idx / grid_.width;
                    const int nb[4] = {i > 0 ? idx - 1 : -1, i + 1 < grid_.width ? idx + 1 : -1, j > 0 ? idx - grid_.width : -1,
                                       j + 1 < grid_.height ? idx + grid_.width : -1};
                    for (int k : nb) {
                        if (k < 0 || occ_[static_cast<std::size_t>(k)] || mark_[static_cast<std::size_t>(k)] == epoch_) continue;
                        mark_[static_cast<std::size_t>(k)] = epoch_;
                        stack.push_back(k);
                    }
                }
                std::sort(part.cells.begin(), part.cells.end());
                part.area = static_cast<double>(part.cells.size()) * grid_.cell_area();
                if (!salvageable(part, grid_.width, *table_, slack_, &memo_)) return true;
            }
        }
        return false;
    }

    RunningStats running_stats() const {
        RunningStats s;
        s.count = placed_.size();
        s.shape_counts = shape_counts_;
        if (placed_.empty()) return s;
        const double n = static_cast<double>(placed_.size());
        s.mean_size_mm = size_sum_ / n;
        s.centroid_mean = (1.0 / n) * centroid_sum_;
        s.proportion = areas_.pop_stddev();
        if (placed_.size() >= 2) s.emphasis = (max_area_ - rest_.mean) * rest_.pop_stddev();
        return s;
    }

    /// Same statistics recomputed from the placements.
    RunningStats batch_stats() const {
        RunningStats s;
        s.count = placed_.size();
        if (placed_.empty()) return s;
        std::vector<double> areas;
        double sizes = 0.0;
        Point c{};
        for (const PlacedRecord& r : placed_) {
            areas.push_back(r.stone.area);
            sizes += catalog_->size_mm(r.placement.size_index);
            c = c + r.stone.centroid;
            ++s.shape_counts[static_cast<std::size_t>(r.placement.shape_id)];
        }
        const double n = static_cast<double>(placed_.size());
        s.mean_size_mm = sizes / n;
        s.centroid_mean = (1.0 / n) * c;
        s.proportion = pop_stddev(areas);
        if (areas.size() >= 2) s.emphasis = emphasis_from_areas(areas);
        return s;
    }

    /// Objective terms for state ∪ {c}; see rank_candidates.
    RankedCandidate evaluate(const Candidate& c) const {
        const PlacedStone stone = place_stone(*catalog_, c.shape_id, c.size_index, c.pose);
        const double n1 = static_cast<double>(placed_.size() + 1);
        const GenParams& p = params_;

        const Point mean = (1.0 / n1) * (centroid_sum_ + stone.centroid);
        const double balance_v = distance(container_centroid_, mean);

        auto counts = shape_counts_;
        ++counts[static_cast<std::size_t>(c.shape_id)];
        const double hshape = harmony_shape_from_counts(counts);

        double deficit = 0.0;
        for (int s = 0; s < kShapeCount; ++s) {
            double cs = orient_cos_[static_cast<std::size_t>(s)], sn = orient_sin_[static_cast<std::size_t>(s)];
            int cnt = shape_counts_[static_cast<std::size_t>(s)];
            if (s == c.shape_id) {
                const double a = normalize_angle(stone.theta * stone.symmetry_order);
                cs += std::cos(a), sn += std::sin(a), ++cnt;
            }
            deficit += cnt - std::hypot(cs, sn);
        }
        const double one_minus_r = std::clamp(deficit / n1, 0.0, 1.0);
        const double horient = one_minus_r >= 1.0 ? std::sqrt(-2.0 * std::log(std::numeric_limits<double>::min()))
                                                  : std::sqrt(std::max(0.0, -2.0 * std::log1p(-one_minus_r)));

        Welford w = areas_;
        w.add(stone.area);
        const double prop = w.pop_stddev();

        const double uni = placed_.empty() ? 0.0 : candidate_unity(stone);

        RankedCandidate rc;
        rc.candidate = c;
        rc.score = -(p.w_balance * balance_v + p.w_harmony_shape * hshape + p.w_harmony_orientation * horient +
                     p.w_proportion * prop + p.w_unity * uni);
        const double mean_size = placed_.empty() ? catalog_->size_mm(c.size_index) : size_sum_ / static_cast<double>(placed_.size());
        rc.size_gap = std::abs(catalog_->size_mm(c.size_index) - mean_size);
        const Point r = stone.centroid - container_centroid_;
        rc.alignment = norm(r) <= kEps ? 0.0 : std::abs(std::cos(c.pose.theta - std::atan2(r.y, r.x)));
        return rc;
    }

    /// Stamps the candidate and updates every cache. The caller guarantees
    /// the candidate fits.
    void place(const Candidate& c) {
        const int fid = table_->id(c.shape_id, c.size_index, c.orientation);
        PlacedRecord rec{{c.kind_id, c.shape_id, c.size_index, c.pose}, place_stone(*catalog_, c.shape_id, c.size_index, c.pose),
                         fid, c.ci, c.cj};
        // gaps to earlier stones
        std::vector<double> row;
        row.reserve(placed_.size());
        for (const PlacedRecord& other : placed_) row.push_back(boundary_distance(rec.stone.outline, other.stone.outline));
        for (std::size_t k = 0; k < placed_.size(); ++k) gaps_[k].push_back(row[k]);
        row.push_back(0.0);
        gaps_.push_back(std::move(row));

        const CellMask& stamp = (*table_)[fid].stamp;
        for (const RowRun& r : stamp.runs) {
            const int j = c.cj + r.dy;
            if (j < 0 || j >= grid_.height) continue;
            for (int i = std::max(0, c.ci + r.dx0); i <= std::min(grid_.width - 1, c.ci + r.dx1); ++i) {
                auto& cell = occ_[static_cast<std::size_t>(grid_.index(i, j))];
                if (!cell) {
                    cell = 1;
                    --free_cells_;
                }
            }
        }
        rebuild_prefix();

        // running stats
        size_sum_ += catalog_->size_mm(c.size_index);
        ++shape_counts_[static_cast<std::size_t>(c.shape_id)];
        centroid_sum_ = centroid_sum_ + rec.stone.centroid;
        const double a = normalize_angle(rec.stone.theta * rec.stone.symmetry_order);
        orient_cos_[static_cast<std::size_t>(c.shape_id)] += std::cos(a);
        orient_sin_[static_cast<std::size_t>(c.shape_id)] += std::sin(a);
        areas_.add(rec.stone.area);
        if (placed_.empty()) {
            max_area_ = rec.stone.area;
        } else if (rec.stone.area > max_area_) {
            rest_.add(max_area_);
            max_area_ = rec.stone.area;
        } else {
            rest_.add(rec.stone.area);
        }

        placed_.push_back(std::move(rec));
        refresh_neighbor_cache();
        refresh_components();
    }

    std::uint64_t next_random() { return rng_(); }
    bool keep_draw() {
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return u < params_.keep_probability;
    }

    std::vector<Placement> placements() const {
        std::vector<Placement> out;
        for (const PlacedRecord& r : placed_) out.push_back(r.placement);
        return out;
    }

private:
    GenState(Polygon container, const Catalog& catalog, GenParams params, const BitGrid& occupancy)
        : container_(std::move(container)), catalog_(&catalog), params_(std::move(params)) {
        params_.validate();
        table_ = footprint_table(catalog, params_);
        slack_ = params_.slack(catalog);
        container_centroid_ = centroid(container_);
        grid_ = occupancy.spec();
        occ_ = occupancy.raw();
        mark_.assign(grid_.cell_count(), 0);
        free_cells_ = initial_free_ = static_cast<std::size_t>(std::count(occ_.begin(), occ_.end(), 0));
        rebuild_prefix();
        seed_and_refresh();
    }

    void seed_and_refresh() {
        rng_.seed(params_.seed);
        for (int k = 0; k < 3; ++k)
            palette_.push_back(catalog_->kinds()[static_cast<std::size_t>(rng_() % catalog_->kinds().size())].kind_id);
        refresh_components();
    }

    void build_grid() {
        const double h = params_.cell_size;
        const auto box = container_.bounds();
        const Point cc = container_centroid_;
        const int left = static_cast<int>(std::ceil((cc.x - box.min.x) / h)) + 2;
        const int right = static_cast<int>(std::ceil((box.max.x - cc.x) / h)) + 2;
        const int down = static_cast<int>(std::ceil((cc.y - box.min.y) / h)) + 2;
        const int up = static_cast<int>(std::ceil((box.max.y - cc.y) / h)) + 2;
        grid_.width = left + right + 1;
        grid_.height = down + up + 1;
        grid_.cell_size = h;
        grid_.origin = {cc.x - (left + 0.5) * h, cc.y - (down + 0.5) * h};
        occ_.assign(grid_.cell_count(), 1);
        mark_.assign(grid_.cell_count(), 0);
        const double clearance = params_.bezel_margin + 0.5 * std::sqrt(2.0) * h;
        for (int j = 0; j < grid_.height; ++j) {
            for (int i = 0; i < grid_.width; ++i) {
                const Point p = grid_.center(i, j);
                if (p.x < box.min.x || p.x > box.max.x || p.y < box.min.y || p.y > box.max.y) continue;
                if (point_in_polygon(p, container_) && distance_to_boundary(p, container_) >= clearance)
                    occ_[static_cast<std::size_t>(grid_.index(i, j))] = 0;
            }
        }
        free_cells_ = initial_free_ = static_cast<std::size_t>(std::count(occ_.begin(), occ_.end(), 0));
        rebuild_prefix();
    }

    // Exact squared Euclidean distance transform over blocked cells
    // (lower envelope of parabolas, one pass per axis).
    void rebuild_edt() {
        const int w = grid_.width, h = grid_.height;
        static constexpr int kInf = 1 << 28;
        std::vector<int> tmp(grid_.cell_count());
        auto pass = [](const std::vector<int>& f, std::vector<int>& d) {
            const int n = static_cast<int>(f.size());
            std::vector<int> v(static_cast<std::size_t>(n));
            std::vector<double> z(static_cast<std::size_t>(n) + 1);
            int k = 0;
            v[0] = 0;
            z[0] = -1e300;
            z[1] = 1e300;
            auto meet = [&](int q, int r) {
                return ((f[static_cast<std::size_t>(q)] + q * q) - (f[static_cast<std::size_t>(r)] + r * r)) / (2.0 * (q - r));
            };
            for (int q = 1; q < n; ++q) {
                double sp = meet(q, v[static_cast<std::size_t>(k)]);
                while (sp <= z[static_cast<std::size_t>(k)]) sp = meet(q, v[static_cast<std::size_t>(--k)]);
                ++k;
                v[static_cast<std::size_t>(k)] = q;
                z[static_cast<std::size_t>(k)] = sp;
                z[static_cast<std::size_t>(k) + 1] = 1e300;
            }
            k = 0;
            for (int q = 0; q < n; ++q) {
                while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
                const int r = v[static_cast<std::size_t>(k)];
                d[static_cast<std::size_t>(q)] = std::min(kInf, (q - r) * (q - r) + f[static_cast<std::size_t>(r)]);
            }
        };
        std::vector<int> f(static_cast<std::size_t>(h)), d(static_cast<std::size_t>(h));
        for (int i = 0; i < w; ++i) {
            for (int j = 0; j < h; ++j) f[static_cast<std::size_t>(j)] = occ_[static_cast<std::size_t>(grid_.index(i, j))] ? 0 : kInf;
            pass(f, d);
            for (int j = 0; j < h; ++j) tmp[static_cast<std::size_t>(grid_.index(i, j))] = d[static_cast<std::size_t>(j)];
        }
        edt_.assign(grid_.cell_count(), 0);
        f.resize(static_cast<std::size_t>(w));
        d.resize(static_cast<std::size_t>(w));
        for (int j = 0; j < h; ++j) {
            for (int i = 0; i < w; ++i) f[static_cast<std::size_t>(i)] = tmp[static_cast<std::size_t>(grid_.index(i, j))];
            pass(f, d);
            for (int i = 0; i < w; ++i) edt_[static_cast<std::size_t>(grid_.index(i, j))] = d[static_cast<std::size_t>(i)];
        }
    }

    void rebuild_prefix() {
        const int stride = grid_.width + 1;
        prefix_.assign(static_cast<std::size_t>(stride * grid_.height), 0);
        for (int j = 0; j < grid_.height; ++j)
            for (int i = 0; i < grid_.width; ++i)
                prefix_[static_cast<std::size_t>(j * stride + i + 1)] =
                    prefix_[static_cast<std::size_t>(j * stride + i)] + occ_[static_cast<std::size_t>(grid_.index(i, j))];
        rebuild_edt();
    }

    void refresh_components() {
        comps_ = free_components(occupancy());
        label_.assign(grid_.cell_count(), -1);
        comp_ok_.clear();
        for (std::size_t k = 0; k < comps_.size(); ++k) {
            for (int idx : comps_[k].cells) label_[static_cast<std::size_t>(idx)] = static_cast<int>(k);
            comp_ok_.push_back(salvageable(comps_[k], grid_.width, *table_, slack_, &memo_));
        }
    }

    void refresh_neighbor_cache() {
        const std::size_t n = placed_.size();
        const double thr = params_.neighbor_threshold();
        thr_sum_.assign(n, 0.0);
        thr_cnt_.assign(n, 0);
        nearest_.assign(n, std::numeric_limits<double>::infinity());
        nearest_idx_.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double g = gaps_[i][j];
                if (g <= thr) thr_sum_[i] += g, ++thr_cnt_[i];
                if (g < nearest_[i]) nearest_[i] = g, nearest_idx_[i] = j;
            }
        }
    }

    // Unity of state ∪ {stone}. Exact gaps are computed only where they can
    // change the adjacency; other pairs are bounded below by circumcircles.
    double candidate_unity(const PlacedStone& stone) const {
        const std::size_t n = placed_.size();
        const double thr = params_.neighbor_threshold();
        const double rc = circumradius(stone);
        std::vector<double> lb(n), gap(n, std::numeric_limits<double>::infinity());
        std::vector<bool> exact(n, false);
        auto exact_gap = [&](std::size_t j) {
            if (!exact[j]) {
                gap[j] = boundary_distance(stone.outline, placed_[j].stone.outline);
                exact[j] = true;
            }
            return gap[j];
        };
        bool c_has_thr = false;
        for (std::size_t j = 0; j < n; ++j) {
            lb[j] = distance(stone.centroid, placed_[j].stone.centroid) - rc - radius_of(j);
            if (lb[j] <= thr && exact_gap(j) <= thr) c_has_thr = true;
        }
        // c's own nearest stone when it has no threshold neighbor
        std::size_t c_nearest = 0;
        if (!c_has_thr) {
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lb[a] < lb[b] || (lb[a] == lb[b] && a < b); });
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j : order) {
                if (lb[j] > best) break;
                const double g = exact_gap(j);
                if (g < best || (g == best && j < c_nearest)) best = g, c_nearest = j;
            }
        }
        std::vector<double> sum(n + 1, 0.0);
        std::vector<int> cnt(n + 1, 0);
        for (std::size_t j = 0; j < n; ++j) sum[j] = thr_sum_[j], cnt[j] = thr_cnt_[j];
        for (std::size_t j = 0; j < n; ++j) {
            if (exact[j] && gap[j] <= thr) {
                sum[j] += gap[j], ++cnt[j];
                sum[n] += gap[j], ++cnt[n];
            }
        }
        // fallback edges for stones still isolated
        std::vector<std::pair<std::size_t, std::size_t>> fallback;
        for (std::size_t j = 0; j < n; ++j) {
            if (cnt[j] > 0) continue;
            std::size_t best = nearest_idx_[j];
            double bg = nearest_[j];
            if (lb[j] <= bg) {
                const double g = exact_gap(j);
                if (g < bg) best = n, bg = g;
            }
            fallback.emplace_back(std::min(j, best), std::max(j, best));
        }
        if (cnt[n] == 0) fallback.emplace_back(c_nearest, n);
        std::sort(fallback.begin(), fallback.end());
        fallback.erase(std::unique(fallback.begin(), fallback.end()), fallback.end());
        for (const auto& [a, b] : fallback) {
            const double g = b == n ? gap[a] : gaps_[a][b];
            sum[a] += g, ++cnt[a];
            sum[b] += g, ++cnt[b];
        }
        std::vector<double> means(n + 1);
        for (std::size_t k = 0; k <= n; ++k) means[k] = sum[k] / cnt[k];
        return pop_stddev(means);
    }

    static double circumradius(const PlacedStone& s) {
        double r = 0.0;
        for (const Point& p : s.outline.vertices()) r = std::max(r, distance(p, s.centroid));
        return r;
    }
    double radius_of(std::size_t j) const { return (*table_)[placed_[j].footprint].radius + 1e-9; }

    Polygon container_;
    const Catalog* catalog_;
    GenParams params_;
    std::shared_ptr<const FootprintTable> table_;
    double slack_ = 0.0;
    Point container_centroid_;
    GridSpec grid_;
    std::vector<std::uint8_t> occ_;
    std::vector<int> prefix_;
    std::vector<int> edt_;
    std::size_t free_cells_ = 0;
    std::size_t initial_free_ = 0;

    std::vector<Component> comps_;
    std::vector<int> label_;
    std::vector<bool> comp_ok_;
    mutable std::vector<std::uint32_t> mark_;
    mutable std::uint32_t epoch_ = 0;
    mutable SalvageMemo memo_;

    std::vector<PlacedRecord> placed_;
    std::vector<std::vector<double>> gaps_;
    std::vector<double> thr_sum_;
    std::vector<int> thr_cnt_;
    std::vector<double> nearest_;
    std::vector<std::size_t> nearest_idx_;

    double size_sum_ = 0.0;
    std::array<int, kShapeCount> shape_counts_{};
    Point centroid_sum_;
    std::array<double, kShapeCount> orient_cos_{};
    std::array<double, kShapeCount> orient_sin_{};
    Welford areas_;
    Welford rest_;
    double max_area_ = 0.0;

    std::mt19937_64 rng_;
    std::vector<int> palette_;
};

// ---------------------------------------------------------------------------
// Steps

/// Keeps the candidates whose placement creates no new unfillable pocket.
inline std::vector<Candidate> filter_candidates(const GenState& state, std::span<const Candidate> proposals) {
    std::vector<Candidate> out;
    for (const Candidate& c : proposals)
        if (!state.creates_dead_space(c)) out.push_back(c);
    return out;
}

/// Best first: objective score, then size closeness to the placed mean,
/// then radial alignment, then (shape, size, orientation, kind, cell).
inline std::vector<RankedCandidate> rank_candidates(const GenState& state, std::span<const Candidate> cands) {
    if (cands.empty()) throw PreconditionError("rank_candidates: empty candidate list");
    std::vector<RankedCandidate> ranked;
    ranked.reserve(cands.size());
    for (const Candidate& c : cands) ranked.push_back(state.evaluate(c));
    auto key = [](const RankedCandidate& r) {
        const Candidate& c = r.candidate;
        return std::make_tuple(-std::llround(r.score * 1e9), std::llround(r.size_gap * 1e9), -std::llround(r.alignment * 1e12),
                               c.shape_id, c.size_index, c.orientation, c.kind_id, c.cj, c.ci);
    };
    std::sort(ranked.begin(), ranked.end(), [&](const RankedCandidate& a, const RankedCandidate& b) { return key(a) < key(b); });
    return ranked;
}

namespace detail {

// Unit direction pointing from nearby blocked cells into free space at (i, j).
inline Point free_normal(const GenState& s, int i, int j, Point fallback_from) {
    Point n{};
    for (int dj = -2; dj <= 2; ++dj)
        for (int di = -2; di <= 2; ++di)
            if ((di || dj) && s.blocked(i + di, j + dj)) n = n - Point{static_cast<double>(di), static_cast<double>(dj)};
    if (norm(n) < 1e-9) n = s.grid().center(i, j) - fallback_from;
    if (norm(n) < 1e-9) n = {1.0, 0.0};
    return (1.0 / norm(n)) * n;
}

inline bool is_boundary_cell(const GenState& s, int i, int j) {
    return !s.blocked(i, j) && (s.blocked(i - 1, j) || s.blocked(i + 1, j) || s.blocked(i, j - 1) || s.blocked(i, j + 1));
}

// Boundary cells of components that can still take a stone.
inline bool is_anchor_cell(const GenState& s, int i, int j) {
    if (!is_boundary_cell(s, i, j)) return false;
    const int comp = s.component_of(i, j);
    return s.component_salvageable()[static_cast<std::size_t>(comp)] &&
           s.components()[static_cast<std::size_t>(comp)].area >= s.slack_area();
}

// Candidates touching the free-space boundary at the given anchors: for every
// (shape, orientation) the stone is pushed off the anchor along the local
// normal; one size per (anchor, shape, orientation) is kept, the feasible
// size closest to the placed mean (larger on ties).
inline std::vector<Candidate> anchored_candidates(const GenState& s, const std::vector<int>& anchors) {
    const FootprintTable& t = s.table();
    const GridSpec& g = s.grid();
    const RunningStats st = s.running_stats();
    const Point cluster = st.count ? st.centroid_mean : s.container_centroid();
    // sizes by closeness to the placed mean, larger first on ties
    std::vector<int> size_order(static_cast<std::size_t>(t.sizes()));
    std::iota(size_order.begin(), size_order.end(), 0);
    std::stable_sort(size_order.begin(), size_order.end(), [&](int a, int b) {
        const double ga = st.count ? std::abs(s.catalog().size_mm(a) - st.mean_size_mm) : -a;
        const double gb = st.count ? std::abs(s.catalog().size_mm(b) - st.mean_size_mm) : -b;
        return ga < gb || (ga == gb && a > b);
    });
    std::vector<Candidate> out;
    std::set<std::tuple<int, int, int>> seen;
    for (int a : anchors) {
        const int ai = a % g.width, aj = a / g.width;
        const Point raw = free_normal(s, ai, aj, cluster);
        const int dir = static_cast<int>(std::lround(std::atan2(raw.y, raw.x) / kTwoPi * 64.0 + 64.0)) % 64;
        const Point n{std::cos(kTwoPi * dir / 64), std::sin(kTwoPi * dir / 64)};
        const std::size_t back = static_cast<std::size_t>((dir + 32) % 64);
        const Point ac = g.center(ai, aj);
        for (int shape = 0; shape < t.shapes(); ++shape) {
            for (int o = 0; o < t.orientations(); ++o) {
                if (t.canonical_orientation(shape, o) != o) continue;
                std::optional<Candidate> best;
                for (int z : size_order) {
                    const int fid = t.id(shape, z, o);
                    const Footprint& f = t[fid];
                    if (static_cast<std::size_t>(f.cover.cells) > s.free_cells()) continue;
                    const double support = f.support[back];
                    for (int shift = 0; shift < 3 && !best; ++shift) {
                        const Point c = ac + (support + shift * g.cell_size) * n;
                        const int ci = static_cast<int>(std::lround((c.x - g.origin.x) / g.cell_size - 0.5));
                        const int cj = static_cast<int>(std::lround((c.y - g.origin.y) / g.cell_size - 0.5));
                        if (s.clearance2(ci, cj) >= f.inner2 && s.fits(fid, ci, cj)) best = s.make_candidate(shape, z, o, ci, cj);
                    }
                    if (best) break;
                }
                if (best && seen.emplace(t.id(best->shape_id, best->size_index, best->orientation), best->ci, best->cj).second)
                    out.push_back(*best);
            }
        }
    }
    return out;
}

inline std::vector<int> boundary_anchors(const GenState& s, int stride) {
    const GridSpec& g = s.grid();
    std::vector<int> out;
    std::set<std::pair<int, int>> blocks;
    for (int j = 0; j < g.height; ++j)
        for (int i = 0; i < g.width; ++i)
            if (is_anchor_cell(s, i, j) && blocks.emplace(i / stride, j / stride).second) out.push_back(g.index(i, j));
    return out;
}

// Every fitting placement inside salvageable components, one per footprint.
inline std::vector<Candidate> witness_candidates(const GenState& s) {
    std::vector<Candidate> out;
    const int w = s.grid().width;
    for (std::size_t k = 0; k < s.components().size(); ++k) {
        const Component& comp = s.components()[k];
        if (comp.area < s.slack_area() || !s.component_salvageable()[k]) continue;
        int i0 = 0, j0 = 0;
        const CellPatch patch = make_patch(comp.cells, w, &i0, &j0);
        for (const FitWitness& fw : patch_fits(patch, s.table(), std::numeric_limits<std::size_t>::max(), true)) {
            const Footprint& f = s.table()[fw.footprint];
            out.push_back(s.make_candidate(f.shape_id, f.size_index, f.orientation, i0 + fw.ci, j0 + fw.cj));
        }
    }
    return out;
}

inline std::optional<Candidate> first_passing(const GenState& s, const std::vector<Candidate>& cands) {
    if (cands.empty()) return std::nullopt;
    for (const RankedCandidate& r : rank_candidates(s, cands))
        if (!s.creates_dead_space(r.candidate)) return r.candidate;
    return std::nullopt;
}

// First stone: the largest size that fits and passes the filter, at the cell
// nearest the container centroid; (shape, orientation) poses are subsampled.
inline std::optional<Candidate> first_stone(GenState& s) {
    const FootprintTable& t = s.table();
    const GridSpec& g = s.grid();
    std::vector<std::pair<int, int>> poses;
    for (int shape = 0; shape < t.shapes(); ++shape)
        for (int o = 0; o < t.orientations(); ++o)
            if (t.canonical_orientation(shape, o) == o && s.keep_draw()) poses.emplace_back(shape, o);
    if (poses.empty())
        for (int shape = 0; shape < t.shapes(); ++shape)
            for (int o = 0; o < t.orientations(); ++o)
                if (t.canonical_orientation(shape, o) == o) poses.emplace_back(shape, o);

    std::vector<std::pair<double, int>> cells;
    const Point cc = s.container_centroid();
    for (int j = 0; j < g.height; ++j)
        for (int i = 0; i < g.width; ++i)
            if (!s.blocked(i, j)) cells.emplace_back(distance(g.center(i, j), cc), g.index(i, j));
    std::sort(cells.begin(), cells.end());

    for (int z = t.sizes() - 1; z >= 0; --z) {
        std::vector<Candidate> at_best;
        double best_d = std::numeric_limits<double>::infinity();
        for (const auto& [shape, o] : poses) {
            const int fid = t.id(shape, z, o);
            if (static_cast<std::size_t>(t[fid].cover.cells) > s.free_cells()) continue;
            for (const auto& [d, idx] : cells) {
                if (d > best_d + 1e-12) break;
                if (!s.fits(fid, idx % g.width, idx / g.width)) continue;
                if (d < best_d - 1e-12) at_best.clear(), best_d = d;
                at_best.push_back(s.make_candidate(shape, z, o, idx % g.width, idx / g.width));
                break;
            }
        }
        if (auto c = first_passing(s, at_best)) return c;
    }
    return std::nullopt;
}

}  // namespace detail

struct StepResult {
    bool placed = false;
    StopReason reason = StopReason::None;
    bool relaxed = false;  // placed although every candidate created dead space
};

/// One greedy step: propose, filter, rank, place. Proposal widens from the
/// budgeted anchors to every boundary cell to exhaustive fit witnesses; if
/// every feasible candidate leaves dead space the best-ranked one is placed
/// anyway, so Done implies that no stone fits anywhere.
inline StepResult place_next(GenState& s) {
    const GenParams& p = s.params();
    if (static_cast<int>(s.placed().size()) >= p.max_stones) return {false, StopReason::MaxStones};
    if (!s.placed().empty() && s.free_fraction() < p.stop_free_fraction) return {false, StopReason::FreeFraction};

    if (s.placed().empty()) {
        if (auto c = detail::first_stone(s)) {
            s.place(*c);
            return {true, StopReason::None};
        }
    } else {
        // Tier 1: budgeted, subsampled anchors nearest the cluster.
        const Point cluster = s.running_stats().centroid_mean;
        const GridSpec& g = s.grid();
        auto by_cluster = [&](std::vector<int>& v) {
            std::stable_sort(v.begin(), v.end(), [&](int a, int b) {
                return distance(g.center(a % g.width, a / g.width), cluster) < distance(g.center(b % g.width, b / g.width), cluster);
            });
        };
        std::vector<int> kept;
        for (int a : detail::boundary_anchors(s, p.anchor_stride))
            if (s.keep_draw()) kept.push_back(a);
        by_cluster(kept);
        const std::size_t limit = static_cast<std::size_t>(std::max(1, p.pose_budget / s.table().orientations()));
        if (kept.size() > limit) kept.resize(limit);
        std::vector<Candidate> fallback = detail::anchored_candidates(s, kept);
        if (auto c = detail::first_passing(s, fallback)) {
            s.place(*c);
            return {true, StopReason::None};
        }
        // Tier 2: every boundary cell, in budget-sized batches outward from the cluster.
        std::vector<int> all = detail::boundary_anchors(s, 1);
        const std::set<int> tried(kept.begin(), kept.end());
        std::erase_if(all, [&](int a) { return tried.count(a) > 0; });
        by_cluster(all);
        for (std::size_t from = 0; from < all.size(); from += limit) {
            const std::vector<int> batch(all.begin() + static_cast<std::ptrdiff_t>(from),
                                         all.begin() + static_cast<std::ptrdiff_t>(std::min(all.size(), from + limit)));
            std::vector<Candidate> cands = detail::anchored_candidates(s, batch);
            if (auto c = detail::first_passing(s, cands)) {
                s.place(*c);
                return {true, StopReason::None};
            }
            if (fallback.empty()) fallback = std::move(cands);
        }
        // Tier 3: exhaustive fit witnesses.
        std::vector<Candidate> witnesses = detail::witness_candidates(s);
        if (auto c = detail::first_passing(s, witnesses)) {
            s.place(*c);
            return {true, StopReason::None};
        }
        if (fallback.empty()) fallback = std::move(witnesses);
        if (!fallback.empty()) {
            s.place(rank_candidates(s, fallback).front().candidate);
            return {true, StopReason::None, true};
        }
    }
    return {false, StopReason::NoFeasibleCandidate};
}

struct GenerationReport {
    StopReason reason = StopReason::None;
    int relaxed_steps = 0;
};

/// Runs place_next until Done. Throws ContainerTooSmall or GenerationFailed
/// (carrying the partial design) when fewer than min_stones fit.
inline Design generate(const ContainerSpec& container, const Catalog& catalog, const GenParams& params,
                       const std::string& design_id = {}, const std::function<void(const GenState&)>& on_step = {},
                       GenerationReport* report = nullptr) {
    params.validate();
    const Polygon outline = container.outline();
    if (area(outline) < catalog.smallest_stone_area())
        throw ContainerTooSmall("container too small: area below the smallest stone");
    GenState state(outline, catalog, params);
    StepResult step;
    int relaxed = 0;
    while ((step = place_next(state)).placed) {
        relaxed += step.relaxed ? 1 : 0;
        if (on_step) on_step(state);
    }
    if (report) *report = {step.reason, relaxed};

    Design d;
    d.design_id = design_id.empty() ? "d-" + std::to_string(params.seed) : design_id;
    d.seed = params.seed;
    d.container_spec = container;
    d.container = outline;
    d.placements = state.placements();
    d.params_fingerprint = params.fingerprint();
    if (static_cast<int>(d.placements.size()) < params.min_stones)
        throw GenerationFailed("generation failed: placed " + std::to_string(d.placements.size()) + " stones, min_stones is " +
                                   std::to_string(params.min_stones),
                               std::move(d));
    return d;
}

}  // namespace gemset
