#pragma once

// Polygon and occupancy-grid primitives. All lengths are millimeters, all
// angles radians. Polygons are simple and counter-clockwise; no robust
// predicates, comparisons use kEps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gemset/error.hpp"

namespace gemset {

inline constexpr double kEps = 1e-9;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
    friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
    friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Point a, Point b) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) { return norm(a - b); }

/// Wraps any angle into [0, 2π).
inline double normalize_angle(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    if (t >= kTwoPi) t = 0.0;
    return t;
}

/// Placement of a shape: rotation by `theta` about the shape origin, then
/// translation by (x, y). `theta` is kept in [0, 2π).
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    Pose() = default;
    Pose(double x_mm, double y_mm, double theta_rad)
        : x(x_mm), y(y_mm), theta(normalize_angle(theta_rad)) {}
};

inline double signed_area(std::span<const Point> pts) {
    const std::size_t n = pts.size();
    if (n < 3) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) s += cross(pts[j], pts[i]);
    return 0.5 * s;
}

inline double point_segment_distance(Point p, Point a, Point b) {
    const Point ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 <= 0.0) return distance(p, a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return distance(p, a + t * ab);
}

/// True when segments ab and cd cross at a single interior point of both.
inline bool segments_cross_properly(Point a, Point b, Point c, Point d) {
    const double d1 = cross(b - a, c - a);
    const double d2 = cross(b - a, d - a);
    const double d3 = cross(d - c, a - c);
    const double d4 = cross(d - c, b - c);
    return ((d1 > kEps && d2 < -kEps) || (d1 < -kEps && d2 > kEps)) &&
           ((d3 > kEps && d4 < -kEps) || (d3 < -kEps && d4 > kEps));
}

inline bool segments_intersect(Point a, Point b, Point c, Point d) {
    if (segments_cross_properly(a, b, c, d)) return true;
    return point_segment_distance(a, c, d) <= kEps || point_segment_distance(b, c, d) <= kEps ||
           point_segment_distance(c, a, b) <= kEps || point_segment_distance(d, a, b) <= kEps;
}

class Polygon;
Polygon transform(const Polygon& p, const Pose& pose, double scale);

/// Simple, counter-clockwise polygon with at least three vertices.
class Polygon {
public:
    /// Validates the ring; throws GeometryError when it has fewer than three
    /// vertices, non-positive signed area, or self-intersections.
    explicit Polygon(std::vector<Point> vertices) : v_(std::move(vertices)) { validate(); }

    const std::vector<Point>& vertices() const noexcept { return v_; }
    std::size_t size() const noexcept { return v_.size(); }
    const Point& operator[](std::size_t i) const { return v_[i]; }

    struct Box {
        Point min;
        Point max;
    };
    Box bounds() const {
        Box b{v_.front(), v_.front()};
        for (const Point& p : v_) {
            b.min.x = std::min(b.min.x, p.x);
            b.min.y = std::min(b.min.y, p.y);
            b.max.x = std::max(b.max.x, p.x);
            b.max.y = std::max(b.max.y, p.y);
        }
        return b;
    }

    double perimeter() const {
        double s = 0.0;
        for (std::size_t i = 0, j = v_.size() - 1; i < v_.size(); j = i++) s += distance(v_[j], v_[i]);
        return s;
    }

    double max_diameter() const {
        double d = 0.0;
        for (std::size_t i = 0; i < v_.size(); ++i)
            for (std::size_t j = i + 1; j < v_.size(); ++j) d = std::max(d, distance(v_[i], v_[j]));
        return d;
    }

    bool is_convex() const {
        const std::size_t n = v_.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point& a = v_[i];
            const Point& b = v_[(i + 1) % n];
            const Point& c = v_[(i + 2) % n];
            if (cross(b - a, c - b) < -kEps) return false;
        }
        return true;
    }

private:
    struct Trusted {};
    Polygon(std::vector<Point> vertices, Trusted) : v_(std::move(vertices)) {}
    friend Polygon transform(const Polygon& p, const Pose& pose, double scale);
    friend std::vector<Polygon> triangulate(const Polygon& p);

    void validate() const {
        const std::size_t n = v_.size();
        if (n < 3) throw GeometryError("invalid geometry: polygon needs at least 3 vertices");
        for (const Point& p : v_)
            if (!std::isfinite(p.x) || !std::isfinite(p.y))
                throw GeometryError("invalid geometry: non-finite vertex");
        const double a = signed_area(v_);
        if (std::abs(a) <= 1e-12) throw GeometryError("invalid geometry: degenerate (zero-area) polygon");
        if (a < 0.0) throw GeometryError("invalid geometry: polygon is clockwise");
        for (std::size_t i = 0; i < n; ++i) {
            const Point& a0 = v_[i];
            const Point& a1 = v_[(i + 1) % n];
            if (distance(a0, a1) <= kEps) throw GeometryError("invalid geometry: repeated vertex");
            for (std::size_t j = i + 1; j < n; ++j) {
                if (j == i + 1 || (i == 0 && j == n - 1)) continue;
                if (segments_intersect(a0, a1, v_[j], v_[(j + 1) % n]))
                    throw GeometryError("invalid geometry: polygon self-intersects");
            }
        }
    }

    std::vector<Point> v_;
};

inline double area(const Polygon& p) { return signed_area(p.vertices()); }

/// Area-weighted centroid.
inline Point centroid(const Polygon& p) {
    const auto& v = p.vertices();
    const double a = area(p);
    if (a <= 1e-12) throw GeometryError("invalid geometry: zero-area polygon has no centroid");
    // Shift to the first vertex to keep the products small.
    const Point o = v.front();
    double cx = 0.0;
    double cy = 0.0;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        const Point p0 = v[j] - o;
        const Point p1 = v[i] - o;
        const double c = cross(p0, p1);
        cx += (p0.x + p1.x) * c;
        cy += (p0.y + p1.y) * c;
    }
    return {o.x + cx / (6.0 * a), o.y + cy / (6.0 * a)};
}

/// Scales about the shape origin, rotates by pose.theta, translates by (x, y).
inline Polygon transform(const Polygon& p, const Pose& pose, double scale) {
    if (!(scale > 0.0)) throw PreconditionError("transform: scale must be > 0");
    const double c = std::cos(pose.theta);
    const double s = std::sin(pose.theta);
    std::vector<Point> out;
    out.reserve(p.size());
    for (const Point& q : p.vertices()) {
        const double x = scale * q.x;
        const double y = scale * q.y;
        out.push_back({c * x - s * y + pose.x, s * x + c * y + pose.y});
    }
    return Polygon(std::move(out), Polygon::Trusted{});
}

/// Ray casting; points within kEps of the boundary count as inside.
inline bool point_in_polygon(Point pt, const Polygon& poly) {
    const auto& v = poly.vertices();
    bool inside = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        const Point& a = v[j];
        const Point& b = v[i];
        if (point_segment_distance(pt, a, b) <= kEps) return true;
        if ((b.y > pt.y) != (a.y > pt.y)) {
            const double x = a.x + (pt.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (pt.x < x) inside = !inside;
        }
    }
    return inside;
}

inline double distance_to_boundary(Point pt, const Polygon& poly) {
    const auto& v = poly.vertices();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++)
        best = std::min(best, point_segment_distance(pt, v[j], v[i]));
    return best;
}

namespace detail {

// Sutherland-Hodgman: clips `subject` by the convex CCW ring `clip`. The
// subject may be non-convex; the result may then contain zero-width bridges,
// which do not change its shoelace area.
inline std::vector<Point> clip_convex(std::vector<Point> subject, std::span<const Point> clip) {
    const std::size_t m = clip.size();
    for (std::size_t e = 0; e < m && !subject.empty(); ++e) {
        const Point a = clip[e];
        const Point b = clip[(e + 1) % m];
        const Point ab = b - a;
        std::vector<Point> out;
        out.reserve(subject.size() + 4);
        for (std::size_t i = 0; i < subject.size(); ++i) {
            const Point p = subject[i];
            const Point q = subject[(i + 1) % subject.size()];
            const double sp = cross(ab, p - a);
            const double sq = cross(ab, q - a);
            if (sp >= 0.0) out.push_back(p);
            if ((sp >= 0.0) != (sq >= 0.0)) {
                const double t = sp / (sp - sq);
                out.push_back(p + t * (q - p));
            }
        }
        subject = std::move(out);
    }
    return subject;
}

}  // namespace detail

/// Ear-clipping triangulation into CCW triangles.
inline std::vector<Polygon> triangulate(const Polygon& p) {
    std::vector<Point> ring = p.vertices();
    std::vector<Polygon> tris;
    auto is_ear = [&](std::size_t i) {
        const std::size_t n = ring.size();
        const Point a = ring[(i + n - 1) % n];
        const Point b = ring[i];
        const Point c = ring[(i + 1) % n];
        if (cross(b - a, c - b) <= kEps) return false;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i || k == (i + 1) % n || k == (i + n - 1) % n) continue;
            const Point q = ring[k];
            if (cross(b - a, q - a) >= -kEps && cross(c - b, q - b) >= -kEps && cross(a - c, q - c) >= -kEps)
                return false;
        }
        return true;
    };
    while (ring.size() > 3) {
        bool clipped = false;
        for (std::size_t i = 0; i < ring.size(); ++i) {
            if (!is_ear(i)) continue;
            const std::size_t n = ring.size();
            tris.push_back(Polygon({ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]}, Polygon::Trusted{}));
            ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
            clipped = true;
            break;
        }
        if (!clipped) {
            // Only collinear runs remain; drop the flattest vertex.
            std::size_t worst = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < ring.size(); ++i) {
                const std::size_t n = ring.size();
                const double c = std::abs(cross(ring[i] - ring[(i + n - 1) % n], ring[(i + 1) % n] - ring[i]));
                if (c < best) best = c, worst = i;
            }
            ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(worst));
        }
    }
    if (signed_area(ring) > 1e-15) tris.push_back(Polygon(std::move(ring), Polygon::Trusted{}));
    return tris;
}

/// Area of the intersection of two polygons.
inline double overlap_area(const Polygon& a, const Polygon& b) {
    const auto ba = a.bounds();
    const auto bb = b.bounds();
    if (ba.max.x < bb.min.x || bb.max.x < ba.min.x || ba.max.y < bb.min.y || bb.max.y < ba.min.y) return 0.0;
    if (b.is_convex()) return std::max(0.0, signed_area(detail::clip_convex(a.vertices(), b.vertices())));
    if (a.is_convex()) return std::max(0.0, signed_area(detail::clip_convex(b.vertices(), a.vertices())));
    double s = 0.0;
    for (const Polygon& t : triangulate(b)) s += std::max(0.0, signed_area(detail::clip_convex(a.vertices(), t.vertices())));
    return s;
}

/// Minimum distance between the boundaries of two polygons, without checking
/// whether their interiors overlap.
inline double boundary_distance(const Polygon& a, const Polygon& b) {
    const auto& va = a.vertices();
    const auto& vb = b.vertices();
    auto circle = [](const std::vector<Point>& v) {
        Point c{};
        for (const Point& p : v) c = c + p;
        c = (1.0 / static_cast<double>(v.size())) * c;
        double r = 0.0;
        for (const Point& p : v) r = std::max(r, distance(p, c));
        return std::pair{c, r};
    };
    double best = std::numeric_limits<double>::infinity();
    auto sweep = [&best](const std::vector<Point>& from, const std::vector<Point>& to, Point to_c, double to_r) {
        std::vector<std::pair<double, std::size_t>> order;
        order.reserve(from.size());
        for (std::size_t i = 0; i < from.size(); ++i) order.emplace_back(distance(from[i], to_c) - to_r, i);
        std::sort(order.begin(), order.end());
        for (const auto& [lb, i] : order) {
            if (lb >= best) break;
            const Point p = from[i];
            for (std::size_t k = 0, j = to.size() - 1; k < to.size(); j = k++) {
                const Point mid = 0.5 * (to[j] + to[k]);
                if (distance(p, mid) - 0.5 * distance(to[j], to[k]) >= best) continue;
                best = std::min(best, point_segment_distance(p, to[j], to[k]));
            }
        }
    };
    const auto [ca, ra] = circle(va);
    const auto [cb, rb] = circle(vb);
    sweep(va, vb, cb, rb);
    sweep(vb, va, ca, ra);
    return best;
}

/// Minimum boundary-to-boundary distance of two interior-disjoint polygons.
inline double min_gap(const Polygon& a, const Polygon& b) {
    if (overlap_area(a, b) > 1e-9) throw PreconditionError("min_gap: polygons overlap");
    return boundary_distance(a, b);
}

/// True iff every point of `p` lies in `container` with clearance ≥ margin.
inline bool contains(const Polygon& container, const Polygon& p, double margin) {
    if (margin < 0.0) throw PreconditionError("contains: margin must be >= 0");
    for (const Point& q : p.vertices())
        if (!point_in_polygon(q, container)) return false;
    const auto& vc = container.vertices();
    const auto& vp = p.vertices();
    for (std::size_t i = 0, j = vp.size() - 1; i < vp.size(); j = i++)
        for (std::size_t k = 0, l = vc.size() - 1; k < vc.size(); l = k++)
            if (segments_cross_properly(vp[j], vp[i], vc[l], vc[k])) return false;
    for (const Point& q : vc)
        if (point_in_polygon(q, p) && distance_to_boundary(q, p) > kEps) return false;
    if (margin > 0.0 && boundary_distance(p, container) < margin - kEps) return false;
    return true;
}

/// Axis-aligned lattice: cell (i, j) has its center at
/// origin + ((i + 0.5)·cell_size, (j + 0.5)·cell_size).
struct GridSpec {
    int width = 0;
    int height = 0;
    double cell_size = 1.0;
    Point origin{};

    std::size_t cell_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    int index(int i, int j) const { return j * width + i; }
    Point center(int i, int j) const {
        return {origin.x + (i + 0.5) * cell_size, origin.y + (j + 0.5) * cell_size};
    }
    double cell_area() const { return cell_size * cell_size; }
};

/// Occupancy grid; `true` marks an occupied cell.
class BitGrid {
public:
    explicit BitGrid(GridSpec spec) : spec_(spec) {
        if (spec.width <= 0 || spec.height <= 0) throw PreconditionError("BitGrid: width*height must be > 0");
        if (!(spec.cell_size > 0.0)) throw PreconditionError("BitGrid: cell_size must be > 0");
        bits_.assign(spec.cell_count(), 0);
    }

    const GridSpec& spec() const noexcept { return spec_; }
    int width() const noexcept { return spec_.width; }
    int height() const noexcept { return spec_.height; }

    bool get(int i, int j) const { return bits_[static_cast<std::size_t>(spec_.index(i, j))] != 0; }
    bool get(std::size_t idx) const { return bits_[idx] != 0; }
    void set(int i, int j, bool v = true) { bits_[static_cast<std::size_t>(spec_.index(i, j))] = v ? 1 : 0; }
    void set(std::size_t idx, bool v = true) { bits_[idx] = v ? 1 : 0; }

    std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }
    const std::vector<std::uint8_t>& raw() const noexcept { return bits_; }

    friend bool operator==(const BitGrid& a, const BitGrid& b) { return a.bits_ == b.bits_; }

private:
    GridSpec spec_;
    std::vector<std::uint8_t> bits_;
};

/// Sets exactly the cells whose center lies inside `p` (boundary inclusive).
inline BitGrid rasterize(const Polygon& p, const GridSpec& spec) {
    BitGrid g(spec);
    const auto box = p.bounds();
    const double h = spec.cell_size;
    const int i0 = std::max(0, static_cast<int>(std::floor((box.min.x - spec.origin.x) / h - 0.5)));
    const int i1 = std::min(spec.width - 1, static_cast<int>(std::ceil((box.max.x - spec.origin.x) / h - 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::floor((box.min.y - spec.origin.y) / h - 0.5)));
    const int j1 = std::min(spec.height - 1, static_cast<int>(std::ceil((box.max.y - spec.origin.y) / h - 0.5)));
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i)
            if (point_in_polygon(spec.center(i, j), p)) g.set(i, j);
    return g;
}

/// Maximal 4-connected set of free cells.
struct Component {
    std::vector<int> cells;  // ascending cell indices
    double area = 0.0;       // cells × cell_size²
};

/// Partitions the free cells of `g` into 4-connected components, ordered by
/// their lowest cell index.
inline std::vector<Component> free_components(const BitGrid& g) {
    const int w = g.width();
    const int h = g.height();
    std::vector<std::uint8_t> seen(g.raw());
    std::vector<Component> out;
    std::vector<int> stack;
    for (int start = 0; start < w * h; ++start) {
        if (seen[static_cast<std::size_t>(start)]) continue;
        Component c;
        seen[static_cast<std::size_t>(start)] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const int idx = stack.back();
            stack.pop_back();
            c.cells.push_back(idx);
            const int i = idx % w;
            const int j = idx / w;
            const int nbr[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
            for (const auto& n : nbr) {
                if (n[0] < 0 || n[0] >= w || n[1] < 0 || n[1] >= h) continue;
                const int k = n[1] * w + n[0];
                if (seen[static_cast<std::size_t>(k)]) continue;
                seen[static_cast<std::size_t>(k)] = 1;
                stack.push_back(k);
            }
        }
        std::sort(c.cells.begin(), c.cells.end());
        c.area = static_cast<double>(c.cells.size()) * g.spec().cell_area();
        out.push_back(std::move(c));
    }
    return out;
}

/// Regular polygon approximation of an ellipse, CCW, starting on the +x axis.
inline Polygon ellipse_polygon(Point center, double rx, double ry, int vertices = 64) {
    std::vector<Point> v;
    v.reserve(static_cast<std::size_t>(vertices));
    for (int k = 0; k < vertices; ++k) {
        const double t = kTwoPi * k / vertices;
        v.push_back({center.x + rx * std::cos(t), center.y + ry * std::sin(t)});
    }
    return Polygon(std::move(v));
}

/// Convex hull (Andrew's monotone chain), CCW without collinear points.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Point> h(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 1e-15) --k;
        h[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 1e-15) --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

}  // namespace gemset
