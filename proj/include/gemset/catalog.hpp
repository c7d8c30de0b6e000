#pragma once

// Stone catalog: kinds (color identity), the seven built-in cut shapes, and
// the size ladder.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gemset/error.hpp"
#include "gemset/geometry.hpp"
#include "json.hpp"

namespace gemset {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    friend bool operator==(Rgb, Rgb) = default;
};

inline std::string to_hex(Rgb c) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s = "#";
    for (std::uint8_t v : {c.r, c.g, c.b}) {
        s += kDigits[v >> 4];
        s += kDigits[v & 0xF];
    }
    return s;
}

enum ShapeId : int { kRound = 0, kOval, kSquare, kRectangle, kPear, kMarquise, kTriangle };
inline constexpr int kShapeCount = 7;

struct ShapeDef {
    int shape_id = 0;
    std::string name;
    Polygon unit_outline;     // centroid at the origin, max diameter 1
    int symmetry_order = 1;   // rotations by 2π/order map the outline onto itself
};

struct StoneKind {
    int kind_id = 0;
    std::string name;
    Rgb color;
    std::optional<std::string> texture;
};

namespace detail {

// Recenters on the centroid and scales to unit max diameter.
inline Polygon normalize_outline(const std::vector<Point>& raw) {
    const Polygon p(raw);
    const Point c = centroid(p);
    const double d = p.max_diameter();
    std::vector<Point> v;
    v.reserve(raw.size());
    for (const Point& q : raw) v.push_back((1.0 / d) * (q - c));
    return Polygon(std::move(v));
}

inline std::vector<Point> arc(Point c, double r, double from, double to, int steps) {
    std::vector<Point> v;
    for (int k = 0; k <= steps; ++k) {
        const double t = from + (to - from) * k / steps;
        v.push_back({c.x + r * std::cos(t), c.y + r * std::sin(t)});
    }
    return v;
}

}  // namespace detail

/// The seven built-in cuts. Long axes point along +x at theta = 0.
inline const std::vector<ShapeDef>& builtin_shapes() {
    static const std::vector<ShapeDef> shapes = [] {
        using std::numbers::pi;
        std::vector<ShapeDef> s;

        std::vector<Point> round;
        for (int k = 0; k < 64; ++k) round.push_back({std::cos(kTwoPi * k / 64), std::sin(kTwoPi * k / 64)});
        s.push_back({kRound, "round", detail::normalize_outline(round), 64});

        std::vector<Point> oval;
        for (int k = 0; k < 64; ++k) oval.push_back({std::cos(kTwoPi * k / 64), 0.7 * std::sin(kTwoPi * k / 64)});
        s.push_back({kOval, "oval", detail::normalize_outline(oval), 2});

        s.push_back({kSquare, "square", detail::normalize_outline({{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}), 4});
        s.push_back({kRectangle, "rectangle", detail::normalize_outline({{1, 0.5}, {-1, 0.5}, {-1, -0.5}, {1, -0.5}}), 2});

        // Pear: unit circle plus a tip at distance 2 joined by tangents.
        std::vector<Point> pear{{2.0, 0.0}};
        for (const Point& p : detail::arc({0, 0}, 1.0, pi / 3.0, 5.0 * pi / 3.0, 40)) pear.push_back(p);
        s.push_back({kPear, "pear", detail::normalize_outline(pear), 1});

        // Marquise: lens of two circles of radius 1 with centers at (0, ±0.6).
        const double half = std::acos(0.6);  // half-angle subtended by the lens arc
        std::vector<Point> marquise;
        for (const Point& p : detail::arc({0, -0.6}, 1.0, pi / 2 - half, pi / 2 + half, 32)) marquise.push_back(p);
        auto lower = detail::arc({0, 0.6}, 1.0, 3 * pi / 2 - half, 3 * pi / 2 + half, 32);
        lower.front() = marquise.back();
        lower.pop_back();
        marquise.pop_back();
        for (const Point& p : lower) marquise.push_back(p);
        s.push_back({kMarquise, "marquise", detail::normalize_outline(marquise), 2});

        std::vector<Point> tri;
        for (int k = 0; k < 3; ++k) tri.push_back({std::cos(kTwoPi * k / 3), std::sin(kTwoPi * k / 3)});
        s.push_back({kTriangle, "triangle", detail::normalize_outline(tri), 3});
        return s;
    }();
    return shapes;
}

inline std::vector<double> default_sizes_mm() {
    std::vector<double> s;
    for (int i = 0; i < 20; ++i) s.push_back(2.0 * std::pow(1.12, i));
    return s;
}

/// 15 gem hues × 7 tones. Tone 1 is the base hue, 2-4 lighter, 5-7 darker.
inline std::vector<StoneKind> default_kinds() {
    struct Hue {
        const char* name;
        Rgb base;
    };
    static constexpr std::array<Hue, 15> kHues{{
        {"amethyst", {153, 102, 204}},   {"garnet", {115, 54, 53}},       {"ruby", {224, 17, 95}},
        {"sapphire", {15, 82, 186}},     {"emerald", {80, 200, 120}},     {"topaz", {255, 200, 124}},
        {"citrine", {228, 208, 10}},     {"peridot", {180, 196, 36}},     {"aquamarine", {127, 255, 212}},
        {"tourmaline", {134, 161, 125}}, {"opal", {168, 195, 188}},       {"onyx", {53, 56, 57}},
        {"turquoise", {64, 224, 208}},   {"moonstone", {218, 223, 225}},  {"coral", {255, 127, 80}},
    }};
    static constexpr std::array<double, 7> kTone{0.0, 0.2, 0.4, 0.6, -0.2, -0.4, -0.6};
    std::vector<StoneKind> kinds;
    int id = 0;
    for (const Hue& h : kHues) {
        for (int t = 0; t < 7; ++t) {
            auto mix = [&](std::uint8_t c) {
                const double f = kTone[static_cast<std::size_t>(t)];
                const double v = f >= 0 ? c + (255.0 - c) * f : c * (1.0 + f);
                return static_cast<std::uint8_t>(std::lround(v));
            };
            kinds.push_back({id++, std::string(h.name) + "-" + std::to_string(t + 1),
                             {mix(h.base.r), mix(h.base.g), mix(h.base.b)}, std::nullopt});
        }
    }
    return kinds;
}

class Catalog {
public:
    /// Throws ValidationError naming the offending field.
    Catalog(std::vector<StoneKind> kinds, std::vector<double> sizes_mm)
        : kinds_(std::move(kinds)), sizes_(std::move(sizes_mm)) {
        if (kinds_.empty()) throw ValidationError("catalog validation: kinds is empty");
        for (std::size_t i = 0; i < kinds_.size(); ++i) {
            if (!index_.emplace(kinds_[i].kind_id, i).second)
                throw ValidationError("catalog validation: kinds[" + std::to_string(i) + "].kind_id " +
                                      std::to_string(kinds_[i].kind_id) + " is a duplicate");
        }
        if (sizes_.empty()) throw ValidationError("catalog validation: sizes_mm is empty");
        for (std::size_t i = 0; i < sizes_.size(); ++i) {
            if (!(sizes_[i] > 0.0) || !std::isfinite(sizes_[i]))
                throw ValidationError("catalog validation: sizes_mm[" + std::to_string(i) + "] must be > 0");
            if (i > 0 && !(sizes_[i] > sizes_[i - 1]))
                throw ValidationError("catalog validation: sizes_mm[" + std::to_string(i) +
                                      "] is not strictly greater than sizes_mm[" + std::to_string(i - 1) + "]");
        }
    }

    const std::vector<StoneKind>& kinds() const noexcept { return kinds_; }
    const std::vector<ShapeDef>& shapes() const noexcept { return builtin_shapes(); }
    const std::vector<double>& sizes_mm() const noexcept { return sizes_; }

    const StoneKind& kind(int kind_id) const {
        const auto it = index_.find(kind_id);
        if (it == index_.end()) throw PreconditionError("unknown kind_id " + std::to_string(kind_id));
        return kinds_[it->second];
    }
    bool has_kind(int kind_id) const { return index_.count(kind_id) != 0; }

    const ShapeDef& shape(int shape_id) const {
        if (shape_id < 0 || shape_id >= kShapeCount)
            throw PreconditionError("shape_id " + std::to_string(shape_id) + " out of range");
        return builtin_shapes()[static_cast<std::size_t>(shape_id)];
    }
    double size_mm(int size_index) const {
        if (size_index < 0 || static_cast<std::size_t>(size_index) >= sizes_.size())
            throw PreconditionError("size_index " + std::to_string(size_index) + " out of range");
        return sizes_[static_cast<std::size_t>(size_index)];
    }
    int size_count() const { return static_cast<int>(sizes_.size()); }

    /// Pose-independent stone area.
    double stone_area(int shape_id, int size_index) const {
        const double s = size_mm(size_index);
        return area(shape(shape_id).unit_outline) * s * s;
    }

    double smallest_stone_area() const {
        double a = std::numeric_limits<double>::infinity();
        for (int s = 0; s < kShapeCount; ++s) a = std::min(a, stone_area(s, 0));
        return a;
    }

private:
    std::vector<StoneKind> kinds_;
    std::vector<double> sizes_;
    std::map<int, std::size_t> index_;
};

inline Catalog default_catalog() { return Catalog(default_kinds(), default_sizes_mm()); }

/// Outline of a concrete stone: unit outline scaled to the size's max
/// diameter and posed.
inline Polygon stone_polygon(const Catalog& c, int shape_id, int size_index, const Pose& pose) {
    return transform(c.shape(shape_id).unit_outline, pose, c.size_mm(size_index));
}

inline nlohmann::json catalog_to_json(const Catalog& c) {
    nlohmann::json kinds = nlohmann::json::array();
    for (const StoneKind& k : c.kinds()) {
        kinds.push_back({{"kind_id", k.kind_id},
                         {"name", k.name},
                         {"color", {k.color.r, k.color.g, k.color.b}},
                         {"texture", k.texture ? nlohmann::json(*k.texture) : nlohmann::json(nullptr)}});
    }
    return {{"kinds", kinds}, {"sizes_mm", c.sizes_mm()}};
}

inline Catalog catalog_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object()) throw ValidationError("catalog validation: document must be an object");
        if (!j.contains("kinds") || !j.at("kinds").is_array())
            throw ValidationError("catalog validation: kinds must be an array");
        std::vector<StoneKind> kinds;
        std::size_t i = 0;
        for (const auto& k : j.at("kinds")) {
            const std::string where = "catalog validation: kinds[" + std::to_string(i++) + "]";
            if (!k.contains("kind_id") || !k.at("kind_id").is_number_integer())
                throw ValidationError(where + ".kind_id must be an integer");
            StoneKind kind;
            kind.kind_id = k.at("kind_id").get<int>();
            kind.name = k.value("name", "kind-" + std::to_string(kind.kind_id));
            const auto& col = k.at("color");
            if (!col.is_array() || col.size() != 3) throw ValidationError(where + ".color must be [r,g,b]");
            std::array<int, 3> rgb{};
            for (std::size_t q = 0; q < 3; ++q) {
                rgb[q] = col[q].get<int>();
                if (rgb[q] < 0 || rgb[q] > 255) throw ValidationError(where + ".color channel out of range");
            }
            kind.color = {static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                          static_cast<std::uint8_t>(rgb[2])};
            if (k.contains("texture") && !k.at("texture").is_null()) kind.texture = k.at("texture").get<std::string>();
            kinds.push_back(std::move(kind));
        }
        std::vector<double> sizes = default_sizes_mm();
        if (j.contains("sizes_mm") && !j.at("sizes_mm").is_null()) sizes = j.at("sizes_mm").get<std::vector<double>>();
        return Catalog(std::move(kinds), std::move(sizes));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("catalog validation: ") + e.what());
    }
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

inline Catalog load_catalog(const std::string& path) { return catalog_from_json(read_json_file(path)); }

}  // namespace gemset
