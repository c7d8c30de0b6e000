#pragma once

// Design documents: a container silhouette plus an ordered list of stone
// placements, and their design.json form.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gemset/catalog.hpp"
#include "gemset/error.hpp"
#include "gemset/geometry.hpp"
#include "json.hpp"

namespace gemset {

enum class ContainerKind { Circle, Ellipse, Teardrop, Hexagon, Polygon };

/// Parametric description of a jewelry silhouette. Curved kinds become
/// 64-vertex polygons centered on the origin.
struct ContainerSpec {
    ContainerKind kind = ContainerKind::Circle;
    double diameter_mm = 40.0;  // circle, hexagon (circumscribed)
    double width_mm = 0.0;      // ellipse
    double height_mm = 0.0;     // ellipse
    double length_mm = 0.0;     // teardrop, tip up
    std::vector<Point> vertices;  // polygon

    static ContainerSpec circle(double d) { return {ContainerKind::Circle, d, 0, 0, 0, {}}; }
    static ContainerSpec ellipse(double w, double h) { return {ContainerKind::Ellipse, 0, w, h, 0, {}}; }
    static ContainerSpec teardrop(double len) { return {ContainerKind::Teardrop, 0, 0, 0, len, {}}; }
    static ContainerSpec hexagon(double d) { return {ContainerKind::Hexagon, d, 0, 0, 0, {}}; }
    static ContainerSpec polygon(std::vector<Point> v) { return {ContainerKind::Polygon, 0, 0, 0, 0, std::move(v)}; }

    Polygon outline() const {
        switch (kind) {
            case ContainerKind::Circle:
                if (!(diameter_mm > 0)) throw ValidationError("container: diameter_mm must be > 0");
                return ellipse_polygon({0, 0}, diameter_mm / 2, diameter_mm / 2);
            case ContainerKind::Ellipse:
                if (!(width_mm > 0) || !(height_mm > 0))
                    throw ValidationError("container: width_mm and height_mm must be > 0");
                return ellipse_polygon({0, 0}, width_mm / 2, height_mm / 2);
            case ContainerKind::Teardrop: {
                if (!(length_mm > 0)) throw ValidationError("container: length_mm must be > 0");
                const Polygon& pear = builtin_shapes()[kPear].unit_outline;
                return transform(pear, Pose(0, 0, std::numbers::pi / 2), length_mm);
            }
            case ContainerKind::Hexagon: {
                if (!(diameter_mm > 0)) throw ValidationError("container: diameter_mm must be > 0");
                std::vector<Point> v;
                for (int k = 0; k < 6; ++k)
                    v.push_back({diameter_mm / 2 * std::cos(kTwoPi * k / 6), diameter_mm / 2 * std::sin(kTwoPi * k / 6)});
                return Polygon(std::move(v));
            }
            case ContainerKind::Polygon:
                return Polygon(vertices);
        }
        throw ValidationError("container: unknown kind");
    }
};

struct Placement {
    int kind_id = 0;
    int shape_id = 0;
    int size_index = 0;
    Pose pose;
};

struct Design {
    std::string design_id;
    std::uint64_t seed = 0;
    ContainerSpec container_spec;
    Polygon container = ContainerSpec::circle(40).outline();
    std::vector<Placement> placements;
    std::string params_fingerprint;
};

inline const char* container_kind_name(ContainerKind k) {
    switch (k) {
        case ContainerKind::Circle: return "circle";
        case ContainerKind::Ellipse: return "ellipse";
        case ContainerKind::Teardrop: return "teardrop";
        case ContainerKind::Hexagon: return "hexagon";
        case ContainerKind::Polygon: return "polygon";
    }
    return "?";
}

inline nlohmann::json container_to_json(const ContainerSpec& c) {
    nlohmann::json j{{"kind", container_kind_name(c.kind)}};
    switch (c.kind) {
        case ContainerKind::Circle:
        case ContainerKind::Hexagon: j["diameter_mm"] = c.diameter_mm; break;
        case ContainerKind::Ellipse:
            j["width_mm"] = c.width_mm;
            j["height_mm"] = c.height_mm;
            break;
        case ContainerKind::Teardrop: j["length_mm"] = c.length_mm; break;
        case ContainerKind::Polygon: {
            nlohmann::json v = nlohmann::json::array();
            for (const Point& p : c.vertices) v.push_back({p.x, p.y});
            j["vertices"] = v;
            break;
        }
    }
    return j;
}

/// Polygon file form: JSON array of [x, y] pairs in millimeters. Clockwise
/// rings are reversed.
inline std::vector<Point> points_from_json(const nlohmann::json& arr) {
    if (!arr.is_array()) throw ValidationError("polygon: expected an array of [x, y] pairs");
    std::vector<Point> v;
    for (const auto& p : arr) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            throw ValidationError("polygon: every vertex must be an [x, y] number pair");
        v.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    if (signed_area(v) < 0) std::reverse(v.begin(), v.end());
    return v;
}

inline ContainerSpec container_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "circle") return ContainerSpec::circle(j.at("diameter_mm").get<double>());
    if (kind == "ellipse") return ContainerSpec::ellipse(j.at("width_mm").get<double>(), j.at("height_mm").get<double>());
    if (kind == "teardrop") return ContainerSpec::teardrop(j.at("length_mm").get<double>());
    if (kind == "hexagon") return ContainerSpec::hexagon(j.at("diameter_mm").get<double>());
    if (kind == "polygon") return ContainerSpec::polygon(points_from_json(j.at("vertices")));
    throw ValidationError("container: unknown kind '" + kind + "'");
}

inline nlohmann::json design_to_json(const Design& d) {
    nlohmann::json placements = nlohmann::json::array();
    for (const Placement& p : d.placements) {
        placements.push_back({{"kind_id", p.kind_id},
                              {"shape_id", p.shape_id},
                              {"size_index", p.size_index},
                              {"x", p.pose.x},
                              {"y", p.pose.y},
                              {"theta", p.pose.theta}});
    }
    nlohmann::json j{{"design_id", d.design_id},
                     {"seed", d.seed},
                     {"container", container_to_json(d.container_spec)},
                     {"placements", placements}};
    if (!d.params_fingerprint.empty()) j["params_fingerprint"] = d.params_fingerprint;
    return j;
}

inline Design design_from_json(const nlohmann::json& j) {
    try {
        Design d;
        d.design_id = j.at("design_id").get<std::string>();
        d.seed = j.value("seed", std::uint64_t{0});
        d.container_spec = container_from_json(j.at("container"));
        d.container = d.container_spec.outline();
        for (const auto& p : j.at("placements")) {
            d.placements.push_back({p.at("kind_id").get<int>(), p.at("shape_id").get<int>(), p.at("size_index").get<int>(),
                                    Pose(p.at("x").get<double>(), p.at("y").get<double>(), p.at("theta").get<double>())});
        }
        d.params_fingerprint = j.value("params_fingerprint", std::string{});
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("design: ") + e.what());
    }
}

inline std::string design_document(const Design& d) { return design_to_json(d).dump(2) + "\n"; }

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

inline Design load_design(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return design_from_json(j);
}

/// All `*.json` designs in a directory, ordered by file name.
inline std::vector<Design> load_design_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<Design> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(load_design(f));
    return out;
}

/// 64-bit FNV-1a, hex encoded. Used for fingerprints and golden hashes.
inline std::string fnv1a_hex(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kDigits[h & 0xF];
    return out;
}

}  // namespace gemset
