#pragma once

// SVG output: container outline, then per placement a silver bezel under the
// stone. Path coordinates are design coordinates × px_per_mm; a group
// transform flips y so the design's y axis points up.

#include <charconv>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gemset/catalog.hpp"
#include "gemset/design.hpp"
#include "gemset/error.hpp"
#include "gemset/geometry.hpp"

namespace gemset {

struct RenderStyle {
    double bezel_width_mm = 0.35;
    Rgb bezel_color{192, 192, 192};
    std::optional<Rgb> background;
    double px_per_mm = 10.0;
    Rgb container_color{96, 96, 96};

    void validate() const {
        if (!(bezel_width_mm >= 0)) throw ValidationError("render style: bezel width must be >= 0");
        if (!(px_per_mm > 0)) throw ValidationError("render style: px_per_mm must be > 0");
    }
};

/// Outward vertex-normal (mitered) offset of a convex ring by w.
inline Polygon bezel_outline(const Polygon& p, double w) {
    if (!(w >= 0)) throw PreconditionError("bezel_outline: width must be >= 0");
    if (w == 0) return p;
    const auto& v = p.vertices();
    const std::size_t n = v.size();
    std::vector<Point> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Point prev = v[(i + n - 1) % n], cur = v[i], next = v[(i + 1) % n];
        // outward normals of a CCW ring: (dy, −dx)
        const Point e0 = (1.0 / distance(cur, prev)) * (cur - prev), e1 = (1.0 / distance(next, cur)) * (next - cur);
        const Point n0{e0.y, -e0.x}, n1{e1.y, -e1.x};
        const Point bis = n0 + n1;
        const double len = norm(bis);
        if (len < 1e-9) throw RenderDegenerateError("bezel_outline: cusp vertex");
        const Point u = (1.0 / len) * bis;
        const double c = dot(u, n0);
        if (c < 1e-6) throw RenderDegenerateError("bezel_outline: vertex too sharp to offset");
        out.push_back(cur + (w / c) * u);
    }
    try {
        Polygon q(std::move(out));
        if (!(area(q) > area(p))) throw RenderDegenerateError("bezel_outline: offset did not grow the outline");
        return q;
    } catch (const GeometryError& e) {
        throw RenderDegenerateError(std::string("bezel_outline: offset self-intersects (") + e.what() + ")");
    }
}

namespace detail {

// Shortest decimal that round-trips.
inline std::string num(double x) {
    if (x == 0) x = 0;  // no "-0"
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += ch;
        }
    }
    return out;
}

inline std::string path_data(const Polygon& p, double scale) {
    std::string d;
    bool first = true;
    for (const Point& q : p.vertices()) {
        d += first ? "M" : " L";
        d += num(q.x * scale) + " " + num(q.y * scale);
        first = false;
    }
    return d + " Z";
}

}  // namespace detail

struct RenderResult {
    std::string svg;
    std::vector<std::string> warnings;  // stones drawn without a bezel
    std::size_t bezels = 0;
};

inline RenderResult render_svg_ex(const Design& d, const Catalog& c, const RenderStyle& style = {}) {
    style.validate();
    using detail::num;
    const double s = style.px_per_mm;
    const auto box = d.container.bounds();
    const double w = (box.max.x - box.min.x) * s, h = (box.max.y - box.min.y) * s;
    const double x0 = box.min.x * s, y0 = -box.max.y * s;

    RenderResult r;
    std::string body;
    std::set<int> textured;
    body += "    <path class=\"container\" d=\"" + detail::path_data(d.container, s) + "\" fill=\"none\" stroke=\"" +
            to_hex(style.container_color) + "\" stroke-width=\"" + num(0.1 * s) + "\"/>\n";
    for (std::size_t i = 0; i < d.placements.size(); ++i) {
        const Placement& pl = d.placements[i];
        const StoneKind& kind = c.kind(pl.kind_id);
        const Polygon stone = stone_polygon(c, pl.shape_id, pl.size_index, pl.pose);
        const std::string idx = std::to_string(i);
        if (style.bezel_width_mm > 0) {
            try {
                const Polygon bezel = bezel_outline(stone, style.bezel_width_mm);
                body += "    <path class=\"bezel\" data-index=\"" + idx + "\" d=\"" + detail::path_data(bezel, s) + "\" fill=\"" +
                        to_hex(style.bezel_color) + "\"/>\n";
                ++r.bezels;
            } catch (const RenderDegenerateError& e) {
                r.warnings.push_back("stone " + idx + ": " + e.what());
            }
        }
        std::string fill = to_hex(kind.color);
        if (kind.texture) {
            fill = "url(#texture-" + std::to_string(kind.kind_id) + ")";
            textured.insert(kind.kind_id);
        }
        body += "    <path class=\"stone\" data-index=\"" + idx + "\" data-kind=\"" + std::to_string(pl.kind_id) + "\" d=\"" +
                detail::path_data(stone, s) + "\" fill=\"" + fill + "\"/>\n";
    }

    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(w) + "\" height=\"" + num(h) +
           "\" viewBox=\"" + num(x0) + " " + num(y0) + " " + num(w) + " " + num(h) + "\">\n";
    out += "  <title>" + detail::xml_escape(d.design_id) + "</title>\n";
    if (!textured.empty()) {
        out += "  <defs>\n";
        for (int k : textured) {
            const std::string href = detail::xml_escape(*c.kind(k).texture);
            out += "    <pattern id=\"texture-" + std::to_string(k) +
                   "\" patternUnits=\"userSpaceOnUse\" width=\"64\" height=\"64\"><image href=\"" + href +
                   "\" width=\"64\" height=\"64\"/></pattern>\n";
        }
        out += "  </defs>\n";
    }
    if (style.background)
        out += "  <rect x=\"" + num(x0) + "\" y=\"" + num(y0) + "\" width=\"" + num(w) + "\" height=\"" + num(h) + "\" fill=\"" +
               to_hex(*style.background) + "\"/>\n";
    out += "  <g transform=\"matrix(1 0 0 -1 0 0)\">\n" + body + "  </g>\n</svg>\n";
    r.svg = std::move(out);
    return r;
}

inline std::string render_svg(const Design& d, const Catalog& c, const RenderStyle& style = {}) {
    return render_svg_ex(d, c, style).svg;
}

}  // namespace gemset
