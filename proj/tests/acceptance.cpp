// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gemset/gemset.hpp"
#include "oracles.hpp"

using namespace gemset;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(const char* name, const Verdict& v) {
    std::printf("%s  %-28s %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const Catalog& cat() {
    static const Catalog c = default_catalog();
    return c;
}

bool near_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

// ---- packing ---------------------------------------------------------------

struct Generated {
    Design design;
    std::vector<std::uint8_t> final_occ;
    int w = 0, h = 0;
    double cell_area = 0, slack = 0;
    std::size_t stats_mismatches = 0;
    std::size_t steps = 0;
};

// Independent recomputation of the running statistics from placements.
struct Batch {
    double mean_size = 0, proportion = 0, emphasis = 0;
    std::array<int, kShapeCount> shapes{};
};

Batch batch_from(const std::vector<Placement>& pl) {
    Batch b;
    std::vector<double> a;
    for (const Placement& p : pl) {
        a.push_back(area(stone_polygon(cat(), p.shape_id, p.size_index, p.pose)));
        b.mean_size += cat().size_mm(p.size_index);
        ++b.shapes[static_cast<std::size_t>(p.shape_id)];
    }
    const double n = static_cast<double>(a.size());
    b.mean_size /= n;
    double mean = 0;
    for (double x : a) mean += x / n;
    for (double x : a) b.proportion += (x - mean) * (x - mean) / n;
    b.proportion = std::sqrt(b.proportion);
    if (a.size() >= 2) {
        const auto mx = std::max_element(a.begin(), a.end());
        std::vector<double> rest(a.begin(), a.end());
        rest.erase(rest.begin() + (mx - a.begin()));
        double rm = 0, rv = 0;
        for (double x : rest) rm += x / static_cast<double>(rest.size());
        for (double x : rest) rv += (x - rm) * (x - rm) / static_cast<double>(rest.size());
        b.emphasis = (*mx - rm) * std::sqrt(rv);
    }
    return b;
}

Generated run_generator(const ContainerSpec& spec, const GenParams& p, bool check_stats) {
    Generated g;
    g.design = generate(spec, cat(), p, "", [&](const GenState& s) {
        ++g.steps;
        if (check_stats) {
            const RunningStats r = s.running_stats();
            const Batch b = batch_from(s.placements());
            const bool ok = near_rel(r.mean_size_mm, b.mean_size, 1e-9) && near_rel(r.proportion, b.proportion, 1e-9) &&
                            near_rel(r.emphasis, b.emphasis, 1e-9) && r.shape_counts == b.shapes &&
                            r.count == s.placements().size();
            g.stats_mismatches += ok ? 0 : 1;
        }
        g.final_occ = s.occupancy().raw();
        g.w = s.grid().width, g.h = s.grid().height;
        g.cell_area = s.grid().cell_area(), g.slack = s.slack_area();
    });
    return g;
}

Verdict packing_validity(const std::vector<Generated>& gs, double seconds) {
    const GenParams p{};
    int bad = 0;
    std::size_t lo = 1000, hi = 0;
    for (const Generated& g : gs) {
        const Design& d = g.design;
        lo = std::min(lo, d.placements.size()), hi = std::max(hi, d.placements.size());
        bool ok = d.placements.size() >= 5 && d.placements.size() <= 60;
        std::vector<Polygon> polys;
        for (const Placement& pl : d.placements) polys.push_back(stone_polygon(cat(), pl.shape_id, pl.size_index, pl.pose));
        for (std::size_t i = 0; i < polys.size() && ok; ++i) {
            ok = contains(d.container, polys[i], p.bezel_margin - p.cell_size);
            for (std::size_t j = i + 1; j < polys.size() && ok; ++j) ok = overlap_area(polys[i], polys[j]) <= 1e-6;
        }
        bad += ok ? 0 : 1;
    }
    return {bad == 0 && seconds <= 180.0,
            fmt("%zu designs, %d invalid, stones %zu..%zu, %.1f s", gs.size(), bad, lo, hi, seconds)};
}

Verdict no_dead_space(const std::vector<Generated>& gs) {
    const auto t = footprint_table(cat(), GenParams{});
    int bad = 0;
    std::size_t comps = 0;
    for (const Generated& g : gs)
        for (const auto& c : oracle::components(g.final_occ, g.w, g.h)) {
            ++comps;
            if (static_cast<double>(c.size()) * g.cell_area >= g.slack && oracle::fits_somewhere(c, g.w, g.h, *t)) ++bad;
        }
    return {bad == 0, fmt("%zu terminal components, %d could still hold a stone", comps, bad)};
}

Verdict incremental_stats() {
    std::size_t steps = 0, bad = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Generated g = run_generator(ContainerSpec::circle(30), {.seed = 1000 + seed}, true);
        steps += g.steps, bad += g.stats_mismatches;
    }
    return {bad == 0 && steps > 0, fmt("10 runs, %zu steps, %zu mismatches", steps, bad)};
}

// ---- filter ----------------------------------------------------------------

BitGrid random_obstacles(std::mt19937_64& rng) {
    constexpr int n = 32;
    BitGrid g(GridSpec{n, n, 0.25, {0, 0}});
    std::uniform_int_distribution<int> pos(0, n - 1), rad(2, 7), count(2, 7);
    const int k = count(rng);
    for (int d = 0; d < k; ++d) {
        const int ci = pos(rng), cj = pos(rng), r = rad(rng);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                if ((i - ci) * (i - ci) + (j - cj) * (j - cj) <= r * r) g.set(i, j);
    }
    for (int t = 0; t < n; ++t) g.set(t, 0), g.set(t, n - 1), g.set(0, t), g.set(n - 1, t);
    return g;
}

Verdict dp_filter() {
    std::mt19937_64 rng(2024);
    int states = 0, checked = 0, rejected = 0, mismatches = 0;
    while (states < 200) {
        GenState s = GenState::from_occupancy(random_obstacles(rng), cat(), GenParams{});
        if (oracle::any_dead(s.occupancy().raw(), 32, 32, s.grid().cell_area(), s.slack_area(), s.table())) continue;
        auto fitting = oracle::all_fitting(s);
        if (fitting.empty()) continue;
        ++states;
        std::shuffle(fitting.begin(), fitting.end(), rng);
        if (fitting.size() > 12) fitting.resize(12);
        const auto kept = filter_candidates(s, fitting);
        std::vector<Candidate> want;
        for (const Candidate& c : fitting) {
            ++checked;
            if (oracle::creates_dead_space(s, c))
                ++rejected;
            else
                want.push_back(c);
        }
        bool same = kept.size() == want.size();
        for (std::size_t i = 0; same && i < want.size(); ++i)
            same = kept[i].ci == want[i].ci && kept[i].cj == want[i].cj && kept[i].shape_id == want[i].shape_id &&
                   kept[i].size_index == want[i].size_index && kept[i].orientation == want[i].orientation;
        mismatches += same ? 0 : 1;
    }
    return {mismatches == 0 && rejected > 0,
            fmt("%d states, %d candidates, %d rejected by oracle, %d mismatching states", states, checked, rejected, mismatches)};
}

// ---- features --------------------------------------------------------------

Verdict feature_invariance(const std::vector<Design>& designs) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi), off(-50, 50), scale(0.4, 3.0);
    int bad = 0;
    for (const Design& d : designs) {
        const FeatureVector a = feature_vector(d, cat());

        // Rigid motion: rotate about the origin, then translate.
        const Pose m(off(rng), off(rng), ang(rng));
        const double cs = std::cos(m.theta), sn = std::sin(m.theta);
        Design r = d;
        r.container = transform(d.container, m, 1.0);
        for (Placement& p : r.placements)
            p.pose = Pose(cs * p.pose.x - sn * p.pose.y + m.x, sn * p.pose.x + cs * p.pose.y + m.y, p.pose.theta + m.theta);
        const FeatureVector b = feature_vector(r, cat());
        bool ok = true;
        for (std::size_t k = 0; k < 6; ++k) ok = ok && near_rel(b.values()[k], a.values()[k], 1e-9);

        // Uniform scaling by c, with the catalog and neighbor threshold scaled too.
        const double c = scale(rng);
        auto sizes = cat().sizes_mm();
        for (double& s : sizes) s *= c;
        const Catalog big(default_kinds(), sizes);
        Design e = d;
        e.container = transform(d.container, Pose{}, c);
        for (Placement& p : e.placements) p.pose = Pose(c * p.pose.x, c * p.pose.y, p.pose.theta);
        const FeatureVector s = feature_vector(make_layout(e, big), FeatureParams{1.5 * c});
        ok = ok && near_rel(s.balance, c * a.balance, 1e-9) && near_rel(s.unity, c * a.unity, 1e-9) &&
             near_rel(s.proportion, c * c * a.proportion, 1e-9) && near_rel(s.emphasis, c * c * c * c * a.emphasis, 1e-9) &&
             near_rel(s.harmony_shape, a.harmony_shape, 1e-9) && near_rel(s.harmony_orientation, a.harmony_orientation, 1e-9);
        bad += ok ? 0 : 1;
    }
    return {bad == 0, fmt("%zu designs, %d violations", designs.size(), bad)};
}

// ---- gbt -------------------------------------------------------------------

struct Dataset {
    std::vector<FeatureRow> x;
    std::vector<double> y;
};

Dataset planted(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0, 10);
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        FeatureRow r;
        for (double& v : r) v = u(rng);
        d.x.push_back(r);
    }
    std::vector<double> b;
    for (const auto& r : d.x) b.push_back(r[0]);
    std::nth_element(b.begin(), b.begin() + static_cast<long>(n / 2), b.end());
    for (const auto& r : d.x) d.y.push_back(r[0] < b[n / 2] ? 1.0 : 0.0);
    return d;
}

double accuracy(const GbtModel& m, const Dataset& d) {
    int ok = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) ok += (m.predict(d.x[i]) >= 0.5) == (d.y[i] == 1.0);
    return static_cast<double>(ok) / static_cast<double>(d.x.size());
}

Verdict gbt() {
    std::mt19937_64 rng(500);
    Dataset noisy = planted(rng, 300);
    std::normal_distribution<double> nz(0, 0.3);
    for (double& y : noisy.y) y = std::clamp(y + nz(rng), 0.0, 1.0);
    TrainTrace tr;
    train(noisy.x, noisy.y, {.n_trees = 50, .loss = Loss::Squared}, &tr);
    int increases = 0;
    for (std::size_t k = 1; k < tr.loss.size(); ++k) increases += tr.loss[k] > tr.loss[k - 1];

    const Dataset d = planted(rng, 500), held = planted(rng, 500);
    const GbtModel m = train(d.x, d.y);
    const double acc = accuracy(m, d), hacc = accuracy(m, held);

    const auto path = fs::temp_directory_path() / "gemset_acceptance_model.json";
    save_model(m, path);
    const GbtModel back = load_model(path);
    std::uniform_real_distribution<double> u(-5, 15);
    int differ = 0;
    for (int i = 0; i < 100; ++i) {
        FeatureRow r;
        for (double& v : r) v = u(rng);
        differ += back.predict(r) != m.predict(r);
    }
    return {increases == 0 && tr.loss.size() == 51 && acc >= 0.95 && hacc >= 0.90 && differ == 0,
            fmt("loss increases %d/50, train acc %.3f, held-out acc %.3f, round-trip diffs %d/100", increases, acc, hacc, differ)};
}

// ---- pruning ---------------------------------------------------------------

Verdict pruning_lift(const std::vector<Design>& designs) {
    // Min-max normalized features; annotator j likes d with
    // probability sigmoid(a_j - b * |f(d)|_1 + noise).
    std::vector<FeatureRow> f;
    for (const Design& d : designs) f.push_back(to_row(feature_vector(d, cat())));
    FeatureRow lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (const auto& r : f)
        for (std::size_t k = 0; k < 6; ++k) lo[k] = std::min(lo[k], r[k]), hi[k] = std::max(hi[k], r[k]);
    std::vector<double> l1;
    for (const auto& r : f) {
        double s = 0;
        for (std::size_t k = 0; k < 6; ++k) s += hi[k] > lo[k] ? (r[k] - lo[k]) / (hi[k] - lo[k]) : 0.0;
        l1.push_back(s);
    }
    double mean_l1 = 0;
    for (double v : l1) mean_l1 += v / static_cast<double>(l1.size());

    constexpr int kJudges = 15;
    constexpr double b = 3.0;
    std::mt19937_64 rng(15);
    std::normal_distribution<double> bias(0, 0.5), noise(0, 0.5);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> a(kJudges);
    for (double& v : a) v = b * mean_l1 + bias(rng);
    std::vector<std::vector<int>> like(designs.size(), std::vector<int>(kJudges));
    for (std::size_t i = 0; i < designs.size(); ++i)
        for (int j = 0; j < kJudges; ++j) like[i][j] = u(rng) < sigmoid(a[j] - b * l1[i] + noise(rng));

    // Train on the first 200 with judges 0..2, majority vote.
    std::vector<LabelRecord> recs;
    for (std::size_t i = 0; i < 200; ++i)
        for (int j = 0; j < 3; ++j) recs.push_back({designs[i].design_id, "j-" + std::to_string(j), like[i][j], {}});
    const auto targets = aggregate_labels(recs, Aggregation::Majority);
    std::vector<FeatureRow> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < 200; ++i) x.push_back(f[i]), y.push_back(targets.at(designs[i].design_id));
    const GbtModel m = train(x, y);

    const std::vector<Design> test(designs.begin() + 200, designs.end());
    const PruneResult r = prune_scored(score_designs(test, cat(), m), std::nullopt, 0.7);
    const std::set<std::string> kept(r.kept.begin(), r.kept.end());

    auto matrix = [&](bool only_kept) {
        LabelMap lm;
        for (std::size_t i = 200; i < designs.size(); ++i) {
            if (only_kept && !kept.count(designs[i].design_id)) continue;
            for (int j = 0; j < kJudges; ++j) lm[{designs[i].design_id, "j-" + std::to_string(j)}] = like[i][j];
        }
        return LabelMatrix::from_labels(lm);
    };
    const double before = symmetric_like_point(matrix(false)), after = symmetric_like_point(matrix(true));
    const double lift = 100 * (after - before);
    return {lift >= 3.0 - 1e-9, fmt("kept %zu/%zu, symmetric like point %.0f%% -> %.0f%% (%+.0f points)", kept.size(), test.size(),
                                   100 * before, 100 * after, lift)};
}

// ---- metrics ---------------------------------------------------------------

Verdict metric_oracle() {
    std::mt19937_64 rng(4321);
    std::uniform_real_distribution<double> u(0, 1);
    int bad = 0;
    for (int t = 0; t < 100; ++t) {
        const double p_like = 0.15 + 0.007 * t, p_missing = t % 4 == 0 ? 0.25 : 0.0;
        LabelMatrix m(20, 15);
        for (std::size_t r = 0; r < 20; ++r)
            for (std::size_t c = 0; c < 15; ++c) m.set(r, c, u(rng) < p_missing ? LabelMatrix::kMissing : (u(rng) < p_like ? 1 : 0));
        bool ok = symmetric_like_point(m) == oracle::symmetric_like_point(m);
        for (int k = 1; k <= 100; ++k) ok = ok && like_coverage(m, k / 100.0) == oracle::like_coverage(m, k);
        bad += ok ? 0 : 1;
    }
    return {bad == 0, fmt("100 matrices 20x15, %d mismatching", bad)};
}

// ---- cli -------------------------------------------------------------------

int sh(const std::string& args) {
    const int st = std::system((std::string(GEMSET_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict cli_determinism() {
    const fs::path base = fs::temp_directory_path() / "gemset_acceptance_cli";
    fs::remove_all(base);
    const std::string gen = "generate --container circle --diameter-mm 30 --count 3 --seed 5 --out ";
    int rc = sh(gen + (base / "a").string()) + sh(gen + (base / "b").string());
    int files = 0, differ = 0;
    if (rc == 0)
        for (const auto& e : fs::directory_iterator(base / "a")) {
            ++files;
            differ += slurp(e.path()) != slurp(base / "b" / e.path().filename());
        }
    const fs::path data = fs::path(GEMSET_TEST_DATA) / "cli";
    const std::string tr = "train --designs " + (data / "designs").string() + " --labels " + (data / "labels.jsonl").string() + " --out ";
    rc += sh(tr + (base / "m1.json").string()) + sh(tr + (base / "m2.json").string());
    const bool model_same = rc == 0 && slurp(base / "m1.json") == slurp(base / "m2.json") && !slurp(base / "m1.json").empty();
    return {rc == 0 && files == 3 && differ == 0 && model_same,
            fmt("exit codes sum %d, %d design files, %d differ, model %s", rc, files, differ, model_same ? "identical" : "differs")};
}

// ---- renderer --------------------------------------------------------------

Verdict renderer(const std::vector<Generated>& gs) {
    namespace pt = boost::property_tree;
    int bad = 0;
    for (const Generated& g : gs) {
        const Design& d = g.design;
        const RenderResult rr = render_svg_ex(d, cat());
        bool ok = true;
        try {
            std::istringstream in(rr.svg);
            pt::ptree tree;
            pt::read_xml(in, tree);
            std::size_t paths = 0, stones = 0;
            for (const auto& [tag, node] : tree.get_child("svg.g")) {
                if (tag != "path") continue;
                ++paths;
                if (node.get<std::string>("<xmlattr>.class") != "stone") continue;
                const Placement& p = d.placements.at(stones++);
                ok = ok && node.get<std::string>("<xmlattr>.fill") == to_hex(cat().kind(p.kind_id).color);
            }
            ok = ok && stones == d.placements.size() && paths == 1 + 2 * (d.placements.size() - rr.warnings.size()) + rr.warnings.size() &&
                 rr.bezels + rr.warnings.size() == d.placements.size();
        } catch (const std::exception&) {
            ok = false;
        }
        bad += ok ? 0 : 1;
    }
    return {bad == 0, fmt("%zu designs, %d failing", gs.size(), bad)};
}

}  // namespace

int main() {
    using clock = std::chrono::steady_clock;

    const auto t0 = clock::now();
    std::vector<Generated> main_set;
    for (std::uint64_t seed = 0; seed < 50; ++seed) main_set.push_back(run_generator(ContainerSpec::circle(40), {.seed = seed}, false));
    const double gen_seconds = std::chrono::duration<double>(clock::now() - t0).count();

    report("packing-validity", packing_validity(main_set, gen_seconds));
    report("no-dead-space", no_dead_space(main_set));

    // Pruning corpus: 300 designs over three container shapes.
    std::vector<Design> corpus;
    const ContainerSpec shapes[] = {ContainerSpec::circle(26), ContainerSpec::ellipse(30, 20), ContainerSpec::hexagon(26)};
    for (std::uint64_t i = 0; i < 300; ++i) {
        Design d = generate(shapes[i % 3], cat(), {.seed = 5000 + i});
        d.design_id = fmt("p-%03d", static_cast<int>(i));
        corpus.push_back(std::move(d));
    }

    std::vector<Design> hundred;
    for (const Generated& g : main_set) hundred.push_back(g.design);
    hundred.insert(hundred.end(), corpus.begin(), corpus.begin() + 50);
    report("feature-invariance", feature_invariance(hundred));
    report("incremental-stats", incremental_stats());
    report("dp-filter-oracle", dp_filter());
    report("gbt-correctness", gbt());
    report("pruning-lift", pruning_lift(corpus));
    report("metric-oracle", metric_oracle());
    report("cli-determinism", cli_determinism());
    report("renderer", renderer(main_set));

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
