// gemset: generate, features, render, train, prune, evaluate, serve.
// Exit codes: 0 success, 1 usage or validation error, 2 I/O error.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gemset/gemset.hpp"

namespace fs = std::filesystem;
using namespace gemset;

namespace {

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("gemset");
    logger->set_pattern("%^%l%$: %v");
    spdlog::set_default_logger(logger);
    const char* env = std::getenv("GEMSET_LOG");
    spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

Catalog catalog_from(const std::string& path) { return path.empty() ? default_catalog() : load_catalog(path); }

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::string design_id_for(std::uint64_t seed) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "d-%06llu", static_cast<unsigned long long>(seed));
    return buf;
}

Rgb parse_hex_color(const std::string& s) {
    if (s.size() != 7 || s[0] != '#') throw ValidationError("color must look like #rrggbb: " + s);
    const unsigned long v = std::stoul(s.substr(1), nullptr, 16);
    return {static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

struct FeatureRows {
    std::vector<std::string> ids;
    std::vector<FeatureRow> rows;
};

// Features for every design; failures are logged and skipped.
FeatureRows compute_features(const std::vector<Design>& designs, const Catalog& c, const FeatureParams& fp, unsigned jobs) {
    std::vector<std::optional<FeatureRow>> out(designs.size());
    parallel_for(designs.size(), jobs, [&](std::size_t i) {
        try {
            out[i] = to_row(feature_vector(designs[i], c, fp));
        } catch (const UndefinedFeatureError& e) {
            spdlog::warn("{}: {}", designs[i].design_id, e.what());
        }
    });
    FeatureRows r;
    for (std::size_t i = 0; i < designs.size(); ++i) {
        if (!out[i]) continue;
        r.ids.push_back(designs[i].design_id);
        r.rows.push_back(*out[i]);
    }
    return r;
}

void print_curve(const LabelMatrix& m, std::ostream& os) {
    os << "p\tlike_coverage\n";
    for (int k = 5; k <= 100; k += 5) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f\t%.4f\n", k / 100.0, like_coverage(m, k / 100.0));
        os << buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "symmetric_like_point\t%.2f\n", symmetric_like_point(m));
    os << buf;
}

AnnotationServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"gemset: aesthetic jewelry design generation and pruning"};
    app.require_subcommand(1);
    unsigned jobs = default_jobs();
    std::string catalog_path;

    // generate
    auto* gen = app.add_subcommand("generate", "generate designs into a directory");
    std::string container = "circle", polygon_file, out_dir;
    double diameter = 40, width = 0, height = 0, length = 0;
    int count = 1;
    GenParams gp;
    gen->add_option("--container", container, "circle|ellipse|teardrop|hexagon|polygon")
        ->check(CLI::IsMember({"circle", "ellipse", "teardrop", "hexagon", "polygon"}));
    gen->add_option("--diameter-mm", diameter);
    gen->add_option("--width-mm", width);
    gen->add_option("--height-mm", height);
    gen->add_option("--length-mm", length);
    gen->add_option("--polygon", polygon_file, "JSON file with [[x, y], ...] in mm");
    gen->add_option("--count", count)->check(CLI::PositiveNumber);
    gen->add_option("--seed", gp.seed);
    gen->add_option("--catalog", catalog_path);
    gen->add_option("--out", out_dir)->required();
    gen->add_option("--jobs", jobs);
    gen->add_option("--cell-size", gp.cell_size);
    gen->add_option("--orientations", gp.orientations);
    gen->add_option("--bezel-margin", gp.bezel_margin);
    std::optional<double> slack;
    gen->add_option("--slack-area", slack);
    gen->add_option("--w-balance", gp.w_balance);
    gen->add_option("--w-harmony-shape", gp.w_harmony_shape);
    gen->add_option("--w-harmony-orientation", gp.w_harmony_orientation);
    gen->add_option("--w-proportion", gp.w_proportion);
    gen->add_option("--w-unity", gp.w_unity);
    gen->add_option("--min-stones", gp.min_stones);
    gen->add_option("--max-stones", gp.max_stones);
    gen->add_option("--stop-free-fraction", gp.stop_free_fraction);
    gen->add_option("--pose-budget", gp.pose_budget);
    gen->add_option("--anchor-stride", gp.anchor_stride);
    gen->add_option("--keep-probability", gp.keep_probability);

    // features
    auto* feat = app.add_subcommand("features", "write the feature vector of every design as JSONL");
    std::string designs_dir, out_file;
    double neighbor_threshold = 1.5;
    feat->add_option("--designs", designs_dir)->required();
    feat->add_option("--out", out_file)->required();
    feat->add_option("--catalog", catalog_path);
    feat->add_option("--neighbor-threshold-mm", neighbor_threshold);
    feat->add_option("--jobs", jobs);

    // render
    auto* ren = app.add_subcommand("render", "render every design to <design_id>.svg");
    RenderStyle style;
    std::string background;
    ren->add_option("--designs", designs_dir)->required();
    ren->add_option("--out", out_dir)->required();
    ren->add_option("--catalog", catalog_path);
    ren->add_option("--bezel-width-mm", style.bezel_width_mm);
    ren->add_option("--px-per-mm", style.px_per_mm);
    ren->add_option("--background", background, "#rrggbb");
    ren->add_option("--jobs", jobs);

    // train
    auto* tr = app.add_subcommand("train", "train the pruning model from labeled designs");
    std::string labels_path, aggregation = "majority", loss = "logistic";
    TrainConfig tc;
    tr->add_option("--designs", designs_dir)->required();
    tr->add_option("--labels", labels_path)->required();
    tr->add_option("--out", out_file)->required();
    tr->add_option("--catalog", catalog_path);
    tr->add_option("--n-trees", tc.n_trees);
    tr->add_option("--max-depth", tc.max_depth);
    tr->add_option("--learning-rate", tc.learning_rate);
    tr->add_option("--min-samples-leaf", tc.min_samples_leaf);
    tr->add_option("--loss", loss)->check(CLI::IsMember({"logistic", "squared"}));
    tr->add_option("--aggregation", aggregation)->check(CLI::IsMember({"majority", "any", "all"}));
    tr->add_option("--neighbor-threshold-mm", neighbor_threshold);
    tr->add_option("--jobs", jobs);

    // prune
    auto* pr = app.add_subcommand("prune", "score designs and split them into kept and discarded");
    std::string model_path;
    std::optional<double> threshold, keep_fraction;
    pr->add_option("--designs", designs_dir)->required();
    pr->add_option("--model", model_path)->required();
    pr->add_option("--out", out_file)->required();
    pr->add_option("--catalog", catalog_path);
    auto* th_opt = pr->add_option("--threshold", threshold, "keep designs with score >= threshold (default 0.5)");
    pr->add_option("--keep-fraction", keep_fraction, "keep the top fraction by score")->excludes(th_opt);
    pr->add_option("--neighbor-threshold-mm", neighbor_threshold);
    pr->add_option("--jobs", jobs);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "like coverage curve and symmetric like point");
    std::string only_manifest;
    ev->add_option("--labels", labels_path)->required();
    ev->add_option("--only", only_manifest, "restrict to the kept designs of a prune manifest");

    // serve
    auto* sv = app.add_subcommand("serve", "annotation server");
    std::string host = "127.0.0.1", static_dir;
    int port = 8080;
    sv->add_option("--designs", designs_dir)->required();
    sv->add_option("--labels", labels_path)->required();
    sv->add_option("--port", port);
    sv->add_option("--host", host);
    sv->add_option("--static", static_dir, "annotation UI bundle served at /");
    sv->add_option("--catalog", catalog_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*gen) {
            gp.slack_area = slack;
            gp.validate();
            const Catalog cat = catalog_from(catalog_path);
            ContainerSpec spec;
            if (container == "circle") spec = ContainerSpec::circle(diameter);
            else if (container == "ellipse") spec = ContainerSpec::ellipse(width, height);
            else if (container == "teardrop") spec = ContainerSpec::teardrop(length);
            else if (container == "hexagon") spec = ContainerSpec::hexagon(diameter);
            else {
                if (polygon_file.empty()) throw ValidationError("--container polygon needs --polygon FILE");
                spec = ContainerSpec::polygon(points_from_json(read_json_file(polygon_file)));
            }
            spec.outline();  // validate before spawning work
            ensure_dir(out_dir);
            std::vector<std::string> failures(static_cast<std::size_t>(count));
            parallel_for(static_cast<std::size_t>(count), jobs, [&](std::size_t i) {
                GenParams p = gp;
                p.seed = gp.seed + i;
                const std::string id = design_id_for(p.seed);
                try {
                    const Design d = generate(spec, cat, p, id);
                    write_text_file(fs::path(out_dir) / (id + ".json"), design_document(d));
                    spdlog::debug("{}: {} stones", id, d.placements.size());
                } catch (const GenerationFailed& e) {
                    failures[i] = id + ": " + e.what();
                } catch (const ContainerTooSmall& e) {
                    failures[i] = id + ": " + e.what();
                }
            });
            int failed = 0;
            for (const std::string& f : failures)
                if (!f.empty()) spdlog::warn("{}", f), ++failed;
            spdlog::info("generated {} of {} designs into {}", count - failed, count, out_dir);
            return failed == count ? 1 : 0;
        }
        if (*feat) {
            const Catalog cat = catalog_from(catalog_path);
            const auto designs = load_design_dir(designs_dir);
            const FeatureRows fr = compute_features(designs, cat, {neighbor_threshold}, jobs);
            std::string text;
            for (std::size_t i = 0; i < fr.ids.size(); ++i) {
                FeatureVector f{fr.rows[i][0], fr.rows[i][1], fr.rows[i][2], fr.rows[i][3], fr.rows[i][4], fr.rows[i][5]};
                text += features_to_json(fr.ids[i], f).dump() + "\n";
            }
            write_text_file(out_file, text);
            spdlog::info("wrote features for {} of {} designs", fr.ids.size(), designs.size());
            return 0;
        }
        if (*ren) {
            const Catalog cat = catalog_from(catalog_path);
            if (!background.empty()) style.background = parse_hex_color(background);
            style.validate();
            const auto designs = load_design_dir(designs_dir);
            ensure_dir(out_dir);
            std::vector<std::vector<std::string>> warnings(designs.size());
            parallel_for(designs.size(), jobs, [&](std::size_t i) {
                RenderResult r = render_svg_ex(designs[i], cat, style);
                write_text_file(fs::path(out_dir) / (designs[i].design_id + ".svg"), r.svg);
                warnings[i] = std::move(r.warnings);
            });
            for (std::size_t i = 0; i < designs.size(); ++i)
                for (const auto& w : warnings[i]) spdlog::warn("{}: {}", designs[i].design_id, w);
            spdlog::info("rendered {} designs into {}", designs.size(), out_dir);
            return 0;
        }
        if (*tr) {
            tc.loss = parse_loss(loss);
            tc.validate();
            const Catalog cat = catalog_from(catalog_path);
            const auto designs = load_design_dir(designs_dir);
            const auto targets = aggregate_labels(read_labels(labels_path), parse_aggregation(aggregation));
            std::vector<Design> labeled;
            for (const Design& d : designs) {
                if (targets.count(d.design_id))
                    labeled.push_back(d);
                else
                    spdlog::warn("{}: no labels, skipped", d.design_id);
            }
            const FeatureRows fr = compute_features(labeled, cat, {neighbor_threshold}, jobs);
            std::vector<double> y;
            for (const std::string& id : fr.ids) y.push_back(targets.at(id));
            const GbtModel m = train(fr.rows, y, tc);
            write_text_file(out_file, model_document(m));
            spdlog::info("trained {} trees on {} designs", m.trees.size(), fr.ids.size());
            return 0;
        }
        if (*pr) {
            const Catalog cat = catalog_from(catalog_path);
            const GbtModel m = load_model(model_path);
            const auto designs = load_design_dir(designs_dir);
            std::vector<ScoredDesign> scored(designs.size());
            parallel_for(designs.size(), jobs, [&](std::size_t i) {
                scored[i] = score_designs({designs[i]}, cat, m, {neighbor_threshold}).front();
            });
            if (!threshold && !keep_fraction) threshold = 0.5;
            const PruneResult r = prune_scored(std::move(scored), threshold, keep_fraction);
            write_text_file(out_file, prune_manifest(r).dump(2) + "\n");
            spdlog::info("kept {} of {} designs", r.kept.size(), designs.size());
            return 0;
        }
        if (*ev) {
            auto records = read_labels(labels_path);
            if (!only_manifest.empty()) {
                const auto manifest = read_json_file(only_manifest);
                std::set<std::string> kept;
                try {
                    for (const auto& id : manifest.at("kept")) kept.insert(id.get<std::string>());
                } catch (const nlohmann::json::exception& e) {
                    throw ValidationError(only_manifest + ": " + e.what());
                }
                std::erase_if(records, [&](const LabelRecord& r) { return !kept.count(r.design_id); });
            }
            print_curve(LabelMatrix::from_labels(last_wins(records)), std::cout);
            return 0;
        }
        if (*sv) {
            AnnotationService service(load_design_dir(designs_dir), catalog_from(catalog_path), labels_path);
            AnnotationServer server(service, static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
            const int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, [](int) {
                if (g_server) g_server->stop();
            });
            std::signal(SIGTERM, [](int) {
                if (g_server) g_server->stop();
            });
            spdlog::info("serving {} designs on http://{}:{}", service.size(), host, bound);
            server.listen();
            return 0;
        }
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return e.is_io() ? 2 : 1;
    } catch (const nlohmann::json::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 1;
}
