#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "gemset/annotation_server.hpp"

using namespace gemset;
namespace fs = std::filesystem;

namespace {

std::vector<Design> corpus(int n) {
    std::vector<Design> v;
    for (int i = 0; i < n; ++i) {
        Design d;
        d.design_id = "d-" + std::to_string(100 + i);
        d.container_spec = ContainerSpec::circle(30);
        d.container = d.container_spec.outline();
        for (int k = 0; k <= i % 3; ++k) d.placements.push_back({k, kRound, 3, Pose(-8.0 + 8 * k, 0, 0)});
        v.push_back(std::move(d));
    }
    return v;
}

fs::path fresh(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove(p);
    return p;
}

// Runs the server on an ephemeral port for the lifetime of the fixture.
struct Running {
    AnnotationServer server;
    int port;
    std::thread th;
    Running(AnnotationService& s, std::optional<fs::path> dir = std::nullopt)
        : server(s, std::move(dir)), port(server.bind("127.0.0.1", 0)), th([this] { server.listen(); }) {
        server.wait_until_ready();
    }
    ~Running() {
        server.stop();
        th.join();
    }
    httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

nlohmann::json label(const std::string& d, const std::string& j, int v) {
    return {{"design_id", d}, {"judge_id", j}, {"label", v}};
}

}  // namespace

TEST(Service, NextUnlabeledIsSetDifference) {
    AnnotationService s(corpus(12), default_catalog(), fresh("gemset_srv_a.jsonl"));
    const auto first = s.next_unlabeled("alice", 100);
    ASSERT_EQ(first.size(), 12u);
    std::set<std::string> all;
    for (const auto& d : first) all.insert(d.design_id);
    EXPECT_EQ(all.size(), 12u);

    std::set<std::string> done;
    for (int k = 0; k < 5; ++k) {
        s.record_label(label(first[static_cast<std::size_t>(2 * k)].design_id, "alice", k % 2));
        done.insert(first[static_cast<std::size_t>(2 * k)].design_id);
    }
    s.record_label(label(first[1].design_id, "bob", 1));  // other judges don't matter
    const auto rest = s.next_unlabeled("alice", 100);
    std::set<std::string> got;
    for (const auto& d : rest) got.insert(d.design_id);
    std::set<std::string> want;
    std::set_difference(all.begin(), all.end(), done.begin(), done.end(), std::inserter(want, want.end()));
    EXPECT_EQ(got, want);

    // Order is the judge's fixed order with labeled ids removed.
    std::vector<std::string> expect_order;
    for (const auto& d : first)
        if (!done.count(d.design_id)) expect_order.push_back(d.design_id);
    ASSERT_EQ(rest.size(), expect_order.size());
    for (std::size_t i = 0; i < rest.size(); ++i) EXPECT_EQ(rest[i].design_id, expect_order[i]);
    EXPECT_EQ(s.next_unlabeled("alice", 3).size(), 3u);
    EXPECT_THROW(s.next_unlabeled("", 3), ValidationError);
}

TEST(Service, ReloadsExistingLog) {
    const fs::path p = fresh("gemset_srv_b.jsonl");
    {
        AnnotationService s(corpus(4), default_catalog(), p);
        s.record_label(label("d-100", "j", 1));
        s.record_label(label("d-101", "j", 0));
        s.record_label(label("d-100", "j", 0));
    }
    AnnotationService again(corpus(4), default_catalog(), p);
    const auto st = again.stats();
    EXPECT_EQ(st["total_labels"], 3);
    EXPECT_EQ(st["labeled_pairs"], 2);
    EXPECT_EQ(again.next_unlabeled("j", 10).size(), 2u);
    EXPECT_THROW(again.record_label(label("d-999", "j", 1)), NotFoundError);
    EXPECT_THROW(AnnotationService(corpus(2), default_catalog(), "/nonexistent/dir/labels.jsonl"), IoError);
}

TEST(Http, Endpoints) {
    AnnotationService s(corpus(5), default_catalog(), fresh("gemset_srv_c.jsonl"));
    Running r(s);
    auto cli = r.client();

    auto root = cli.Get("/");
    ASSERT_TRUE(root);
    EXPECT_EQ(root->status, 200);
    EXPECT_NE(root->body.find("<html>"), std::string::npos);

    auto list = cli.Get("/api/designs?judge=ann&count=2");
    ASSERT_TRUE(list);
    EXPECT_EQ(list->status, 200);
    const auto j = nlohmann::json::parse(list->body);
    ASSERT_EQ(j["designs"].size(), 2u);
    const std::string id = j["designs"][0]["design_id"];
    EXPECT_EQ(j["designs"][0]["svg_url"], "/api/designs/" + id + "/svg");

    auto svg = cli.Get(j["designs"][0]["svg_url"].get<std::string>());
    ASSERT_TRUE(svg);
    EXPECT_EQ(svg->status, 200);
    EXPECT_EQ(svg->get_header_value("Content-Type"), "image/svg+xml");
    EXPECT_NE(svg->body.find("<svg"), std::string::npos);

    EXPECT_EQ(cli.Get("/api/designs/d-nope/svg")->status, 404);
    EXPECT_EQ(cli.Get("/api/designs")->status, 400);
    EXPECT_EQ(cli.Get("/api/designs?judge=ann&count=two")->status, 400);
    EXPECT_EQ(cli.Post("/api/labels", "{not json", "application/json")->status, 400);
    EXPECT_EQ(cli.Post("/api/labels", label(id, "ann", 2).dump(), "application/json")->status, 400);
    EXPECT_EQ(cli.Post("/api/labels", label("d-nope", "ann", 1).dump(), "application/json")->status, 404);

    auto ok = cli.Post("/api/labels", label(id, "ann", 1).dump(), "application/json");
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->status, 200);
    EXPECT_FALSE(nlohmann::json::parse(ok->body)["record"]["ts"].get<std::string>().empty());

    const auto after = nlohmann::json::parse(cli.Get("/api/designs?judge=ann&count=10")->body);
    EXPECT_EQ(after["designs"].size(), 4u);
    for (const auto& d : after["designs"]) EXPECT_NE(d["design_id"], id);
}

TEST(Http, ConcurrentPostsAllLandOnce) {
    const fs::path log = fresh("gemset_srv_d.jsonl");
    AnnotationService s(corpus(10), default_catalog(), log);
    Running r(s);
    std::vector<std::thread> ts;
    std::atomic<int> ok{0};
    for (int t = 0; t < 10; ++t)
        ts.emplace_back([&, t] {
            auto cli = r.client();
            for (int k = 0; k < 10; ++k) {
                auto res = cli.Post("/api/labels", label("d-" + std::to_string(100 + k), "j" + std::to_string(t), (t + k) % 2).dump(),
                                    "application/json");
                if (res && res->status == 200) ++ok;
            }
        });
    for (auto& t : ts) t.join();
    EXPECT_EQ(ok.load(), 100);

    // Every line is a complete record; 100 distinct pairs.
    std::ifstream in(log);
    std::string line;
    std::set<std::pair<std::string, std::string>> pairs;
    std::map<std::string, int> per_judge;
    int lines = 0;
    while (std::getline(in, line)) {
        const auto rec = label_from_json(nlohmann::json::parse(line));
        pairs.insert({rec.design_id, rec.judge_id});
        ++per_judge[rec.judge_id];
        ++lines;
    }
    EXPECT_EQ(lines, 100);
    EXPECT_EQ(pairs.size(), 100u);

    // Stats agree with a recount of the log.
    const auto st = nlohmann::json::parse(r.client().Get("/api/stats")->body);
    EXPECT_EQ(st["total_labels"], 100);
    EXPECT_EQ(st["labeled_pairs"], 100);
    for (const auto& [j, n] : per_judge) EXPECT_EQ(st["judges"][j], n);
    for (const auto& [d, n] : st["designs"].items()) EXPECT_EQ(n, 10) << d;
    EXPECT_DOUBLE_EQ(st["like_coverage_50"].get<double>(), like_coverage(LabelMatrix::from_labels(last_wins(read_labels(log))), 0.5));
}

TEST(Http, StaticDirectory) {
    const fs::path dir = fs::temp_directory_path() / "gemset_srv_static";
    fs::create_directories(dir);
    std::ofstream(dir / "index.html") << "<html>bundle</html>";
    AnnotationService s(corpus(2), default_catalog(), fresh("gemset_srv_e.jsonl"));
    Running r(s, dir);
    auto res = r.client().Get("/");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->body, "<html>bundle</html>");
    EXPECT_EQ(r.client().Get("/api/stats")->status, 200);
    EXPECT_THROW(AnnotationServer(s, fs::path("/nonexistent/static")), IoError);
}
