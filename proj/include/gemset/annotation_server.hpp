#pragma once

// Label collection over HTTP. AnnotationService holds the corpus and the
// label log and is usable without a socket; AnnotationServer exposes it via
// cpp-httplib.

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "gemset/catalog.hpp"
#include "gemset/design.hpp"
#include "gemset/error.hpp"
#include "gemset/metrics.hpp"
#include "gemset/renderer.hpp"
#include "httplib.h"
#include "json.hpp"

namespace gemset {

class NotFoundError : public Error {
public:
    using Error::Error;
};

struct DesignDescriptor {
    std::string design_id;
    std::string svg_url;
    std::size_t n_stones = 0;
};

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Append-only JSONL writer. Each record is one write(2) followed by fsync.
class LabelLog {
public:
    explicit LabelLog(const std::filesystem::path& path) : path_(path) {
        fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) throw IoError("cannot open label log " + path.string());
    }
    LabelLog(const LabelLog&) = delete;
    LabelLog& operator=(const LabelLog&) = delete;
    ~LabelLog() {
        if (fd_ >= 0) ::close(fd_);
    }

    void append(const std::string& line) {
        const std::string data = line + "\n";
        std::size_t off = 0;
        while (off < data.size()) {
            const ssize_t n = ::write(fd_, data.data() + off, data.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw IoError("write failed for " + path_.string());
            }
            off += static_cast<std::size_t>(n);
        }
        if (::fsync(fd_) != 0) throw IoError("fsync failed for " + path_.string());
    }

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

class AnnotationService {
public:
    AnnotationService(std::vector<Design> designs, Catalog catalog, const std::filesystem::path& labels_path,
                      RenderStyle style = {})
        : catalog_(std::move(catalog)), style_(style) {
        std::sort(designs.begin(), designs.end(), [](const Design& a, const Design& b) { return a.design_id < b.design_id; });
        for (Design& d : designs) {
            const std::string id = d.design_id;
            if (!designs_.emplace(id, std::move(d)).second) throw ValidationError("duplicate design_id " + id);
            ids_.push_back(id);
        }
        if (std::filesystem::exists(labels_path))
            for (const LabelRecord& r : read_labels(labels_path)) apply(r);
        log_ = std::make_unique<LabelLog>(labels_path);
    }

    std::size_t size() const { return ids_.size(); }

    /// Designs the judge has not labeled, in the judge's fixed shuffled order.
    std::vector<DesignDescriptor> next_unlabeled(const std::string& judge_id, std::size_t count) const {
        if (judge_id.empty()) throw ValidationError("judge id must be non-empty");
        std::vector<std::string> order = ids_;
        std::mt19937_64 rng(std::stoull(fnv1a_hex(judge_id), nullptr, 16));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        std::shared_lock lock(mu_);
        std::vector<DesignDescriptor> out;
        for (const std::string& id : order) {
            if (out.size() >= count) break;
            if (labels_.count({id, judge_id})) continue;
            out.push_back({id, "/api/designs/" + id + "/svg", designs_.at(id).placements.size()});
        }
        return out;
    }

    /// Durably appends the label, then makes it visible to readers.
    LabelRecord record_label(const nlohmann::json& body) {
        LabelRecord r = label_from_json(body);
        if (!designs_.count(r.design_id)) throw NotFoundError("unknown design_id " + r.design_id);
        r.ts = utc_timestamp();
        std::lock_guard write(write_mu_);
        log_->append(label_to_json(r).dump());
        std::unique_lock lock(mu_);
        apply(r);
        return r;
    }

    nlohmann::json stats() const {
        std::shared_lock lock(mu_);
        nlohmann::json judges = nlohmann::json::object(), per_design = nlohmann::json::object();
        std::map<std::string, int> jc;
        std::map<std::string, int> dc;
        for (const std::string& id : ids_) dc[id] = 0;
        for (const auto& [key, v] : labels_) {
            ++jc[key.second];
            ++dc[key.first];
        }
        for (const auto& [k, v] : jc) judges[k] = v;
        for (const auto& [k, v] : dc) per_design[k] = v;
        nlohmann::json cov = nullptr;
        if (!labels_.empty()) cov = like_coverage(LabelMatrix::from_labels(labels_), 0.5);
        return {{"total_labels", total_}, {"labeled_pairs", labels_.size()}, {"designs_total", ids_.size()},
                {"judges", judges},       {"designs", per_design},           {"like_coverage_50", cov}};
    }

    std::optional<std::string> svg(const std::string& design_id) const {
        const auto it = designs_.find(design_id);
        if (it == designs_.end()) return std::nullopt;
        std::lock_guard lock(svg_mu_);
        auto c = svg_cache_.find(design_id);
        if (c == svg_cache_.end()) c = svg_cache_.emplace(design_id, render_svg(it->second, catalog_, style_)).first;
        return c->second;
    }

private:
    void apply(const LabelRecord& r) {
        labels_[{r.design_id, r.judge_id}] = r.label;
        ++total_;
    }

    Catalog catalog_;
    RenderStyle style_;
    std::map<std::string, Design> designs_;
    std::vector<std::string> ids_;
    mutable std::shared_mutex mu_;
    std::mutex write_mu_;
    LabelMap labels_;
    std::size_t total_ = 0;
    std::unique_ptr<LabelLog> log_;
    mutable std::mutex svg_mu_;
    mutable std::map<std::string, std::string> svg_cache_;
};

inline constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>gemset annotation</title></head>"
    "<body><h1>gemset annotation server</h1><p>No UI bundle configured. API: "
    "<code>GET /api/designs?judge=ID&amp;count=N</code>, <code>GET /api/designs/ID/svg</code>, "
    "<code>POST /api/labels</code>, <code>GET /api/stats</code>.</p></body></html>";

class AnnotationServer {
public:
    AnnotationServer(AnnotationService& service, std::optional<std::filesystem::path> static_dir = std::nullopt)
        : service_(service) {
        auto json_reply = [](httplib::Response& res, int status, const nlohmann::json& j) {
            res.status = status;
            res.set_content(j.dump(), "application/json");
        };
        auto error_reply = [json_reply](httplib::Response& res, int status, const std::string& msg) {
            json_reply(res, status, {{"error", msg}});
        };

        svr_.Get("/api/designs", [this, json_reply, error_reply](const httplib::Request& req, httplib::Response& res) {
            const std::string judge = req.get_param_value("judge");
            if (judge.empty()) return error_reply(res, 400, "missing judge parameter");
            std::size_t count = 10;
            if (req.has_param("count")) {
                try {
                    std::size_t used = 0;
                    const std::string s = req.get_param_value("count");
                    const long v = std::stol(s, &used);
                    if (used != s.size() || v < 0) throw std::invalid_argument(s);
                    count = static_cast<std::size_t>(v);
                } catch (const std::exception&) {
                    return error_reply(res, 400, "count must be a non-negative integer");
                }
            }
            nlohmann::json arr = nlohmann::json::array();
            for (const DesignDescriptor& d : service_.next_unlabeled(judge, count))
                arr.push_back({{"design_id", d.design_id}, {"svg_url", d.svg_url}, {"n_stones", d.n_stones}});
            json_reply(res, 200, {{"designs", arr}});
        });
        svr_.Get(R"(/api/designs/([^/]+)/svg)", [this, error_reply](const httplib::Request& req, httplib::Response& res) {
            const auto svg = service_.svg(req.matches[1]);
            if (!svg) return error_reply(res, 404, "unknown design_id");
            res.set_content(*svg, "image/svg+xml");
        });
        svr_.Post("/api/labels", [this, json_reply, error_reply](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                return error_reply(res, 400, "body is not valid JSON");
            }
            try {
                const LabelRecord r = service_.record_label(body);
                json_reply(res, 200, {{"ok", true}, {"record", label_to_json(r)}});
            } catch (const NotFoundError& e) {
                error_reply(res, 404, e.what());
            } catch (const ValidationError& e) {
                error_reply(res, 400, e.what());
            } catch (const IoError& e) {
                error_reply(res, 500, e.what());
            }
        });
        svr_.Get("/api/stats", [this, json_reply](const httplib::Request&, httplib::Response& res) {
            json_reply(res, 200, service_.stats());
        });
        if (static_dir) {
            if (!std::filesystem::is_directory(*static_dir)) throw IoError("static directory not found: " + static_dir->string());
            svr_.set_mount_point("/", static_dir->string());
        } else {
            svr_.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kPlaceholderPage, "text/html"); });
        }
    }

    /// Binds to host:port (port 0 picks a free port); returns the bound port.
    int bind(const std::string& host, int port) {
        const int p = port == 0 ? svr_.bind_to_any_port(host) : (svr_.bind_to_port(host, port) ? port : -1);
        if (p < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
        return p;
    }
    bool listen() { return svr_.listen_after_bind(); }
    void stop() { svr_.stop(); }
    void wait_until_ready() { svr_.wait_until_ready(); }

private:
    AnnotationService& service_;
    httplib::Server svr_;
};

}  // namespace gemset
