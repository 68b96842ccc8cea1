#include "discern/provider.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "discern/diagnostics.hpp"
#include "discern/error.hpp"
#include "discern/hashing.hpp"
#include "discern/rng.hpp"

namespace discern {

using json = nlohmann::json;

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing slash
};

Endpoint parse_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("base_url '" + url + "' lacks a scheme", "InvalidProvider");
    }
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw ConfigError("base_url '" + url + "' must be http or https", "InvalidProvider");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.origin = url.substr(0, path_start);
    if (path_start != std::string::npos) ep.prefix = url.substr(path_start);
    while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
    // An OpenAI-style base often already ends in /v1.
    if (ep.prefix.ends_with("/v1")) ep.prefix.resize(ep.prefix.size() - 3);
    return ep;
}

std::string format_score(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", s);
    return buf;
}

json request_json(const ChatRequest& req) {
    return json::array({req.model, req.system ? json(*req.system) : json(nullptr), req.user,
                        req.temperature, req.tag});
}

ChatResponse http_complete(const ProviderConfig& cfg, const ChatRequest& req) {
    const auto ep = parse_base_url(cfg.base_url);
    std::string key;
    if (!cfg.api_key_env.empty()) {
        const char* v = std::getenv(cfg.api_key_env.c_str());
        if (!v || !*v) {
            throw AuthError("environment variable " + cfg.api_key_env + " is not set", 0);
        }
        key = v;
    }

    json body = cfg.extra.is_object() ? cfg.extra : json::object();
    json messages = json::array();
    if (req.system) messages.push_back({{"role", "system"}, {"content", *req.system}});
    messages.push_back({{"role", "user"}, {"content", req.user}});
    body["model"] = req.model;
    body["messages"] = std::move(messages);
    body["temperature"] = req.temperature;
    const auto payload = body.dump();

    httplib::Client cli(ep.origin);
    const auto secs = [](std::chrono::milliseconds ms) {
        return std::chrono::duration_cast<std::chrono::microseconds>(ms);
    };
    cli.set_connection_timeout(secs(cfg.timeout));
    cli.set_read_timeout(secs(cfg.timeout));
    cli.set_write_timeout(secs(cfg.timeout));
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

    const auto path = ep.prefix + "/v1/chat/completions";
    std::string last_error;
    int last_status = 0;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(cfg.backoff_base * (1 << (attempt - 1)));
        auto res = cli.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "connection error: " + httplib::to_string(res.error());
            last_status = 0;
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw AuthError("provider '" + cfg.name + "' rejected credentials (HTTP " +
                                std::to_string(res->status) + ")",
                            res->status);
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            last_status = res->status;
            continue;
        }
        if (res->status != 200) {
            throw ProviderError("HttpError",
                                "provider '" + cfg.name + "' returned HTTP " + std::to_string(res->status),
                                res->status);
        }
        try {
            const auto j = json::parse(res->body);
            ChatResponse out;
            out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            out.provider_meta = {{"retries", attempt}, {"status", res->status}};
            if (j.contains("usage")) out.provider_meta["usage"] = j["usage"];
            return out;
        } catch (const json::exception& e) {
            throw ProviderError("MalformedResponse",
                                "provider '" + cfg.name + "' sent a malformed body: " + e.what(), 200);
        }
    }
    throw ProviderError("RetriesExhausted",
                        "provider '" + cfg.name + "' failed after " + std::to_string(cfg.max_retries + 1) +
                            " attempts: " + last_error,
                        last_status);
}

std::filesystem::path cache_file(const std::filesystem::path& dir, const std::string& key) {
    return dir / (key + ".json");
}

std::optional<ChatResponse> cache_read(const std::filesystem::path& dir, const std::string& key,
                                       Diagnostics* diag) {
    const auto path = cache_file(dir, key);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    try {
        const auto j = json::parse(in);
        ChatResponse r;
        r.text = j.at("text").get<std::string>();
        r.provider_meta = j.value("provider_meta", json::object());
        r.from_cache = true;
        return r;
    } catch (const json::exception&) {
        if (diag) diag->warn("provider", "corrupt cache entry " + path.string() + " ignored");
        return std::nullopt;
    }
}

void cache_write(const std::filesystem::path& dir, const std::string& key, const ChatRequest& req,
                 const ChatResponse& resp) {
    std::filesystem::create_directories(dir);
    const json j{{"request", request_json(req)}, {"text", resp.text}, {"provider_meta", resp.provider_meta}};
    std::ostringstream suffix;
    suffix << ".tmp." << std::this_thread::get_id();
    const auto final_path = cache_file(dir, key);
    auto tmp = final_path;
    tmp += suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << j.dump();
        if (!out) throw DataError("CacheWrite", "cannot write cache entry " + tmp.string());
    }
    std::filesystem::rename(tmp, final_path);
}

}  // namespace

std::string cache_key(const ChatRequest& req) { return sha256_hex(request_json(req).dump()); }

std::string cache_key(const ProviderConfig& cfg, const ChatRequest& req) {
    if (cfg.kind != ProviderConfig::Kind::mock) return cache_key(req);
    // Mock answers must never be served for a real endpoint of the same
    // model name, nor for a mock with different settings.
    const json m{cfg.mock.mode == MockConfig::Mode::scorer ? "scorer" : "perturber",
                 cfg.mock.seed, cfg.mock.scale_min, cfg.mock.scale_max, cfg.mock.weights,
                 cfg.mock.penalty, cfg.mock.defect_markers, cfg.mock.marker};
    auto keyed = req;
    keyed.model = "mock:" + sha256_hex(m.dump()) + ":" + req.model;
    return cache_key(keyed);
}

ChatResponse mock_complete(const ChatRequest& req, const MockConfig& mock) {
    if (mock.mode == MockConfig::Mode::perturber) {
        const auto revised = req.user.rfind("\n\nRevised ");
        const auto head = revised == std::string::npos ? req.user.size() : revised;
        const auto label = req.user.rfind(":\n\n", head);
        const auto start = label == std::string::npos ? 0 : label + 3;
        std::string text = req.user.substr(start, head - start);
        auto b = text.find_first_not_of(" \t\n");
        if (b == std::string::npos) return {mock.marker, {{"mock", true}}, false};
        auto e = text.find_first_of(" \t\n", b);
        if (e == std::string::npos) e = text.size();
        text.replace(b, e - b, mock.marker);
        return {text, {{"mock", true}}, false};
    }

    const int points = mock.scale_max - mock.scale_min + 1;
    if (points <= 0 || static_cast<int>(mock.weights.size()) != points) {
        throw ConfigError("mock weights must have one entry per scale point", "InvalidProvider");
    }
    double total = 0;
    for (double w : mock.weights) total += w;
    const auto key = fnv1a64(req.tag, fnv1a64(req.user, stream_key(static_cast<std::int64_t>(mock.seed),
                                                                   "mock", "scorer")));
    RngStream rng(key);
    const double u = rng.uniform01() * total;
    int base = mock.scale_max;
    double acc = 0;
    for (int i = 0; i < points; ++i) {
        acc += mock.weights[static_cast<std::size_t>(i)];
        if (u < acc) {
            base = mock.scale_min + i;
            break;
        }
    }
    double score = base;
    for (const auto& m : mock.defect_markers) {
        if (!m.empty() && req.user.find(m) != std::string::npos) {
            score = std::max<double>(mock.scale_min, score - mock.penalty);
            break;
        }
    }
    return {"Score: " + format_score(score), {{"mock", true}}, false};
}

ChatResponse complete(const ProviderConfig& cfg, const ChatRequest& req) {
    if (cfg.kind == ProviderConfig::Kind::mock) return mock_complete(req, cfg.mock);
    return http_complete(cfg, req);
}

ChatResponse cached_complete(const ProviderConfig& cfg, const ChatRequest& req,
                             const std::filesystem::path& cache_dir, Diagnostics* diag) {
    const auto key = cache_key(cfg, req);
    if (auto hit = cache_read(cache_dir, key, diag)) return *hit;
    auto resp = complete(cfg, req);
    cache_write(cache_dir, key, req, resp);
    return resp;
}

ConcurrencyLimiter::ConcurrencyLimiter(int limit) : limit_(std::max(limit, 1)) {}

void ConcurrencyLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
}

void ConcurrencyLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    cv_.notify_one();
}

int ConcurrencyLimiter::peak() const {
    std::lock_guard lock(mutex_);
    return peak_;
}

ChatClient::ChatClient(ProviderConfig cfg, std::optional<std::filesystem::path> cache_dir,
                       Diagnostics* diag)
    : cfg_(std::move(cfg)), cache_dir_(std::move(cache_dir)), diag_(diag), limiter_(cfg_.max_concurrency) {}

ChatResponse ChatClient::complete(const ChatRequest& req) {
    std::string key;
    if (cache_dir_) {
        key = cache_key(cfg_, req);
        if (auto hit = cache_read(*cache_dir_, key, diag_)) {
            ++cache_hits_;
            return *hit;
        }
    }
    ChatResponse resp;
    {
        ConcurrencyLimiter::Slot slot(limiter_);
        ++upstream_calls_;
        resp = discern::complete(cfg_, req);
    }
    if (cache_dir_) cache_write(*cache_dir_, key, req, resp);
    return resp;
}

}  // namespace discern
