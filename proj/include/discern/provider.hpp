#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace discern {

class Diagnostics;

struct ChatRequest {
    std::string model;
    std::optional<std::string> system;
    std::string user;
    double temperature = 0.0;
    /// Cache discriminator; carries the repeat index ("rep=0", ...).
    std::string tag;
};

struct ChatResponse {
    std::string text;
    nlohmann::json provider_meta = nlohmann::json::object();
    bool from_cache = false;
};

/// Offline stand-in for an LLM endpoint.
///
/// Scorer mode answers "Score: s". The base score is drawn from `weights`
/// (one weight per integer point of [scale_min, scale_max]) using a stream
/// keyed by (seed, user, tag); if the prompt contains any of
/// `defect_markers`, `penalty` is subtracted, floored at scale_min.
///
/// Perturber mode locates the text under revision (between the last ":\n\n"
/// and the trailing "\n\nRevised ...:" line of a perturbation prompt) and
/// replaces its first word with `marker`.
struct MockConfig {
    enum class Mode { scorer, perturber };

    Mode mode = Mode::scorer;
    std::uint64_t seed = 0;
    int scale_min = 1;
    int scale_max = 5;
    /// Default noise: P(1..5) = 0.05, 0.15, 0.30, 0.30, 0.20.
    std::vector<double> weights{0.05, 0.15, 0.30, 0.30, 0.20};
    double penalty = 1.0;
    std::vector<std::string> defect_markers{"[[mock-defect]]"};
    std::string marker = "[[mock-defect]]";

    bool operator==(const MockConfig&) const = default;
};

struct ProviderConfig {
    enum class Kind { openai_compatible, mock };

    /// Profile name; used as the model label in reports.
    std::string name;
    Kind kind = Kind::openai_compatible;
    std::string base_url;
    std::string api_key_env;
    std::string model;
    int max_concurrency = 4;
    int max_retries = 3;
    std::chrono::milliseconds timeout{60000};
    std::chrono::milliseconds backoff_base{500};
    /// Extra body fields passed through verbatim (e.g. top_p).
    nlohmann::json extra = nlohmann::json::object();
    MockConfig mock;
};

/// Stable cache key: SHA-256 hex over every ChatRequest field.
std::string cache_key(const ChatRequest& req);
/// Key used by the file cache. For mock profiles the mock settings are
/// folded in so mock answers stay apart from real ones.
std::string cache_key(const ProviderConfig& cfg, const ChatRequest& req);

/// One upstream call plus up to max_retries retries on transient failure
/// (HTTP 429/5xx, connection errors, timeouts) with exponential backoff.
/// Mock profiles answer through mock_complete.
ChatResponse complete(const ProviderConfig& cfg, const ChatRequest& req);

/// complete() behind a file cache: one JSON file per key under cache_dir.
/// Corrupt entries are treated as misses and reported to `diag` if given.
ChatResponse cached_complete(const ProviderConfig& cfg, const ChatRequest& req,
                             const std::filesystem::path& cache_dir, Diagnostics* diag = nullptr);

ChatResponse mock_complete(const ChatRequest& req, const MockConfig& mock);

/// Blocks while `limit` callers are inside; tracks the peak for tests.
class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(int limit);

    void acquire();
    void release();
    int peak() const;

    class Slot {
    public:
        explicit Slot(ConcurrencyLimiter& l) : l_(l) { l_.acquire(); }
        ~Slot() { l_.release(); }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        ConcurrencyLimiter& l_;
    };

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    int limit_;
    int in_flight_ = 0;
    int peak_ = 0;
};

/// Thread-safe client for one provider profile: shared limiter, optional
/// cache, and upstream call counters.
class ChatClient {
public:
    ChatClient(ProviderConfig cfg, std::optional<std::filesystem::path> cache_dir,
               Diagnostics* diag = nullptr);

    ChatResponse complete(const ChatRequest& req);

    const ProviderConfig& config() const { return cfg_; }
    std::size_t upstream_calls() const { return upstream_calls_.load(); }
    std::size_t cache_hits() const { return cache_hits_.load(); }
    int peak_in_flight() const { return limiter_.peak(); }

private:
    ProviderConfig cfg_;
    std::optional<std::filesystem::path> cache_dir_;
    Diagnostics* diag_;
    ConcurrencyLimiter limiter_;
    std::atomic<std::size_t> upstream_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
/// written to pre-sized, index-addressed storage by the caller.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn);

}  // namespace discern

#include "discern/detail/parallel_for.hpp"
