#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace promptopt {

struct ChatRequest {
    std::string model_name;
    std::optional<std::string> system;
    std::string user;
    double temperature = 0.0;
    std::optional<int> max_tokens;
};

enum class FinishReason { kStop, kLength, kFiltered };

struct TokenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
    int total_tokens = 0;
};

struct Completion {
    std::string text;
    FinishReason finish_reason = FinishReason::kStop;
    std::optional<TokenUsage> usage;
};

struct RetryPolicy {
    int max_attempts = 3;  // total attempts, including the first
    std::chrono::milliseconds initial_backoff{500};
    double backoff_factor = 2.0;
    std::chrono::milliseconds max_backoff{10000};
};

struct RateLimit {
    int max_concurrent = 4;
    int requests_per_minute = 0;  // 0 = unlimited
};

struct BackendProfile {
    std::string base_url;          // empty for mock backends
    std::string api_key_env;       // name of the env var holding the key
    std::string model_name;
    double temperature = 0.0;
    std::optional<int> max_tokens;
    RetryPolicy retry;
    RateLimit rate;
    std::uint64_t seed = 0;        // drives seeded mock rules and retry jitter
};

/// Bounds in-flight requests and, optionally, requests per minute.
class RateLimiter {
public:
    explicit RateLimiter(RateLimit limit);

    class Ticket {
    public:
        explicit Ticket(RateLimiter& limiter);
        ~Ticket();
        Ticket(const Ticket&) = delete;
        Ticket& operator=(const Ticket&) = delete;

    private:
        RateLimiter& limiter_;
    };

private:
    void acquire();
    void release();

    RateLimit limit_;
    std::mutex mutex_;
    std::condition_variable cv_;
    int in_flight_ = 0;
    std::deque<std::chrono::steady_clock::time_point> recent_;
};

/// Append-only request/response log, one JSON object per line.
class TranscriptLog {
public:
    explicit TranscriptLog(const std::filesystem::path& path);
    void append(const ChatRequest& request, const Completion& completion);

private:
    std::mutex mutex_;
    std::ofstream out_;
};

/// Chat-completion access shared by the optimizer, target and judge roles.
/// complete() is safe to call from concurrent evaluators; the rate limiter
/// is the single synchronization point.
class Backend {
public:
    explicit Backend(BackendProfile profile);
    virtual ~Backend() = default;

    const BackendProfile& profile() const { return profile_; }
    void set_transcript(std::shared_ptr<TranscriptLog> log) { transcript_ = std::move(log); }

    Completion complete(const ChatRequest& request);

    /// Request with this backend's configured model, temperature and cap.
    ChatRequest request(std::string user,
                        std::optional<std::string> system = std::nullopt) const;

protected:
    virtual Completion do_complete(const ChatRequest& request) = 0;

private:
    BackendProfile profile_;
    RateLimiter limiter_;
    std::shared_ptr<TranscriptLog> transcript_;
};

}  // namespace promptopt
