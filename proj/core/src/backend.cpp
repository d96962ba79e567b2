#include "promptopt/backend.hpp"

#include <nlohmann/json.hpp>

#include "promptopt/errors.hpp"

namespace promptopt {

RateLimiter::RateLimiter(RateLimit limit) : limit_(limit) {}

RateLimiter::Ticket::Ticket(RateLimiter& limiter) : limiter_(limiter) {
    limiter_.acquire();
}

RateLimiter::Ticket::~Ticket() { limiter_.release(); }

void RateLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] {
        return limit_.max_concurrent <= 0 || in_flight_ < limit_.max_concurrent;
    });
    if (limit_.requests_per_minute > 0) {
        const auto window = std::chrono::minutes(1);
        for (;;) {
            const auto now = std::chrono::steady_clock::now();
            while (!recent_.empty() && now - recent_.front() >= window) {
                recent_.pop_front();
            }
            if (static_cast<int>(recent_.size()) < limit_.requests_per_minute) {
                recent_.push_back(now);
                break;
            }
            cv_.wait_until(lock, recent_.front() + window);
        }
    }
    ++in_flight_;
}

void RateLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    cv_.notify_all();
}

TranscriptLog::TranscriptLog(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) {
        throw Error("cannot open transcript file " + path.string());
    }
}

void TranscriptLog::append(const ChatRequest& request, const Completion& completion) {
    nlohmann::json j{{"model", request.model_name},
                     {"user", request.user},
                     {"temperature", request.temperature},
                     {"response", completion.text}};
    if (request.system) {
        j["system"] = *request.system;
    }
    std::lock_guard lock(mutex_);
    out_ << j.dump() << "\n";
    out_.flush();
}

Backend::Backend(BackendProfile profile)
    : profile_(std::move(profile)), limiter_(profile_.rate) {}

Completion Backend::complete(const ChatRequest& request) {
    RateLimiter::Ticket ticket(limiter_);
    Completion completion = do_complete(request);
    if (completion.finish_reason == FinishReason::kFiltered) {
        throw FilteredError("completion terminated by content filter");
    }
    if (transcript_) {
        transcript_->append(request, completion);
    }
    return completion;
}

ChatRequest Backend::request(std::string user, std::optional<std::string> system) const {
    ChatRequest r;
    r.model_name = profile_.model_name;
    r.system = std::move(system);
    r.user = std::move(user);
    r.temperature = profile_.temperature;
    r.max_tokens = profile_.max_tokens;
    return r;
}

}  // namespace promptopt
