#include "promptopt/http_backend.hpp"

#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "promptopt/errors.hpp"
#include "promptopt/rng.hpp"

namespace promptopt {

using nlohmann::json;

ParsedBaseUrl parse_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError(fmt::format("base_url \"{}\": missing scheme", base_url));
    }
    const auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {base_url, ""};
    }
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') {
        prefix.pop_back();
    }
    return {base_url.substr(0, path_start), prefix};
}

namespace {

bool retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& retry, int attempt,
                                        SubstreamRng& jitter) {
    double ms = static_cast<double>(retry.initial_backoff.count());
    for (int i = 0; i < attempt; ++i) {
        ms *= retry.backoff_factor;
    }
    ms = std::min(ms, static_cast<double>(retry.max_backoff.count()));
    ms *= 0.5 + 0.5 * jitter.uniform_real();
    return std::chrono::milliseconds(static_cast<long>(ms));
}

FinishReason parse_finish_reason(const std::string& s) {
    if (s == "length") return FinishReason::kLength;
    if (s == "content_filter") return FinishReason::kFiltered;
    return FinishReason::kStop;
}

}  // namespace

HttpBackend::HttpBackend(BackendProfile profile)
    : Backend(std::move(profile)), url_(parse_base_url(this->profile().base_url)) {
    if (!this->profile().api_key_env.empty()) {
        if (const char* key = std::getenv(this->profile().api_key_env.c_str())) {
            api_key_ = key;
        }
    }
}

Completion HttpBackend::do_complete(const ChatRequest& request) {
    json messages = json::array();
    if (request.system) {
        messages.push_back({{"role", "system"}, {"content", *request.system}});
    }
    messages.push_back({{"role", "user"}, {"content", request.user}});
    json body{{"model", request.model_name},
              {"messages", std::move(messages)},
              {"temperature", request.temperature}};
    if (request.max_tokens) {
        body["max_tokens"] = *request.max_tokens;
    }
    const std::string payload = body.dump();
    const std::string path = url_.path_prefix + "/chat/completions";

    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }

    const RetryPolicy& retry = profile().retry;
    SubstreamRng jitter(profile().seed, "retry-jitter", fnv1a(request.user));
    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, retry.max_attempts); ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff_delay(retry, attempt - 1, jitter));
        }
        httplib::Client client(url_.host_and_scheme);
        client.set_connection_timeout(30, 0);
        client.set_read_timeout(600, 0);
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;  // connection failure or timeout
        }
        if (res->status >= 200 && res->status < 300) {
            json reply = json::parse(res->body);
            const auto& choices = reply.at("choices");
            if (choices.empty()) {
                throw ApiError(res->status, "chat response carries no choices");
            }
            const auto& first = choices.at(0);
            Completion completion;
            completion.text = first.at("message").at("content").get<std::string>();
            completion.finish_reason =
                parse_finish_reason(first.value("finish_reason", "stop"));
            if (reply.contains("usage")) {
                const auto& u = reply["usage"];
                completion.usage = TokenUsage{u.value("prompt_tokens", 0),
                                              u.value("completion_tokens", 0),
                                              u.value("total_tokens", 0)};
            }
            return completion;
        }
        if (!retryable_status(res->status)) {
            throw ApiError(res->status,
                           fmt::format("chat endpoint returned {}: {}", res->status,
                                       res->body));
        }
        last_error = fmt::format("HTTP {}", res->status);
    }
    throw TransportError(fmt::format("chat request failed after {} attempts: {}",
                                     std::max(1, retry.max_attempts), last_error));
}

}  // namespace promptopt
