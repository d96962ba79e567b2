#pragma once

#include <string>

#include "promptopt/backend.hpp"

namespace promptopt {

/// Splits "https://host:port/prefix" into the client target and path prefix.
struct ParsedBaseUrl {
    std::string host_and_scheme;  // e.g. "https://api.example.com:8443"
    std::string path_prefix;      // e.g. "/v1"
};
ParsedBaseUrl parse_base_url(const std::string& base_url);

/// OpenAI-compatible chat-completions client. Retries timeouts, connection
/// failures and 408/429/5xx with exponential backoff and jitter; other HTTP
/// errors surface immediately as ApiError.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendProfile profile);

protected:
    Completion do_complete(const ChatRequest& request) override;

private:
    ParsedBaseUrl url_;
    std::string api_key_;
};

}  // namespace promptopt
