#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "promptopt/backend.hpp"
#include "promptopt/rng.hpp"

namespace promptopt {

/// One scripted rule: a matcher plus a response strategy. Rules are checked
/// in order; the first match wins.
struct MockRule {
    /// Either a literal substring of the user message, or a whole-request
    /// predicate (the predicate wins when both are set).
    std::string match_substring;
    std::function<bool(const ChatRequest&)> predicate;

    enum class Kind { kFixed, kSequence, kSeeded, kGenerator };
    Kind kind = Kind::kFixed;
    std::vector<std::string> responses;  // fixed uses [0]; sequence cycles
    /// Generator rules compute the response from the request and the rule's
    /// zero-based call index.
    std::function<std::string(const ChatRequest&, int)> generate;
};

MockRule mock_rule_fixed(std::string substring, std::string response);
MockRule mock_rule_sequence(std::string substring, std::vector<std::string> responses);
/// Emulates temperature: each call draws one of the scripted responses from
/// the rule's own substream of the profile seed.
MockRule mock_rule_seeded(std::string substring, std::vector<std::string> responses);
MockRule mock_rule_generator(std::string substring,
                             std::function<std::string(const ChatRequest&, int)> fn);
MockRule mock_rule_predicate(std::function<bool(const ChatRequest&)> predicate,
                             std::function<std::string(const ChatRequest&, int)> fn);

/// Deterministic in-process stand-in for a chat endpoint.
class MockBackend : public Backend {
public:
    MockBackend(BackendProfile profile, std::vector<MockRule> rules,
                bool strict = true,
                std::optional<std::string> default_response = std::nullopt);

    /// Requests seen so far, in completion order.
    std::vector<ChatRequest> requests() const;
    int call_count() const;

protected:
    Completion do_complete(const ChatRequest& request) override;

private:
    struct RuleState {
        MockRule rule;
        int calls = 0;
        std::unique_ptr<SubstreamRng> rng;  // seeded rules only
    };

    bool strict_;
    std::optional<std::string> default_response_;
    mutable std::mutex mutex_;
    std::vector<RuleState> rules_;
    std::vector<ChatRequest> seen_;
};

}  // namespace promptopt
