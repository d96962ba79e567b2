#include "promptopt/mock_backend.hpp"

#include "promptopt/errors.hpp"

namespace promptopt {

MockRule mock_rule_fixed(std::string substring, std::string response) {
    MockRule r;
    r.match_substring = std::move(substring);
    r.kind = MockRule::Kind::kFixed;
    r.responses = {std::move(response)};
    return r;
}

MockRule mock_rule_sequence(std::string substring, std::vector<std::string> responses) {
    MockRule r;
    r.match_substring = std::move(substring);
    r.kind = MockRule::Kind::kSequence;
    r.responses = std::move(responses);
    return r;
}

MockRule mock_rule_seeded(std::string substring, std::vector<std::string> responses) {
    MockRule r;
    r.match_substring = std::move(substring);
    r.kind = MockRule::Kind::kSeeded;
    r.responses = std::move(responses);
    return r;
}

MockRule mock_rule_generator(std::string substring,
                             std::function<std::string(const ChatRequest&, int)> fn) {
    MockRule r;
    r.match_substring = std::move(substring);
    r.kind = MockRule::Kind::kGenerator;
    r.generate = std::move(fn);
    return r;
}

MockRule mock_rule_predicate(std::function<bool(const ChatRequest&)> predicate,
                             std::function<std::string(const ChatRequest&, int)> fn) {
    MockRule r;
    r.predicate = std::move(predicate);
    r.kind = MockRule::Kind::kGenerator;
    r.generate = std::move(fn);
    return r;
}

MockBackend::MockBackend(BackendProfile profile, std::vector<MockRule> rules,
                         bool strict, std::optional<std::string> default_response)
    : Backend(std::move(profile)),
      strict_(strict),
      default_response_(std::move(default_response)) {
    std::uint64_t index = 0;
    for (auto& rule : rules) {
        RuleState state;
        state.rule = std::move(rule);
        if (state.rule.kind == MockRule::Kind::kSeeded) {
            state.rng = std::make_unique<SubstreamRng>(this->profile().seed,
                                                       "mock-rule", index);
        }
        rules_.push_back(std::move(state));
        ++index;
    }
}

std::vector<ChatRequest> MockBackend::requests() const {
    std::lock_guard lock(mutex_);
    return seen_;
}

int MockBackend::call_count() const {
    std::lock_guard lock(mutex_);
    return static_cast<int>(seen_.size());
}

Completion MockBackend::do_complete(const ChatRequest& request) {
    std::unique_lock lock(mutex_);
    seen_.push_back(request);
    for (auto& state : rules_) {
        const MockRule& rule = state.rule;
        const bool matched = rule.predicate
                                 ? rule.predicate(request)
                                 : request.user.find(rule.match_substring) !=
                                       std::string::npos;
        if (!matched) {
            continue;
        }
        const int call = state.calls++;
        std::string text;
        switch (rule.kind) {
            case MockRule::Kind::kFixed:
                text = rule.responses.at(0);
                break;
            case MockRule::Kind::kSequence:
                text = rule.responses.at(call % rule.responses.size());
                break;
            case MockRule::Kind::kSeeded:
                text = rule.responses.at(state.rng->uniform_index(rule.responses.size()));
                break;
            case MockRule::Kind::kGenerator: {
                auto fn = rule.generate;
                lock.unlock();  // generators may be arbitrarily slow
                text = fn(request, call);
                lock.lock();
                break;
            }
        }
        return Completion{std::move(text), FinishReason::kStop, std::nullopt};
    }
    if (!strict_ && default_response_) {
        return Completion{*default_response_, FinishReason::kStop, std::nullopt};
    }
    throw Error("mock backend: no rule matches request: " + request.user);
}

}  // namespace promptopt
