#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "promptopt/errors.hpp"
#include "promptopt/http_backend.hpp"
#include "promptopt/mock_backend.hpp"
#include "support/test_support.hpp"

namespace promptopt {
namespace {

BackendProfile mock_profile(std::uint64_t seed = 0, int max_concurrent = 4) {
    BackendProfile p;
    p.model_name = "mock";
    p.seed = seed;
    p.rate.max_concurrent = max_concurrent;
    return p;
}

TEST(MockBackend, ScriptedEcho) {
    MockBackend mock(mock_profile(), {mock_rule_fixed("hello", "world")});
    EXPECT_EQ(mock.complete(mock.request("hello there")).text, "world");
}

TEST(MockBackend, FirstMatchingRuleWins) {
    MockBackend mock(mock_profile(), {mock_rule_fixed("give 3 reasons", "R1"),
                                      mock_rule_fixed("reasons", "R2")});
    EXPECT_EQ(mock.complete(mock.request("please give 3 reasons why")).text, "R1");
}

TEST(MockBackend, StrictModeErrorCarriesRequest) {
    MockBackend mock(mock_profile(), {mock_rule_fixed("needle", "thread")});
    try {
        mock.complete(mock.request("zzz-unmatched-zzz"));
        FAIL() << "expected Error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("zzz-unmatched-zzz"), std::string::npos);
    }
}

TEST(MockBackend, DefaultResponseWhenLenient) {
    MockBackend mock(mock_profile(), {}, /*strict=*/false, "fallback");
    EXPECT_EQ(mock.complete(mock.request("anything")).text, "fallback");
}

TEST(MockBackend, SeededModeReproducesSequences) {
    auto transcript = [](MockBackend& mock) {
        std::vector<std::string> out;
        for (int i = 0; i < 12; ++i) {
            out.push_back(mock.complete(mock.request("pick one")).text);
        }
        return out;
    };
    MockBackend a(mock_profile(99), {mock_rule_seeded("pick", {"x", "y"})});
    MockBackend b(mock_profile(99), {mock_rule_seeded("pick", {"x", "y"})});
    const auto ta = transcript(a);
    EXPECT_EQ(ta, transcript(b));
    // both scripted responses actually show up
    EXPECT_NE(std::count(ta.begin(), ta.end(), "x"), 0);
    EXPECT_NE(std::count(ta.begin(), ta.end(), "y"), 0);
}

TEST(MockBackend, SequenceModeAdvancesPerCall) {
    MockBackend mock(mock_profile(), {mock_rule_sequence("q", {"one", "two"})});
    EXPECT_EQ(mock.complete(mock.request("q")).text, "one");
    EXPECT_EQ(mock.complete(mock.request("q")).text, "two");
    EXPECT_EQ(mock.complete(mock.request("q")).text, "one");
}

TEST(RateLimiter, ConcurrentCompletionsStayUnderBound) {
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
    auto slow = [&](const ChatRequest&, int) {
        const int now = ++in_flight;
        int seen = peak.load();
        while (seen < now && !peak.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(15));
        --in_flight;
        return std::string("ok");
    };
    MockBackend mock(mock_profile(0, /*max_concurrent=*/3),
                     {mock_rule_predicate([](const ChatRequest&) { return true; },
                                          slow)});
    std::vector<std::thread> threads;
    for (int i = 0; i < 10; ++i) {
        threads.emplace_back([&] { mock.complete(mock.request("go")); });
    }
    for (auto& t : threads) {
        t.join();
    }
    EXPECT_LE(peak.load(), 3);
    EXPECT_EQ(mock.call_count(), 10);
}

class LocalServer {
public:
    explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    std::string base_url() const {
        return fmt::format("http://127.0.0.1:{}/v1", port_);
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

BackendProfile http_profile(const std::string& base_url) {
    BackendProfile p;
    p.base_url = base_url;
    p.model_name = "test-model";
    p.retry.max_attempts = 3;
    p.retry.initial_backoff = std::chrono::milliseconds(5);
    return p;
}

std::string ok_body(const std::string& text, const std::string& finish = "stop") {
    nlohmann::json j{{"choices",
                      {{{"index", 0},
                        {"message", {{"role", "assistant"}, {"content", text}}},
                        {"finish_reason", finish}}}},
                     {"usage",
                      {{"prompt_tokens", 7}, {"completion_tokens", 3}, {"total_tokens", 10}}}};
    return j.dump();
}

TEST(HttpBackend, RecoversAfterTwoRateLimitResponses) {
    std::atomic<int> hits{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        if (++hits <= 2) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
            return;
        }
        res.set_content(ok_body("recovered"), "application/json");
    });
    HttpBackend backend(http_profile(server.base_url()));
    const Completion c = backend.complete(backend.request("ping"));
    EXPECT_EQ(c.text, "recovered");
    EXPECT_EQ(hits.load(), 3);
    ASSERT_TRUE(c.usage.has_value());
    EXPECT_EQ(c.usage->total_tokens, 10);
}

TEST(HttpBackend, DoesNotRetryAuthFailures) {
    std::atomic<int> hits{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
        res.set_content("who are you", "text/plain");
    });
    HttpBackend backend(http_profile(server.base_url()));
    try {
        backend.complete(backend.request("ping"));
        FAIL() << "expected ApiError";
    } catch (const ApiError& e) {
        EXPECT_EQ(e.status(), 401);
    }
    EXPECT_EQ(hits.load(), 1);
}

TEST(HttpBackend, ExhaustedRetriesBecomeTransportError) {
    std::atomic<int> hits{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 503;
    });
    HttpBackend backend(http_profile(server.base_url()));
    EXPECT_THROW(backend.complete(backend.request("ping")), TransportError);
    EXPECT_EQ(hits.load(), 3);
}

TEST(HttpBackend, ContentFilterFinishBecomesFilteredError) {
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        res.set_content(ok_body("partial", "content_filter"), "application/json");
    });
    HttpBackend backend(http_profile(server.base_url()));
    EXPECT_THROW(backend.complete(backend.request("ping")), FilteredError);
}

TEST(HttpBackend, SendsChatCompletionShape) {
    nlohmann::json seen;
    std::string auth;
    LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(ok_body("fine"), "application/json");
    });
    setenv("PROMPTOPT_TEST_KEY", "sk-123", 1);
    BackendProfile profile = http_profile(server.base_url());
    profile.api_key_env = "PROMPTOPT_TEST_KEY";
    profile.temperature = 0.9;
    HttpBackend backend(profile);
    backend.complete(backend.request("the user text", "the system text"));
    EXPECT_EQ(seen.at("model"), "test-model");
    EXPECT_DOUBLE_EQ(seen.at("temperature").get<double>(), 0.9);
    ASSERT_EQ(seen.at("messages").size(), 2u);
    EXPECT_EQ(seen["messages"][0]["role"], "system");
    EXPECT_EQ(seen["messages"][1]["content"], "the user text");
    EXPECT_EQ(auth, "Bearer sk-123");
}

TEST(ParseBaseUrl, SplitsPrefix) {
    const ParsedBaseUrl a = parse_base_url("https://api.example.com/v1");
    EXPECT_EQ(a.host_and_scheme, "https://api.example.com");
    EXPECT_EQ(a.path_prefix, "/v1");
    const ParsedBaseUrl b = parse_base_url("http://localhost:8000");
    EXPECT_EQ(b.host_and_scheme, "http://localhost:8000");
    EXPECT_EQ(b.path_prefix, "");
    EXPECT_THROW(parse_base_url("localhost"), ConfigError);
}

TEST(TranscriptLog, AppendsOneLinePerExchange) {
    testing::TempDir tmp;
    const auto path = tmp.file("transcript.jsonl");
    MockBackend mock(mock_profile(), {mock_rule_fixed("hi", "yo")});
    mock.set_transcript(std::make_shared<TranscriptLog>(path));
    mock.complete(mock.request("hi"));
    mock.complete(mock.request("hi again"));
    const std::string content = testing::slurp(path);
    EXPECT_EQ(std::count(content.begin(), content.end(), '\n'), 2);
    const auto first = nlohmann::json::parse(content.substr(0, content.find('\n')));
    EXPECT_EQ(first.at("response"), "yo");
}

}  // namespace
}  // namespace promptopt
