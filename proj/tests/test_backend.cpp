#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "agenteval/backend.hpp"
#include "agenteval/digest.hpp"
#include "agenteval/errors.hpp"
#include "agenteval/protocol.hpp"
#include "support/test_util.hpp"

using namespace agenteval;
using testutil::TempDir;

namespace {

CompletionRequest make_request(std::string seed_tag = "", std::string content = "Hello") {
    CompletionRequest r;
    r.model = "mock-model";
    r.temperature = 0.8;
    r.seed_tag = std::move(seed_tag);
    r.messages = {{Role::system, "You are a rater."}, {Role::user, std::move(content)}};
    return r;
}

} // namespace

TEST_CASE("canonical digest: deterministic and sensitive") {
    auto a = make_request("t1");
    auto b = make_request("t1");
    CHECK(canonical_digest(a) == canonical_digest(b));

    SUBCASE("temperature 0.8 vs 0.7") {
        b.temperature = 0.7;
        CHECK(canonical_digest(a) != canonical_digest(b));
    }
    SUBCASE("model") {
        b.model = "other";
        CHECK(canonical_digest(a) != canonical_digest(b));
    }
    SUBCASE("message order") {
        b.messages = {{Role::user, "Hello"}, {Role::system, "You are a rater."}};
        CHECK(canonical_digest(a) != canonical_digest(b));
    }
    SUBCASE("message content") {
        b.messages[1].content = "Hello!";
        CHECK(canonical_digest(a) != canonical_digest(b));
    }
    SUBCASE("seed tag") {
        b.seed_tag = "t2";
        CHECK(canonical_digest(a) != canonical_digest(b));
    }
    SUBCASE("max_tokens") {
        b.max_tokens = 64;
        CHECK(canonical_digest(a) != canonical_digest(b));
    }
}

TEST_CASE("digest is invariant under serialization key order") {
    // the same request read back from JSON with different key orders
    auto a = nlohmann::json::parse(
        R"({"model":"m","temperature":0.8,"seed_tag":"t",)"
        R"("messages":[{"role":"user","content":"hi"}]})");
    auto b = nlohmann::json::parse(
        R"({"messages":[{"content":"hi","role":"user"}],)"
        R"("seed_tag":"t","temperature":0.8,"model":"m"})");
    CHECK(canonical_digest(request_from_json(a)) == canonical_digest(request_from_json(b)));
}

TEST_CASE("request validation") {
    CompletionRequest r;
    r.model = "m";
    CHECK_THROWS_AS(validate_request(r), ValidationError); // no messages
    r.messages = {{Role::assistant, "hi"}};
    CHECK_THROWS_AS(validate_request(r), ValidationError); // assistant first
    r.messages = {{Role::user, "hi"}};
    r.temperature = 2.5;
    CHECK_THROWS_AS(validate_request(r), ValidationError);
    r.temperature = 0.8;
    CHECK_NOTHROW(validate_request(r));
}

TEST_CASE("mock is a pure function of the request") {
    MockBackend mock;
    auto r = make_request("any-tag", "Outline your approach.");
    auto first = mock.complete(r);
    auto second = mock.complete(r);
    CHECK(first.text == second.text);
    CHECK(first.request_digest == second.request_digest);
    CHECK(first.backend == BackendKind::mock);
}

TEST_CASE("mock keys on the seed tag: fixed reply ending in score of 4") {
    // sha256("coh-a1-s1") starts 109235e9 -> 1 + (0x109235e9 % 5) = 4
    CHECK(MockBackend::score_for_digest(sha256_hex("coh-a1-s1")) == 4);

    MockBackend mock;
    auto a = mock.complete(make_request(
        "coh-a1-s1", "Assign a coherence score on a scale of 1 to 5."));
    auto b = mock.complete(make_request(
        "coh-a1-s1", "Different memories this time. Assign a coherence score."));
    CHECK(a.text == b.text); // same tag, same reply even for different requests
    REQUIRE(a.text.size() >= 10);
    CHECK(a.text.substr(a.text.size() - 10) == "score of 4");
}

TEST_CASE("mock always yields a parseable 1..5 for scoring prompts") {
    MockBackend mock;
    for (int i = 0; i < 50; ++i) {
        auto r = make_request("tag-" + std::to_string(i),
                              "Memories vary " + std::to_string(i * 7) +
                                  ". Assign a clarity score on a scale of 1 to 5.");
        auto response = mock.complete(r);
        auto parsed = parse_rating(response.text);
        REQUIRE(parsed.has_value());
        CHECK(*parsed >= 1);
        CHECK(*parsed <= 5);
    }
}

TEST_CASE("record then replay reproduces responses byte-identically") {
    TempDir tmp;
    auto cassette_path = tmp / "cassette.jsonl";
    std::vector<CompletionRequest> requests;
    for (int i = 0; i < 5; ++i) {
        requests.push_back(make_request("tag-" + std::to_string(i),
                                        "Assign a score based on item " + std::to_string(i)));
    }

    std::vector<CompletionResponse> recorded;
    {
        RecordBackend record(std::make_shared<MockBackend>(),
                             std::make_shared<CassetteWriter>(cassette_path));
        for (const auto& r : requests) recorded.push_back(record.complete(r));
        // duplicate completion leaves the cassette unchanged (digests unique)
        (void)record.complete(requests.front());
    }

    ReplayBackend replay(cassette_path);
    CHECK(replay.size() == 5);
    for (std::size_t i = 0; i < requests.size(); ++i) {
        auto response = replay.complete(requests[i]);
        CHECK(response.text == recorded[i].text);
        CHECK(response.request_digest == recorded[i].request_digest);
        CHECK(response.backend == BackendKind::replay);
    }

    SUBCASE("file order is recording order") {
        auto text = testutil::slurp(cassette_path);
        std::size_t pos = 0;
        for (const auto& r : recorded) {
            auto at = text.find(r.request_digest);
            REQUIRE(at != std::string::npos);
            CHECK(at >= pos);
            pos = at;
        }
    }

    SUBCASE("a miss names the digest") {
        auto unknown = make_request("never-recorded", "Assign a score.");
        try {
            (void)replay.complete(unknown);
            FAIL("expected cassette miss");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::cassette_miss);
            CHECK(std::string(e.what()).find(canonical_digest(unknown)) != std::string::npos);
        }
    }
}

TEST_CASE("replay of a missing cassette file is a config error") {
    CHECK_THROWS_AS(ReplayBackend("/nonexistent/cassette.jsonl"), Error);
}

TEST_CASE("http backend against a local server") {
    httplib::Server server;
    std::atomic<int> calls{0};
    server.Post("/v1/chat/completions",
                [&](const httplib::Request& req, httplib::Response& res) {
                    ++calls;
                    auto j = nlohmann::json::parse(req.body);
                    if (j["model"] == "fail-once" && calls == 1) {
                        res.status = 500;
                        return;
                    }
                    if (j["model"] == "not-found") {
                        res.status = 404;
                        res.set_content("missing", "text/plain");
                        return;
                    }
                    nlohmann::json out;
                    out["choices"] = {{{"message",
                                        {{"role", "assistant"},
                                         {"content", "echo: " +
                                                         j["messages"].back()["content"]
                                                             .get<std::string>()}}}}};
                    res.set_content(out.dump(), "application/json");
                });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    config.api_key = "test-key";
    config.initial_backoff_ms = 1;

    SUBCASE("success path returns the first choice's content") {
        HttpBackend backend(config);
        auto response = backend.complete(make_request("", "ping"));
        CHECK(response.text == "echo: ping");
        CHECK(response.backend == BackendKind::http);
        CHECK(response.request_digest == canonical_digest(make_request("", "ping")));
    }

    SUBCASE("5xx retries then succeeds") {
        HttpBackend backend(config);
        auto r = make_request("", "retry me");
        r.model = "fail-once";
        auto response = backend.complete(r);
        CHECK(response.text == "echo: retry me");
        CHECK(calls == 2);
    }

    SUBCASE("4xx fails immediately") {
        HttpBackend backend(config);
        auto r = make_request("", "nope");
        r.model = "not-found";
        try {
            (void)backend.complete(r);
            FAIL("expected backend error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::backend);
        }
        CHECK(calls == 1);
    }

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend configuration errors") {
    HttpConfig config;
    config.base_url = "http://127.0.0.1:1/v1";
    CHECK_THROWS_AS(HttpBackend{config}, Error); // key missing

    HttpConfig fast = config;
    fast.api_key = "k";
    fast.initial_backoff_ms = 1;
    fast.timeout_seconds = 1;
    HttpBackend unreachable(fast);
    try {
        (void)unreachable.complete(make_request("", "x"));
        FAIL("expected backend error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::backend);
    }
}

TEST_CASE("cassette survives process restarts without duplicate digests") {
    TempDir tmp;
    auto path = tmp / "cassette.jsonl";
    auto request = make_request("persist", "Assign a score.");
    {
        RecordBackend record(std::make_shared<MockBackend>(),
                             std::make_shared<CassetteWriter>(path));
        (void)record.complete(request);
    }
    {
        RecordBackend record(std::make_shared<MockBackend>(),
                             std::make_shared<CassetteWriter>(path));
        (void)record.complete(request); // already on disk: skipped
    }
    ReplayBackend replay(path);
    CHECK(replay.size() == 1);
}
