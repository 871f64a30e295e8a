#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace agenteval {

enum class Role { system, user, assistant };

std::string_view to_string(Role r);
Role role_from_string(std::string_view name);

struct Message {
    Role role = Role::user;
    std::string content;
};

struct CompletionRequest {
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.0; // [0,2]
    std::optional<int> max_tokens;
    std::string seed_tag; // keys mock/replay determinism; recorded in manifests
};

// Throws ValidationError on empty messages / assistant-first / bad temperature.
void validate_request(const CompletionRequest& request);

// Fixed-key-order JSON form; the digest is independent of how a request was
// serialized elsewhere and sensitive to model, messages, temperature,
// max_tokens and seed_tag.
std::string canonical_json(const CompletionRequest& request);
std::string canonical_digest(const CompletionRequest& request);

enum class BackendKind { http, mock, replay };

std::string_view to_string(BackendKind k);
BackendKind backend_kind_from_string(std::string_view name);

struct CompletionResponse {
    std::string text;
    BackendKind backend = BackendKind::mock;
    int latency_ms = 0;
    std::string request_digest;
};

nlohmann::json request_to_json(const CompletionRequest& request);
CompletionRequest request_from_json(const nlohmann::json& j);
nlohmann::json response_to_json(const CompletionResponse& response);
CompletionResponse response_from_json(const nlohmann::json& j);

class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    virtual std::string name() const = 0;
};

// Deterministic stand-in for a live model: the reply is a pure function of
// sha256(seed_tag) when a seed tag is set, else of the full request digest.
// Requests whose final user message contains "Assign a" and "score" always
// get a reply ending in "score of N" with N in 1..5.
class MockBackend : public Backend {
public:
    CompletionResponse complete(const CompletionRequest& request) override;
    std::string name() const override { return "mock"; }

    // 1 + (first 8 hex digits of the keying digest mod 5).
    static int score_for_digest(std::string_view hex_digest);
};

struct HttpConfig {
    std::string base_url; // e.g. https://api.openai.com/v1
    std::string api_key;
    int max_attempts = 3;
    int initial_backoff_ms = 500;
    int timeout_seconds = 120;
};

// Generic chat-completion POST {model, messages, temperature, max_tokens},
// reads the first choice's message content. Retries transport errors and
// 5xx responses with exponential backoff; 4xx fails immediately.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpConfig config);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string name() const override { return "http"; }

private:
    HttpConfig config_;
    std::string host_;        // scheme://host[:port]
    std::string path_prefix_; // e.g. /v1
};

// Append-only JSON-lines file of {digest, request, response}. Appends are
// serialized through one writer; a digest already present is skipped so the
// entries stay unique.
class CassetteWriter {
public:
    explicit CassetteWriter(std::filesystem::path path);

    void append(const CompletionRequest& request,
                const CompletionResponse& response);

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mutex_;
    std::unordered_map<std::string, bool> seen_;
};

class RecordBackend : public Backend {
public:
    RecordBackend(std::shared_ptr<Backend> inner,
                  std::shared_ptr<CassetteWriter> cassette);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string name() const override { return "record(" + inner_->name() + ")"; }

private:
    std::shared_ptr<Backend> inner_;
    std::shared_ptr<CassetteWriter> cassette_;
};

// Read-only lookup keyed by request digest; a miss raises ErrorKind::cassette_miss
// naming the digest.
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(const std::filesystem::path& cassette_path);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string name() const override { return "replay"; }

    std::size_t size() const { return entries_.size(); }

private:
    std::unordered_map<std::string, CompletionResponse> entries_;
};

} // namespace agenteval
