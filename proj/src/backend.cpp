#include "agenteval/backend.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include <httplib.h>

#include "agenteval/digest.hpp"
#include "agenteval/errors.hpp"

namespace agenteval {

namespace {

std::string fold(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

const std::string* last_user_message(const CompletionRequest& request) {
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == Role::user) return &it->content;
    }
    return nullptr;
}

} // namespace

std::string_view to_string(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    throw Error(ErrorKind::validation, "bad role value");
}

Role role_from_string(std::string_view name) {
    std::string folded = fold(name);
    if (folded == "system") return Role::system;
    if (folded == "user") return Role::user;
    if (folded == "assistant") return Role::assistant;
    throw Error(ErrorKind::parse, "unknown role: '" + std::string(name) + "'");
}

std::string_view to_string(BackendKind k) {
    switch (k) {
        case BackendKind::http: return "http";
        case BackendKind::mock: return "mock";
        case BackendKind::replay: return "replay";
    }
    throw Error(ErrorKind::validation, "bad backend kind");
}

BackendKind backend_kind_from_string(std::string_view name) {
    std::string folded = fold(name);
    if (folded == "http") return BackendKind::http;
    if (folded == "mock") return BackendKind::mock;
    if (folded == "replay") return BackendKind::replay;
    throw Error(ErrorKind::parse, "unknown backend kind: '" + std::string(name) + "'");
}

void validate_request(const CompletionRequest& request) {
    std::vector<std::string> violations;
    if (request.model.empty()) violations.push_back("model must be set");
    if (request.messages.empty()) {
        violations.push_back("messages must be non-empty");
    } else if (request.messages.front().role == Role::assistant) {
        violations.push_back("first message role must be system or user");
    }
    if (request.temperature < 0.0 || request.temperature > 2.0) {
        violations.push_back("temperature must lie in [0,2]");
    }
    if (!violations.empty()) throw ValidationError(std::move(violations));
}

std::string canonical_json(const CompletionRequest& request) {
    // nlohmann::json orders object keys alphabetically, which fixes the
    // serialization independently of field order anywhere else.
    nlohmann::json j;
    j["model"] = request.model;
    j["temperature"] = request.temperature;
    if (request.max_tokens) j["max_tokens"] = *request.max_tokens;
    j["seed_tag"] = request.seed_tag;
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : request.messages) {
        msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    }
    j["messages"] = msgs;
    return j.dump();
}

std::string canonical_digest(const CompletionRequest& request) {
    return sha256_hex(canonical_json(request));
}

nlohmann::json request_to_json(const CompletionRequest& request) {
    nlohmann::json j;
    j["model"] = request.model;
    j["temperature"] = request.temperature;
    if (request.max_tokens) j["max_tokens"] = *request.max_tokens;
    j["seed_tag"] = request.seed_tag;
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : request.messages) {
        msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    }
    j["messages"] = msgs;
    return j;
}

CompletionRequest request_from_json(const nlohmann::json& j) {
    CompletionRequest r;
    r.model = j.value("model", "");
    r.temperature = j.value("temperature", 0.0);
    if (j.contains("max_tokens") && !j["max_tokens"].is_null()) {
        r.max_tokens = j["max_tokens"].get<int>();
    }
    r.seed_tag = j.value("seed_tag", "");
    for (const auto& m : j.at("messages")) {
        r.messages.push_back(
            {role_from_string(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
    }
    return r;
}

nlohmann::json response_to_json(const CompletionResponse& response) {
    return {{"text", response.text},
            {"backend", std::string(to_string(response.backend))},
            {"latency_ms", response.latency_ms},
            {"request_digest", response.request_digest}};
}

CompletionResponse response_from_json(const nlohmann::json& j) {
    CompletionResponse r;
    r.text = j.at("text").get<std::string>();
    r.backend = backend_kind_from_string(j.value("backend", "mock"));
    r.latency_ms = j.value("latency_ms", 0);
    r.request_digest = j.value("request_digest", "");
    return r;
}

// --- mock --------------------------------------------------------------------

int MockBackend::score_for_digest(std::string_view hex_digest) {
    return 1 + static_cast<int>(digest_prefix_u32(hex_digest) % 5u);
}

namespace {

// Small deterministic word pools for mock prose.
const char* kTopics[] = {"the harbor district", "regional transit", "a coastal survey",
                         "the city archive",   "local manufacturing", "a research station",
                         "the night market",   "municipal gardens"};
const char* kAngles[] = {"funding",   "logistics", "community response", "the timeline",
                         "staffing",  "past attempts", "competing plans", "measured outcomes"};

std::uint32_t hex_slice_u32(const std::string& digest, std::size_t offset) {
    return digest_prefix_u32(std::string_view(digest).substr(offset, 8));
}

std::string mock_article(const std::string& key) {
    const auto topic = kTopics[hex_slice_u32(key, 8) % 8];
    const auto angle = kAngles[hex_slice_u32(key, 16) % 8];
    const auto angle2 = kAngles[hex_slice_u32(key, 24) % 8];
    std::string title = "A Quiet Shift in ";
    title += topic;
    title[17] = static_cast<char>(std::toupper(static_cast<unsigned char>(title[17])));
    std::string body;
    body += "Officials confirmed this week that " + std::string(topic) +
            " is entering a new phase. ";
    body += "Early attention has focused on " + std::string(angle) + ". ";
    body += "Residents interviewed on Tuesday offered mixed but mostly practical views. ";
    body += "Analysts noted that " + std::string(angle2) + " will decide how fast the change lands. ";
    body += "A review board meets next month to publish its first findings. ";
    body += "Until then, day-to-day routines continue largely as before.";
    return title + "\n" + body;
}

std::string mock_criterion(const std::string& key, const std::string& prompt) {
    // Thresholds derived from the key so different agents sometimes agree,
    // which gives the majority vote real modes and ties.
    unsigned issues = hex_slice_u32(key, 8) % 4u;
    unsigned band = 25u + 25u * (hex_slice_u32(key, 16) % 3u);
    std::string text = "No more than " + std::to_string(issues) +
                       " weak passages and at least " + std::to_string(band) +
                       "% of sentences directly on topic";
    if (contains(prompt, "airness")) {
        // fairness criteria in the source rubric are prose-only
        unsigned variant = hex_slice_u32(key, 24) % 3u;
        switch (variant) {
            case 0: return "The article presents each side in neutral wording and keeps "
                           "opinion separate from fact.";
            case 1: return "Perspectives are balanced, language stays neutral, and no "
                           "relevant viewpoint is omitted.";
            default: return "The article presents each side in neutral wording and keeps "
                            "opinion separate from fact.";
        }
    }
    return text + ".";
}

} // namespace

CompletionResponse MockBackend::complete(const CompletionRequest& request) {
    validate_request(request);
    const std::string request_digest = canonical_digest(request);
    const std::string key =
        request.seed_tag.empty() ? request_digest : sha256_hex(request.seed_tag);

    const std::string* user = last_user_message(request);
    const std::string prompt = user ? *user : std::string();

    std::string text;
    if (contains(prompt, "Assign a") && contains(prompt, "score")) {
        int score = score_for_digest(key);
        text = "Considering the criteria step by step and drawing on my background, "
               "I settle on a score of " + std::to_string(score);
    } else if (contains(prompt, "quantify") && contains(prompt, "-star")) {
        text = mock_criterion(key, prompt);
    } else if (contains(prompt, "engaging title")) {
        text = mock_article(key);
    } else if (contains(prompt, "Interview yourself")) {
        text = "Q: Does the piece hold up against the criteria? A: Mostly, with caveats "
               "I noted while reading. Q: What stands out most? A: The handling of " +
               std::string(kAngles[hex_slice_u32(key, 8) % 8]) +
               ". Q: Would I change my first impression? A: Only slightly. (trace " +
               key.substr(0, 8) + ")";
    } else if (contains(prompt, "Outline")) {
        text = "First I re-read the article, then I check each criterion in turn, "
               "weighing " + std::string(kAngles[hex_slice_u32(key, 8) % 8]) +
               " most heavily, and finally I settle on the band that fits. (trace " +
               key.substr(0, 8) + ")";
    } else {
        text = "Understood. I will keep my profile and the task in mind. (trace " +
               key.substr(0, 8) + ")";
    }

    CompletionResponse response;
    response.text = std::move(text);
    response.backend = BackendKind::mock;
    response.latency_ms = 0;
    response.request_digest = request_digest;
    return response;
}

// --- http --------------------------------------------------------------------

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) {
        throw Error(ErrorKind::config, "http backend needs a base URL "
                                       "(AGENTEVAL_API_BASE or --api-base)");
    }
    if (config_.api_key.empty()) {
        throw Error(ErrorKind::config, "http backend needs an API key "
                                       "(AGENTEVAL_API_KEY or --api-key)");
    }
    // split scheme://host[:port] from any path prefix
    auto scheme_end = config_.base_url.find("://");
    std::size_t path_start = std::string::npos;
    if (scheme_end != std::string::npos) {
        path_start = config_.base_url.find('/', scheme_end + 3);
    } else {
        path_start = config_.base_url.find('/');
    }
    if (path_start == std::string::npos) {
        host_ = config_.base_url;
        path_prefix_.clear();
    } else {
        host_ = config_.base_url.substr(0, path_start);
        path_prefix_ = config_.base_url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

CompletionResponse HttpBackend::complete(const CompletionRequest& request) {
    validate_request(request);

    nlohmann::json body;
    body["model"] = request.model;
    body["temperature"] = request.temperature;
    if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : request.messages) {
        msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    }
    body["messages"] = msgs;
    const std::string payload = body.dump();

    httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key}};
    const std::string path = path_prefix_ + "/chat/completions";

    std::string last_error;
    auto start = std::chrono::steady_clock::now();
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(
                config_.initial_backoff_ms << (attempt - 1)));
        }
        httplib::Client client(host_);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue; // retryable
        }
        if (res->status >= 500) {
            last_error = "server status " + std::to_string(res->status);
            continue; // retryable
        }
        if (res->status != 200) {
            throw Error(ErrorKind::backend, "chat completion failed with status " +
                                                std::to_string(res->status) + ": " + res->body);
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::backend, std::string("bad completion JSON: ") + e.what());
        }
        try {
            CompletionResponse response;
            response.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            response.backend = BackendKind::http;
            response.latency_ms = static_cast<int>(
                std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count());
            response.request_digest = canonical_digest(request);
            return response;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::backend,
                        std::string("completion JSON missing choices[0].message.content: ") +
                            e.what());
        }
    }
    throw Error(ErrorKind::backend, "chat completion failed after " +
                                        std::to_string(config_.max_attempts) +
                                        " attempts: " + last_error);
}

// --- cassette record / replay -------------------------------------------------

CassetteWriter::CassetteWriter(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    // resume-safe: remember digests already on disk
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            seen_[j.at("digest").get<std::string>()] = true;
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorKind::parse, "corrupt cassette line in " + path_.string());
        }
    }
}

void CassetteWriter::append(const CompletionRequest& request,
                            const CompletionResponse& response) {
    std::lock_guard<std::mutex> lock(mutex_);
    const std::string digest = response.request_digest;
    if (seen_.count(digest)) return;
    seen_[digest] = true;
    nlohmann::json j;
    j["digest"] = digest;
    j["request"] = request_to_json(request);
    j["response"] = response_to_json(response);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot append to cassette " + path_.string());
    out << j.dump() << '\n';
}

RecordBackend::RecordBackend(std::shared_ptr<Backend> inner,
                             std::shared_ptr<CassetteWriter> cassette)
    : inner_(std::move(inner)), cassette_(std::move(cassette)) {}

CompletionResponse RecordBackend::complete(const CompletionRequest& request) {
    CompletionResponse response = inner_->complete(request);
    cassette_->append(request, response);
    return response;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& cassette_path) {
    std::ifstream in(cassette_path);
    if (!in) {
        throw Error(ErrorKind::config, "cannot open cassette " + cassette_path.string());
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::parse, cassette_path.string() + ":" +
                                              std::to_string(line_no) + ": " + e.what());
        }
        entries_.emplace(j.at("digest").get<std::string>(),
                         response_from_json(j.at("response")));
    }
}

CompletionResponse ReplayBackend::complete(const CompletionRequest& request) {
    validate_request(request);
    const std::string digest = canonical_digest(request);
    auto it = entries_.find(digest);
    if (it == entries_.end()) {
        throw Error(ErrorKind::cassette_miss, "cassette miss for digest " + digest);
    }
    CompletionResponse response = it->second;
    response.backend = BackendKind::replay;
    return response;
}

} // namespace agenteval
