#include "agenteval/agent.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "agenteval/digest.hpp"
#include "agenteval/errors.hpp"
#include "agenteval/protocol.hpp"

namespace agenteval {

namespace {

constexpr double kRecencyDecay = 0.995;

std::set<std::string> word_set(std::string_view text) {
    std::set<std::string> words;
    std::string current;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!current.empty()) {
            words.insert(current);
            current.clear();
        }
    }
    if (!current.empty()) words.insert(current);
    return words;
}

} // namespace

std::string_view to_string(MemoryKind k) {
    switch (k) {
        case MemoryKind::persona: return "persona";
        case MemoryKind::task_intro: return "task_intro";
        case MemoryKind::criteria: return "criteria";
        case MemoryKind::article: return "article";
        case MemoryKind::plan: return "plan";
        case MemoryKind::reflection: return "reflection";
        case MemoryKind::rating: return "rating";
    }
    throw Error(ErrorKind::validation, "bad memory kind");
}

double importance_for(MemoryKind kind) {
    switch (kind) {
        case MemoryKind::persona: return 1.0;
        case MemoryKind::criteria: return 0.9;
        case MemoryKind::task_intro: return 0.8;
        case MemoryKind::article: return 0.7;
        case MemoryKind::plan: return 0.5;
        case MemoryKind::reflection: return 0.5;
        case MemoryKind::rating: return 0.3;
    }
    throw Error(ErrorKind::validation, "bad memory kind");
}

std::string evaluation_topic(const Article& article, Dimension d) {
    return article.id + "#" + std::string(to_string(d));
}

double token_overlap(std::string_view a, std::string_view b) {
    auto wa = word_set(a);
    auto wb = word_set(b);
    if (wa.empty() && wb.empty()) return 0.0;
    std::size_t intersection = 0;
    for (const auto& w : wa) intersection += wb.count(w);
    std::size_t unions = wa.size() + wb.size() - intersection;
    return unions == 0 ? 0.0 : static_cast<double>(intersection) / static_cast<double>(unions);
}

Agent::Agent(PersonaProfile profile, std::shared_ptr<Backend> backend, AgentOptions options)
    : profile_(std::move(profile)), backend_(std::move(backend)), options_(std::move(options)) {
    if (!backend_) throw Error(ErrorKind::config, "agent requires a backend");
}

void Agent::perceive(MemoryKind kind, std::string text, std::string topic) {
    if (text.empty()) throw Error(ErrorKind::precondition, "cannot perceive empty text");
    if (memory_.empty() && kind != MemoryKind::persona) {
        throw Error(ErrorKind::precondition, "first memory event must be the persona");
    }
    MemoryEvent event;
    event.seq = static_cast<std::int64_t>(memory_.size());
    event.kind = kind;
    event.importance = importance_for(kind);
    event.topic = std::move(topic);
    event.text = std::move(text);
    transcript_.push_back({static_cast<std::int64_t>(transcript_.size()),
                           std::string(to_string(kind)), event.topic, "",
                           sha256_hex(event.text)});
    memory_.push_back(std::move(event));
}

std::vector<ScoredMemory> Agent::retrieve(std::string_view query, int k) const {
    if (k < 1) throw Error(ErrorKind::precondition, "retrieve requires k >= 1");
    if (memory_.empty()) return {};
    const auto latest_seq = memory_.back().seq;

    std::vector<ScoredMemory> scored;
    scored.reserve(memory_.size());
    for (const auto& event : memory_) {
        RetrievalScore s;
        s.recency = std::pow(kRecencyDecay, static_cast<double>(latest_seq - event.seq));
        s.relevance = token_overlap(query, event.text);
        s.importance = event.importance;
        s.total = s.recency + s.relevance + s.importance;
        scored.push_back({event, s});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.score.total != b.score.total) return a.score.total > b.score.total;
        return a.event.seq > b.event.seq; // ties: more recent first
    });
    if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
    return scored;
}

std::string Agent::render_memories(std::string_view query) const {
    auto top = retrieve(query, options_.retrieval_k);
    std::string out = "Your relevant memories:\n";
    for (const auto& m : top) {
        out += "- [";
        out += to_string(m.event.kind);
        out += "] ";
        out += m.event.text;
        out += '\n';
    }
    return out;
}

CompletionRequest Agent::make_request(const std::vector<Message>& messages,
                                      const std::string& seed_suffix) const {
    CompletionRequest request;
    request.model = options_.model;
    request.temperature = options_.temperature;
    request.seed_tag = options_.seed + "/" + seed_suffix;
    request.messages = messages;
    return request;
}

CompletionResponse Agent::exchange(MemoryKind kind, const std::string& topic,
                                   const std::string& prompt,
                                   const std::string& seed_suffix) {
    std::vector<Message> messages;
    if (!system_prompt_.empty()) messages.push_back({Role::system, system_prompt_});
    messages.push_back({Role::user, prompt});
    CompletionRequest request = make_request(messages, seed_suffix);
    CompletionResponse response = backend_->complete(request);

    MemoryEvent event;
    event.seq = static_cast<std::int64_t>(memory_.size());
    event.kind = kind;
    event.importance = importance_for(kind);
    event.topic = topic;
    event.text = response.text;
    transcript_.push_back({static_cast<std::int64_t>(transcript_.size()),
                           std::string(to_string(kind)), topic, response.request_digest,
                           sha256_hex(response.text)});
    memory_.push_back(std::move(event));
    return response;
}

bool Agent::has_memory(MemoryKind kind, std::string_view topic) const {
    return std::any_of(memory_.begin(), memory_.end(), [&](const MemoryEvent& e) {
        return e.kind == kind && e.topic == topic;
    });
}

std::string Agent::plan(const Article& article, Dimension d) {
    const std::string dim(to_string(d));
    if (!has_memory(MemoryKind::task_intro, "") &&
        !has_memory(MemoryKind::task_intro, evaluation_topic(article, d))) {
        throw Error(ErrorKind::precondition, "plan requires a perceived task introduction");
    }
    if (!has_memory(MemoryKind::criteria, dim)) {
        throw Error(ErrorKind::precondition,
                    "plan requires perceived criteria for " + dim);
    }
    std::string prompt = render_memories(dim + " " + article.title);
    prompt += "\nOutline, step by step, how you will judge the " + dim +
              " of the article \"" + article.title + "\" against your criteria.";
    auto response = exchange(MemoryKind::plan, evaluation_topic(article, d), prompt,
                             "plan/" + id() + "/" + article.id + "/" + dim);
    return response.text;
}

std::string Agent::reflect(const Article& article, Dimension d) {
    const std::string dim(to_string(d));
    const std::string topic = evaluation_topic(article, d);
    if (!has_memory(MemoryKind::plan, topic)) {
        throw Error(ErrorKind::precondition,
                    "reflect requires a plan for (" + article.id + ", " + dim + ")");
    }
    std::string prompt = render_memories(dim + " " + article.title);
    prompt += "\nInterview yourself about the article \"" + article.title +
              "\": pose the questions that test its " + dim +
              " against your criteria, answer them, and say what stands out.";
    auto response = exchange(MemoryKind::reflection, topic, prompt,
                             "reflect/" + id() + "/" + article.id + "/" + dim);
    return response.text;
}

std::pair<Rating, std::string> Agent::rate(const Article& article, Dimension d) {
    const std::string dim(to_string(d));
    const std::string topic = evaluation_topic(article, d);
    if (!has_memory(MemoryKind::reflection, topic)) {
        throw Error(ErrorKind::precondition,
                    "rate requires a reflection for (" + article.id + ", " + dim + ")");
    }

    std::string prompt = render_memories(dim + " " + article.title);
    prompt += "\nAssign a " + dim + " score on a scale of 1 to 5, where 1 is the lowest "
              "and 5 is the highest, based on the evaluation criteria.";
    const std::string seed_suffix = "rate/" + id() + "/" + article.id + "/" + dim;

    std::vector<Message> messages;
    if (!system_prompt_.empty()) messages.push_back({Role::system, system_prompt_});
    messages.push_back({Role::user, prompt});

    std::string last_text;
    for (int attempt = 0; attempt <= options_.rating_retries; ++attempt) {
        CompletionRequest request = make_request(messages, seed_suffix);
        CompletionResponse response = backend_->complete(request);
        last_text = response.text;

        auto parsed = parse_rating(response.text);
        if (parsed) {
            MemoryEvent event;
            event.seq = static_cast<std::int64_t>(memory_.size());
            event.kind = MemoryKind::rating;
            event.importance = importance_for(MemoryKind::rating);
            event.topic = topic;
            event.text = response.text;
            transcript_.push_back({static_cast<std::int64_t>(transcript_.size()), "rating",
                                   topic, response.request_digest, sha256_hex(response.text)});
            memory_.push_back(std::move(event));
            return {Rating(*parsed), response.request_digest};
        }
        // unparseable: log the exchange and re-ask with an explicit format nudge
        transcript_.push_back({static_cast<std::int64_t>(transcript_.size()), "rating",
                               topic, response.request_digest, sha256_hex(response.text)});
        messages.push_back({Role::assistant, response.text});
        messages.push_back({Role::user, "Reply with a single integer 1-5."});
    }
    throw Error(ErrorKind::parse, "rating failure for (" + article.id + ", " + dim +
                                      "): unparseable reply after retries: " + last_text);
}

void write_transcript(const std::filesystem::path& path,
                      std::span<const TranscriptEntry> entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write transcript " + path.string());
    for (const auto& e : entries) {
        nlohmann::json j;
        j["seq"] = e.seq;
        j["kind"] = e.kind;
        j["topic"] = e.topic;
        j["prompt_digest"] = e.prompt_digest;
        j["response_digest"] = e.response_digest;
        out << j.dump() << '\n';
    }
}

} // namespace agenteval
