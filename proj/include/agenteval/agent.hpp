#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "agenteval/backend.hpp"
#include "agenteval/domain.hpp"

namespace agenteval {

enum class MemoryKind { persona, task_intro, criteria, article, plan, reflection, rating };

std::string_view to_string(MemoryKind k);

struct MemoryEvent {
    std::int64_t seq = 0;
    MemoryKind kind = MemoryKind::persona;
    std::string text;
    double importance = 0.0; // fixed per kind
    std::string topic;       // dimension name, or "<article>#<dimension>"
};

struct RetrievalScore {
    double recency = 0.0;    // 0.995^(latest_seq - seq)
    double relevance = 0.0;  // Jaccard overlap of case-folded word sets
    double importance = 0.0;
    double total = 0.0;      // equal-weight sum, in [0,3]
};

struct ScoredMemory {
    MemoryEvent event;
    RetrievalScore score;
};

// One line per memory event plus one per failed rating re-ask; perceptions
// carry an empty prompt digest.
struct TranscriptEntry {
    std::int64_t seq = 0;
    std::string kind;
    std::string topic;
    std::string prompt_digest;
    std::string response_digest;
};

double importance_for(MemoryKind kind);

// Topic key for plan/reflection/rating events of one (article, dimension).
std::string evaluation_topic(const Article& article, Dimension d);

struct AgentOptions {
    std::string model = "mock-model";
    double temperature = 0.8;
    int retrieval_k = 8;
    int rating_retries = 3; // re-asks after the first unparseable reply
    std::string seed = "0";
};

// A persona-conditioned rater: append-only memory stream, scored retrieval,
// and plan -> reflect -> rate against a dimension's criteria. Single-owner:
// mutate from one task at a time.
class Agent {
public:
    Agent(PersonaProfile profile, std::shared_ptr<Backend> backend,
          AgentOptions options = {});

    const std::string& id() const { return profile_.name; }
    const PersonaProfile& profile() const { return profile_; }
    const AgentOptions& options() const { return options_; }

    // System message prepended to every exchange (persona context).
    void set_system_prompt(std::string text) { system_prompt_ = std::move(text); }

    void perceive(MemoryKind kind, std::string text, std::string topic = "");

    std::vector<ScoredMemory> retrieve(std::string_view query, int k) const;

    std::string plan(const Article& article, Dimension d);
    std::string reflect(const Article& article, Dimension d);

    // Returns the parsed rating and a transcript ref (the response digest).
    std::pair<Rating, std::string> rate(const Article& article, Dimension d);

    // One raw exchange: sends system+user messages, appends a memory event of
    // `kind` with the response text, and logs the transcript line.
    CompletionResponse exchange(MemoryKind kind, const std::string& topic,
                                const std::string& prompt,
                                const std::string& seed_suffix);

    bool has_memory(MemoryKind kind, std::string_view topic) const;

    const std::vector<MemoryEvent>& memory() const { return memory_; }
    const std::vector<TranscriptEntry>& transcript() const { return transcript_; }

private:
    std::string render_memories(std::string_view query) const;
    CompletionRequest make_request(const std::vector<Message>& messages,
                                   const std::string& seed_suffix) const;

    PersonaProfile profile_;
    std::shared_ptr<Backend> backend_;
    AgentOptions options_;
    std::string system_prompt_;
    std::vector<MemoryEvent> memory_;
    std::vector<TranscriptEntry> transcript_;
};

// Case-folded word-set Jaccard overlap, the default relevance measure.
double token_overlap(std::string_view a, std::string_view b);

void write_transcript(const std::filesystem::path& path,
                      std::span<const TranscriptEntry> entries);

} // namespace agenteval
