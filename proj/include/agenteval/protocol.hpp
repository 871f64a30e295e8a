#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agenteval/agent.hpp"
#include "agenteval/backend.hpp"
#include "agenteval/domain.hpp"
#include "agenteval/templates.hpp"

namespace agenteval {

// --- agent initialization ----------------------------------------------------

std::string build_persona_block(const PersonaProfile& profile);
std::string build_task_intro(const PersonaProfile& profile, const TemplateSet& templates);

// Perceives the persona block then the task introduction, and installs the
// persona system prompt. Must run before any other protocol step.
void init_agent(Agent& agent, const TemplateSet& templates);

// --- criteria elicitation and majority-vote unification ----------------------

struct ElicitedCriterion {
    std::string agent_id;
    Dimension dimension = Dimension::Coherence;
    int score = 1;
    std::string criterion_text;
    std::string canonical_key;
};

// Case-fold, strip punctuation, collapse whitespace; if the text carries any
// numeric thresholds the key is the normalized number tuple alone, so two
// differently-worded criteria with equal thresholds count as the same vote.
std::string canonical_criterion_key(std::string_view text);

ElicitedCriterion elicit_criteria(Agent& agent, const TemplateSet& templates,
                                  Dimension d, int score);

struct VoteTally {
    Dimension dimension = Dimension::Coherence;
    int score = 1;
    std::map<std::string, int> counts;          // canonical_key -> votes
    std::map<std::string, std::string> sample;  // canonical_key -> representative text
    std::string winner_key;
};

struct UnifiedCriteria {
    Rubric rubric;
    std::vector<VoteTally> tallies; // 25 cells, canonical order, scores 1..5
};

// Per cell the modal canonical key wins; ties resolve to the lexicographically
// smallest key, and the representative text is the smallest text holding the
// winning key. Order-invariant. Throws on an empty cell, naming it.
UnifiedCriteria unify_criteria(std::span<const ElicitedCriterion> criteria);

// --- the three-step evaluation sequence --------------------------------------

struct DimensionOutcome {
    Dimension dimension = Dimension::Coherence;
    std::optional<RatingRecord> record;
    std::string error; // set when the dimension aborted
};

// For each dimension in canonical order: perceive the read-carefully step
// (article text), the criteria step (all five rubric rows for the dimension)
// and the assign-score step, then plan -> reflect -> rate. A rating failure
// aborts only its dimension.
std::vector<DimensionOutcome> evaluate_article(
    Agent& agent, const Article& article, const Rubric& rubric,
    const TemplateSet& templates,
    std::span<const Dimension> dimensions = kAllDimensions);

// Extracts the final standalone integer in 1..5, preferring "score of N",
// then "N/5", then "N out of 5", then a bare trailing integer. Total on any
// byte sequence.
std::optional<int> parse_rating(std::string_view text);

// --- content generation and the single-prompt baseline -----------------------

struct GenerationConfig {
    std::string model = "mock-model";
    double temperature = 0.8;
    int n_articles = 30;
    std::filesystem::path fewshot_dir;
};

// Few-shot exemplar files: first line title, rest body.
std::vector<Article> load_fewshot_dir(const std::filesystem::path& dir);

// One backend call at config.temperature with the exemplars in the prompt;
// first response line becomes the title. Retries once when the body comes
// back with fewer than 2 sentences.
Article generate_article(Backend& backend, const GenerationConfig& config,
                         std::span<const Article> fewshot,
                         const TemplateSet& templates, int index,
                         const std::string& seed);

int count_sentences(std::string_view text);

struct BaselineResult {
    Rating rating{1};
    CompletionRequest request;
    CompletionResponse response;
};

// One direct 1-5 prompt: no persona, no rubric, no chain of thought.
BaselineResult baseline_single_prompt(Backend& backend, const Article& article,
                                      Dimension d, const TemplateSet& templates,
                                      const std::string& model,
                                      double temperature,
                                      const std::string& seed);

} // namespace agenteval
