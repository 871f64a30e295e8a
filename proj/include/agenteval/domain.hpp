#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace agenteval {

// The five rated aspects, in the canonical order used by every report.
enum class Dimension { Coherence, Relevance, Interestingness, Fairness, Clarity };

inline constexpr std::array<Dimension, 5> kAllDimensions = {
    Dimension::Coherence, Dimension::Relevance, Dimension::Interestingness,
    Dimension::Fairness, Dimension::Clarity};

std::string_view to_string(Dimension d);
Dimension dimension_from_string(std::string_view name); // case-insensitive

// A 1-5 score. Construction enforces the range.
class Rating {
public:
    explicit Rating(int value);
    int value() const { return value_; }

    friend bool operator==(Rating a, Rating b) { return a.value_ == b.value_; }

private:
    int value_;
};

struct PersonaProfile {
    std::string name;
    int age = 0;
    std::string job;
    int experience = 0; // years
    std::array<std::string, 3> traits;
    std::optional<std::string> daily_routine;
};

// Validates raw fields into a profile; throws ValidationError listing every
// violation (trait count/distinctness, non-positive age, negative experience).
PersonaProfile validate_profile(const std::string& name, int age,
                                const std::string& job, int experience,
                                const std::vector<std::string>& traits,
                                std::optional<std::string> daily_routine = {});

// trim + case-fold, the canonical form used for trait distinctness and
// one-hot column identity.
std::string canonical_trait(std::string_view trait);

struct Article {
    std::string id;
    std::string title;
    std::string body;
    std::string generator; // label of the source model

    int word_count() const;
};

// dimension x score(1..5) -> quantified criterion text; total by construction.
class Rubric {
public:
    const std::string& lookup(Dimension d, int score) const;
    void set(Dimension d, int score, std::string text);

    // Throws ValidationError unless all 25 cells are non-empty.
    void validate() const;

    nlohmann::json to_json() const;
    static Rubric from_json(const nlohmann::json& j);

    static Rubric load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    friend bool operator==(const Rubric& a, const Rubric& b) {
        return a.criteria_ == b.criteria_;
    }

private:
    std::array<std::array<std::string, 5>, 5> criteria_; // [dimension][score-1]
};

const std::string& rubric_lookup(const Rubric& rubric, Dimension d, int score);

enum class RaterKind { human, agent };

std::string_view to_string(RaterKind k);
RaterKind rater_kind_from_string(std::string_view name);

struct RatingRecord {
    std::string rater_id;
    RaterKind rater_kind = RaterKind::agent;
    std::string article_id;
    Dimension dimension = Dimension::Coherence;
    Rating score{1};
    std::optional<std::string> transcript_ref;
};

// --- file formats -----------------------------------------------------------

// participants CSV: name,age,job,experience,traits (traits semicolon-separated,
// optional trailing daily_routine column).
std::vector<PersonaProfile> load_participants(const std::filesystem::path& path);
void save_participants(const std::filesystem::path& path,
                       std::span<const PersonaProfile> profiles);

// articles JSON-lines: {id, title, body, generator} per line.
std::vector<Article> load_articles(const std::filesystem::path& path);
void save_articles(const std::filesystem::path& path,
                   std::span<const Article> articles);

// ratings CSV: rater_id,rater_kind,article_id,dimension,score.
// Loading enforces score range and (rater_id, article_id, dimension) uniqueness.
std::vector<RatingRecord> load_ratings(const std::filesystem::path& path);
void save_ratings(const std::filesystem::path& path,
                  std::span<const RatingRecord> records);

} // namespace agenteval
