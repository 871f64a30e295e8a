#include "agenteval/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "agenteval/errors.hpp"

namespace agenteval {

namespace {

std::string join_traits(const PersonaProfile& profile) {
    return profile.traits[0] + ", " + profile.traits[1] + " and " + profile.traits[2];
}

bool is_key_digit(char c) { return c >= '0' && c <= '9'; }

} // namespace

std::string build_persona_block(const PersonaProfile& profile) {
    std::string block = profile.name + " is a " + std::to_string(profile.age) +
                        "-year-old " + profile.job + " with " +
                        std::to_string(profile.experience) +
                        " years of professional experience. Personality traits: " +
                        join_traits(profile) + ".";
    if (profile.daily_routine) block += " Daily routine: " + *profile.daily_routine + ".";
    return block;
}

std::string build_task_intro(const PersonaProfile& profile, const TemplateSet& templates) {
    std::string routine;
    if (profile.daily_routine) routine = " Your daily routine: " + *profile.daily_routine + ".";
    return templates.get("task_intro")
        .render({{"name", profile.name},
                 {"age", std::to_string(profile.age)},
                 {"job", profile.job},
                 {"experience", std::to_string(profile.experience)},
                 {"traits", join_traits(profile)},
                 {"routine", routine}});
}

void init_agent(Agent& agent, const TemplateSet& templates) {
    agent.perceive(MemoryKind::persona, build_persona_block(agent.profile()));
    const std::string intro = build_task_intro(agent.profile(), templates);
    agent.perceive(MemoryKind::task_intro, intro);
    agent.set_system_prompt(intro);
}

std::string canonical_criterion_key(std::string_view text) {
    // Numbers, in order of appearance, normalized (strip leading zeros,
    // keep fractional digits when present).
    std::vector<std::string> numbers;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!is_key_digit(text[i])) continue;
        std::size_t start = i;
        while (i < text.size() && is_key_digit(text[i])) ++i;
        std::string number(text.substr(start, i - start));
        if (i + 1 < text.size() && text[i] == '.' && is_key_digit(text[i + 1])) {
            std::size_t frac_start = i++;
            while (i < text.size() && is_key_digit(text[i])) ++i;
            number += text.substr(frac_start, i - frac_start);
        }
        // strip leading zeros of the integer part
        std::size_t keep = 0;
        while (keep + 1 < number.size() && number[keep] == '0' && number[keep + 1] != '.') ++keep;
        numbers.push_back(number.substr(keep));
        --i;
    }
    if (!numbers.empty()) {
        std::string key = "t:";
        for (std::size_t i = 0; i < numbers.size(); ++i) {
            if (i) key += ',';
            key += numbers[i];
        }
        return key;
    }
    // prose fallback: case-fold, punctuation to space, collapse whitespace
    std::string key = "w:";
    bool pending_space = false;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            if (pending_space && key.size() > 2) key += ' ';
            pending_space = false;
            key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else {
            pending_space = true;
        }
    }
    return key;
}

ElicitedCriterion elicit_criteria(Agent& agent, const TemplateSet& templates, Dimension d,
                                  int score) {
    if (score < 1 || score > 5) {
        throw Error(ErrorKind::precondition, "score must lie in 1..5");
    }
    if (!agent.has_memory(MemoryKind::task_intro, "")) {
        throw Error(ErrorKind::precondition,
                    "elicit_criteria requires an initialized agent (task intro)");
    }
    const std::string dim(to_string(d));
    std::string prompt = templates.get("elicit_criterion")
                             .render({{"score", std::to_string(score)}, {"dimension", dim}});
    auto response = agent.exchange(MemoryKind::criteria, dim, prompt,
                                   "elicit/" + agent.id() + "/" + dim + "/" +
                                       std::to_string(score));
    ElicitedCriterion criterion;
    criterion.agent_id = agent.id();
    criterion.dimension = d;
    criterion.score = score;
    criterion.criterion_text = response.text;
    criterion.canonical_key = canonical_criterion_key(response.text);
    return criterion;
}

UnifiedCriteria unify_criteria(std::span<const ElicitedCriterion> criteria) {
    // cell -> key -> votes / smallest representative text
    std::map<std::pair<int, int>, std::map<std::string, int>> counts;
    std::map<std::pair<int, int>, std::map<std::string, std::string>> samples;
    for (const auto& c : criteria) {
        if (c.score < 1 || c.score > 5) {
            throw Error(ErrorKind::validation, "criterion score out of range");
        }
        auto cell = std::make_pair(static_cast<int>(c.dimension), c.score);
        const std::string key =
            c.canonical_key.empty() ? canonical_criterion_key(c.criterion_text)
                                    : c.canonical_key;
        counts[cell][key] += 1;
        auto& sample = samples[cell][key];
        if (sample.empty() || c.criterion_text < sample) sample = c.criterion_text;
    }

    UnifiedCriteria out;
    for (Dimension d : kAllDimensions) {
        for (int s = 1; s <= 5; ++s) {
            auto cell = std::make_pair(static_cast<int>(d), s);
            auto it = counts.find(cell);
            if (it == counts.end()) {
                throw Error(ErrorKind::validation,
                            "no criteria elicited for (" + std::string(to_string(d)) +
                                ", " + std::to_string(s) + ")");
            }
            // modal key; ties resolve to the lexicographically smallest key
            std::string winner;
            int best = -1;
            for (const auto& [key, n] : it->second) {
                if (n > best || (n == best && key < winner)) {
                    winner = key;
                    best = n;
                }
            }
            VoteTally tally;
            tally.dimension = d;
            tally.score = s;
            tally.counts = it->second;
            tally.sample = samples[cell];
            tally.winner_key = winner;
            out.rubric.set(d, s, samples[cell][winner]);
            out.tallies.push_back(std::move(tally));
        }
    }
    out.rubric.validate();
    return out;
}

std::vector<DimensionOutcome> evaluate_article(Agent& agent, const Article& article,
                                               const Rubric& rubric,
                                               const TemplateSet& templates,
                                               std::span<const Dimension> dimensions) {
    rubric.validate();
    std::vector<DimensionOutcome> outcomes;
    for (Dimension d : dimensions) {
        const std::string dim(to_string(d));
        const std::string topic = evaluation_topic(article, d);
        DimensionOutcome outcome;
        outcome.dimension = d;
        try {
            // step 1: read carefully, with the article text
            agent.perceive(MemoryKind::article,
                           templates.get("eval_step1")
                               .render({{"title", article.title}, {"body", article.body}}),
                           topic);
            // step 2: the dimension's quantified criteria, all five score rows
            std::string criteria;
            for (int s = 5; s >= 1; --s) {
                criteria += "\n" + std::to_string(s) + ": " + rubric.lookup(d, s);
            }
            agent.perceive(MemoryKind::criteria,
                           templates.get("eval_step2")
                               .render({{"dimension", dim}, {"criteria", criteria}}),
                           dim);
            // step 3: the scoring instruction
            agent.perceive(MemoryKind::task_intro,
                           templates.get("eval_step3").render({{"dimension", dim}}), topic);

            agent.plan(article, d);
            agent.reflect(article, d);
            auto [rating, transcript_ref] = agent.rate(article, d);

            RatingRecord record;
            record.rater_id = agent.id();
            record.rater_kind = RaterKind::agent;
            record.article_id = article.id;
            record.dimension = d;
            record.score = rating;
            record.transcript_ref = transcript_ref;
            outcome.record = record;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::backend || e.kind() == ErrorKind::cassette_miss) {
                throw; // infrastructure failures abort the whole article
            }
            outcome.error = e.what();
        }
        outcomes.push_back(std::move(outcome));
    }
    return outcomes;
}

std::optional<int> parse_rating(std::string_view text) {
    if (text.size() > 64 * 1024) text = text.substr(text.size() - 64 * 1024);
    const std::string s(text);

    static const std::regex score_of(R"(score of\s*(\d{1,9}))", std::regex::icase);
    static const std::regex slash_five(R"((\d{1,9})\s*/\s*5(?![0-9]))");
    static const std::regex out_of_five(R"((\d{1,9})\s+out of\s+5(?![0-9]))",
                                        std::regex::icase);

    auto last_in_range = [&](const std::regex& re) -> std::optional<int> {
        std::optional<int> found;
        for (auto it = std::sregex_iterator(s.begin(), s.end(), re);
             it != std::sregex_iterator(); ++it) {
            const std::string digits = (*it)[1].str();
            if (digits.size() > 1) continue; // multi-digit is out of range
            int v = digits[0] - '0';
            if (v >= 1 && v <= 5) found = v;
        }
        return found;
    };

    if (auto v = last_in_range(score_of)) return v;
    if (auto v = last_in_range(slash_five)) return v;
    if (auto v = last_in_range(out_of_five)) return v;

    // bare trailing integer: last standalone 1..5 in the text
    std::optional<int> found;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!is_key_digit(s[i])) continue;
        std::size_t start = i;
        while (i < s.size() && is_key_digit(s[i])) ++i;
        const std::size_t len = i - start;
        auto is_wordish = [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
        };
        if (start > 0 && (is_wordish(s[start - 1]) || s[start - 1] == '.')) continue;
        if (i < s.size()) {
            if (is_wordish(s[i])) continue;
            if (s[i] == '.' && i + 1 < s.size() && is_key_digit(s[i + 1])) continue;
        }
        if (len != 1) continue;
        int v = s[start] - '0';
        if (v >= 1 && v <= 5) found = v;
    }
    return found;
}

std::vector<Article> load_fewshot_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw Error(ErrorKind::config, "few-shot directory not found: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Article> exemplars;
    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        std::string line, title, body;
        if (!std::getline(in, line)) continue;
        title = line;
        std::ostringstream rest;
        rest << in.rdbuf();
        body = rest.str();
        while (!body.empty() && (body.front() == '\n' || body.front() == '\r')) body.erase(0, 1);
        while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
        if (title.empty() || body.empty()) continue;
        Article a;
        a.id = "fewshot:" + file.stem().string();
        a.title = title;
        a.body = body;
        a.generator = "fewshot";
        exemplars.push_back(std::move(a));
    }
    if (exemplars.empty()) {
        throw Error(ErrorKind::config, "no usable few-shot exemplars in " + dir.string());
    }
    return exemplars;
}

int count_sentences(std::string_view text) {
    int count = 0;
    bool content_since_terminal = false;
    for (char c : text) {
        if (c == '.' || c == '!' || c == '?') {
            if (content_since_terminal) ++count;
            content_since_terminal = false;
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            content_since_terminal = true;
        }
    }
    if (content_since_terminal) ++count; // unterminated trailing sentence
    return count;
}

namespace {

Article parse_generated(const std::string& text, const GenerationConfig& config, int index) {
    std::istringstream in(text);
    std::string title;
    std::getline(in, title);
    std::ostringstream rest;
    rest << in.rdbuf();
    std::string body = rest.str();
    while (!body.empty() && (body.front() == '\n' || body.front() == '\r')) body.erase(0, 1);
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();

    Article a;
    char id[16];
    std::snprintf(id, sizeof id, "art-%03d", index + 1);
    a.id = id;
    a.title = title;
    a.body = body;
    a.generator = config.model;
    return a;
}

} // namespace

Article generate_article(Backend& backend, const GenerationConfig& config,
                         std::span<const Article> fewshot, const TemplateSet& templates,
                         int index, const std::string& seed) {
    if (fewshot.empty()) {
        throw Error(ErrorKind::precondition, "generate_article requires >= 1 few-shot exemplar");
    }
    std::string examples;
    for (const auto& ex : fewshot) {
        if (!examples.empty()) examples += "\n\n";
        examples += "Title: " + ex.title + "\n" + ex.body;
    }
    std::string prompt = templates.get("generate_article").render({{"examples", examples}});

    CompletionRequest request;
    request.model = config.model;
    request.temperature = config.temperature;
    request.seed_tag = seed + "/gen/" + config.model + "/" + std::to_string(index);
    request.messages = {{Role::user, prompt}};

    for (int attempt = 0; attempt < 2; ++attempt) {
        CompletionResponse response = backend.complete(request);
        Article a = parse_generated(response.text, config, index);
        if (!a.title.empty() && !a.body.empty() && count_sentences(a.body) >= 2) {
            return a;
        }
        // quality retry: nudge for a full-length story, once
        request.messages.push_back({Role::assistant, response.text});
        request.messages.push_back(
            {Role::user, "Please write the full 6-sentence story with a title line."});
    }
    throw Error(ErrorKind::parse, "generation quality failure for article index " +
                                      std::to_string(index) + " (empty or too short)");
}

BaselineResult baseline_single_prompt(Backend& backend, const Article& article, Dimension d,
                                      const TemplateSet& templates, const std::string& model,
                                      double temperature, const std::string& seed) {
    const std::string dim(to_string(d));
    CompletionRequest request;
    request.model = model;
    request.temperature = temperature;
    request.seed_tag = seed + "/baseline/" + article.id + "/" + dim;
    request.messages = {{Role::user, templates.get("baseline_1to5")
                                         .render({{"dimension", dim},
                                                  {"title", article.title},
                                                  {"body", article.body}})}};
    CompletionResponse response = backend.complete(request);
    auto parsed = parse_rating(response.text);
    if (!parsed) {
        throw Error(ErrorKind::parse,
                    "baseline rating unparseable for (" + article.id + ", " + dim +
                        "): " + response.text);
    }
    return {Rating(*parsed), std::move(request), std::move(response)};
}

} // namespace agenteval
