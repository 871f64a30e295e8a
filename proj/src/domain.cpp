#include "agenteval/domain.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agenteval/csv.hpp"
#include "agenteval/errors.hpp"

namespace agenteval {

namespace {

std::string fold(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

int parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::parse, "bad integer for " + what + ": '" + s + "'");
    }
}

} // namespace

std::string_view to_string(Dimension d) {
    switch (d) {
        case Dimension::Coherence: return "Coherence";
        case Dimension::Relevance: return "Relevance";
        case Dimension::Interestingness: return "Interestingness";
        case Dimension::Fairness: return "Fairness";
        case Dimension::Clarity: return "Clarity";
    }
    throw Error(ErrorKind::validation, "bad dimension value");
}

Dimension dimension_from_string(std::string_view name) {
    std::string folded = fold(trim(name));
    for (Dimension d : kAllDimensions) {
        if (folded == fold(to_string(d))) return d;
    }
    throw Error(ErrorKind::parse, "unknown dimension: '" + std::string(name) + "'");
}

Rating::Rating(int value) : value_(value) {
    if (value < 1 || value > 5) {
        throw Error(ErrorKind::validation,
                    "rating out of range 1..5: " + std::to_string(value));
    }
}

std::string canonical_trait(std::string_view trait) {
    return fold(trim(trait));
}

PersonaProfile validate_profile(const std::string& name, int age,
                                const std::string& job, int experience,
                                const std::vector<std::string>& traits,
                                std::optional<std::string> daily_routine) {
    std::vector<std::string> violations;
    if (trim(name).empty()) violations.push_back("name must be non-empty");
    if (age <= 0) violations.push_back("age must be positive");
    if (trim(job).empty()) violations.push_back("job must be non-empty");
    if (experience < 0) violations.push_back("experience must be non-negative");
    if (traits.size() != 3) {
        violations.push_back("exactly 3 traits required, got " +
                             std::to_string(traits.size()));
    } else {
        std::set<std::string> seen;
        for (const auto& t : traits) {
            if (trim(t).empty()) {
                violations.push_back("trait must be non-empty");
            } else if (!seen.insert(canonical_trait(t)).second) {
                violations.push_back("duplicate trait: '" + trim(t) + "'");
            }
        }
    }
    if (!violations.empty()) throw ValidationError(std::move(violations));

    PersonaProfile p;
    p.name = trim(name);
    p.age = age;
    p.job = trim(job);
    p.experience = experience;
    for (std::size_t i = 0; i < 3; ++i) p.traits[i] = trim(traits[i]);
    if (daily_routine && !trim(*daily_routine).empty()) p.daily_routine = trim(*daily_routine);
    return p;
}

int Article::word_count() const {
    int count = 0;
    bool in_word = false;
    for (char c : body) {
        bool is_space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!is_space && !in_word) ++count;
        in_word = !is_space;
    }
    return count;
}

const std::string& Rubric::lookup(Dimension d, int score) const {
    if (score < 1 || score > 5) {
        throw Error(ErrorKind::validation,
                    "rubric score out of range 1..5: " + std::to_string(score));
    }
    return criteria_[static_cast<std::size_t>(d)][static_cast<std::size_t>(score - 1)];
}

void Rubric::set(Dimension d, int score, std::string text) {
    if (score < 1 || score > 5) {
        throw Error(ErrorKind::validation,
                    "rubric score out of range 1..5: " + std::to_string(score));
    }
    criteria_[static_cast<std::size_t>(d)][static_cast<std::size_t>(score - 1)] =
        std::move(text);
}

void Rubric::validate() const {
    std::vector<std::string> missing;
    for (Dimension d : kAllDimensions) {
        for (int s = 1; s <= 5; ++s) {
            if (lookup(d, s).empty()) {
                missing.push_back("empty criterion for (" + std::string(to_string(d)) +
                                  ", " + std::to_string(s) + ")");
            }
        }
    }
    if (!missing.empty()) throw ValidationError(std::move(missing));
}

nlohmann::json Rubric::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (Dimension d : kAllDimensions) {
        nlohmann::json scores = nlohmann::json::object();
        for (int s = 1; s <= 5; ++s) scores[std::to_string(s)] = lookup(d, s);
        j[std::string(to_string(d))] = scores;
    }
    return j;
}

Rubric Rubric::from_json(const nlohmann::json& j) {
    Rubric r;
    if (!j.is_object()) throw Error(ErrorKind::parse, "rubric JSON must be an object");
    for (Dimension d : kAllDimensions) {
        auto it = j.find(std::string(to_string(d)));
        if (it == j.end()) {
            // accept any capitalization of the dimension key
            for (auto probe = j.begin(); probe != j.end(); ++probe) {
                if (fold(probe.key()) == fold(to_string(d))) { it = probe; break; }
            }
        }
        if (it == j.end()) {
            throw Error(ErrorKind::parse,
                        "rubric missing dimension " + std::string(to_string(d)));
        }
        for (int s = 1; s <= 5; ++s) {
            auto cell = it->find(std::to_string(s));
            if (cell == it->end() || !cell->is_string()) {
                throw Error(ErrorKind::parse, "rubric missing (" +
                                                  std::string(to_string(d)) + ", " +
                                                  std::to_string(s) + ")");
            }
            r.set(d, s, cell->get<std::string>());
        }
    }
    r.validate();
    return r;
}

Rubric Rubric::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "cannot open rubric " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, "rubric " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

void Rubric::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << to_json().dump(2) << '\n';
}

const std::string& rubric_lookup(const Rubric& rubric, Dimension d, int score) {
    return rubric.lookup(d, score);
}

std::string_view to_string(RaterKind k) {
    return k == RaterKind::human ? "human" : "agent";
}

RaterKind rater_kind_from_string(std::string_view name) {
    std::string folded = fold(trim(name));
    if (folded == "human") return RaterKind::human;
    if (folded == "agent") return RaterKind::agent;
    throw Error(ErrorKind::parse, "unknown rater kind: '" + std::string(name) + "'");
}

std::vector<PersonaProfile> load_participants(const std::filesystem::path& path) {
    CsvTable table = read_csv(path);
    const std::vector<std::string> required = {"name", "age", "job", "experience", "traits"};
    if (table.header.size() < required.size()) {
        throw Error(ErrorKind::parse, "participants header must start with "
                                      "name,age,job,experience,traits");
    }
    for (std::size_t i = 0; i < required.size(); ++i) {
        if (fold(trim(table.header[i])) != required[i]) {
            throw Error(ErrorKind::parse,
                        "participants column " + std::to_string(i) + " must be '" +
                            required[i] + "', got '" + table.header[i] + "'");
        }
    }
    int routine_col = -1;
    for (std::size_t i = required.size(); i < table.header.size(); ++i) {
        if (fold(trim(table.header[i])) == "daily_routine") routine_col = static_cast<int>(i);
    }

    std::vector<PersonaProfile> profiles;
    std::set<std::string> names;
    for (const auto& row : table.rows) {
        std::vector<std::string> traits;
        std::stringstream ss(row[4]);
        std::string part;
        while (std::getline(ss, part, ';')) traits.push_back(trim(part));
        std::optional<std::string> routine;
        if (routine_col >= 0 && !trim(row[static_cast<std::size_t>(routine_col)]).empty()) {
            routine = trim(row[static_cast<std::size_t>(routine_col)]);
        }
        PersonaProfile p = validate_profile(row[0], parse_int(trim(row[1]), "age"), row[2],
                                            parse_int(trim(row[3]), "experience"), traits,
                                            routine);
        if (!names.insert(p.name).second) {
            throw Error(ErrorKind::validation, "duplicate participant name: " + p.name);
        }
        profiles.push_back(std::move(p));
    }
    if (profiles.empty()) throw Error(ErrorKind::validation, "no participants in " + path.string());
    return profiles;
}

void save_participants(const std::filesystem::path& path,
                       std::span<const PersonaProfile> profiles) {
    std::vector<std::vector<std::string>> rows;
    bool any_routine = std::any_of(profiles.begin(), profiles.end(),
                                   [](const auto& p) { return p.daily_routine.has_value(); });
    for (const auto& p : profiles) {
        std::string traits = p.traits[0] + ";" + p.traits[1] + ";" + p.traits[2];
        std::vector<std::string> row = {p.name, std::to_string(p.age), p.job,
                                        std::to_string(p.experience), traits};
        if (any_routine) row.push_back(p.daily_routine.value_or(""));
        rows.push_back(std::move(row));
    }
    std::vector<std::string> header = {"name", "age", "job", "experience", "traits"};
    if (any_routine) header.push_back("daily_routine");
    write_csv(path, header, rows);
}

std::vector<Article> load_articles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "cannot open articles " + path.string());
    std::vector<Article> articles;
    std::set<std::string> ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line_no) +
                                              ": " + e.what());
        }
        Article a;
        a.id = j.value("id", "");
        a.title = j.value("title", "");
        a.body = j.value("body", "");
        a.generator = j.value("generator", "");
        if (a.id.empty() || a.title.empty() || a.body.empty()) {
            throw Error(ErrorKind::validation,
                        path.string() + ":" + std::to_string(line_no) +
                            ": article needs non-empty id, title and body");
        }
        if (!ids.insert(a.id).second) {
            throw Error(ErrorKind::validation, "duplicate article id: " + a.id);
        }
        articles.push_back(std::move(a));
    }
    return articles;
}

void save_articles(const std::filesystem::path& path, std::span<const Article> articles) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    for (const auto& a : articles) {
        nlohmann::json j;
        j["id"] = a.id;
        j["title"] = a.title;
        j["body"] = a.body;
        j["generator"] = a.generator;
        out << j.dump() << '\n';
    }
}

std::vector<RatingRecord> load_ratings(const std::filesystem::path& path) {
    CsvTable table = read_csv(path);
    const std::vector<std::string> expected = {"rater_id", "rater_kind", "article_id",
                                               "dimension", "score"};
    if (table.header.size() < expected.size()) {
        throw Error(ErrorKind::parse, "ratings header must start with "
                                      "rater_id,rater_kind,article_id,dimension,score");
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (fold(trim(table.header[i])) != expected[i]) {
            throw Error(ErrorKind::parse,
                        "ratings column " + std::to_string(i) + " must be '" + expected[i] +
                            "', got '" + table.header[i] + "'");
        }
    }
    int ref_col = -1;
    for (std::size_t i = expected.size(); i < table.header.size(); ++i) {
        if (fold(trim(table.header[i])) == "transcript_ref") ref_col = static_cast<int>(i);
    }

    std::vector<RatingRecord> records;
    std::set<std::string> keys;
    for (const auto& row : table.rows) {
        RatingRecord r{row[0], rater_kind_from_string(row[1]), row[2],
                       dimension_from_string(row[3]),
                       Rating(parse_int(trim(row[4]), "score")), std::nullopt};
        if (ref_col >= 0 && !row[static_cast<std::size_t>(ref_col)].empty()) {
            r.transcript_ref = row[static_cast<std::size_t>(ref_col)];
        }
        std::string key = r.rater_id + "\x1f" + r.article_id + "\x1f" +
                          std::string(to_string(r.dimension));
        if (!keys.insert(key).second) {
            throw Error(ErrorKind::validation,
                        "duplicate rating for (" + r.rater_id + ", " + r.article_id + ", " +
                            std::string(to_string(r.dimension)) + ")");
        }
        records.push_back(std::move(r));
    }
    return records;
}

void save_ratings(const std::filesystem::path& path, std::span<const RatingRecord> records) {
    std::vector<std::vector<std::string>> rows;
    bool any_ref = std::any_of(records.begin(), records.end(),
                               [](const auto& r) { return r.transcript_ref.has_value(); });
    for (const auto& r : records) {
        std::vector<std::string> row = {r.rater_id, std::string(to_string(r.rater_kind)),
                                        r.article_id, std::string(to_string(r.dimension)),
                                        std::to_string(r.score.value())};
        if (any_ref) row.push_back(r.transcript_ref.value_or(""));
        rows.push_back(std::move(row));
    }
    std::vector<std::string> header = {"rater_id", "rater_kind", "article_id", "dimension",
                                       "score"};
    if (any_ref) header.push_back("transcript_ref");
    write_csv(path, header, rows);
}

} // namespace agenteval
