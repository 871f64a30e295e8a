// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code 0 only if all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agenteval/backend.hpp"
#include "agenteval/csv.hpp"
#include "agenteval/domain.hpp"
#include "agenteval/errors.hpp"
#include "agenteval/protocol.hpp"
#include "agenteval/stats.hpp"
#include "../support/reference_stats.hpp"
#include "../support/test_util.hpp"

using namespace agenteval;
namespace st = agenteval::stats;
using testutil::TempDir;
using testutil::run_cli;
using testutil::slurp;

namespace {

struct Failure {
    std::string reason;
};

void require(bool ok, const std::string& reason) {
    if (!ok) throw Failure{reason};
}

std::vector<double> random_scores(std::mt19937& rng, std::size_t n) {
    std::uniform_real_distribution<double> score(1.0, 5.0);
    std::vector<double> out(n);
    for (auto& v : out) v = score(rng);
    return out;
}

// --- 1. formula oracle equivalence -------------------------------------------

void criterion_formula_oracles() {
    std::mt19937 rng(101);
    std::uniform_int_distribution<std::size_t> size(2, 200);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 100; ++i) {
        const auto n = size(rng);
        auto h = random_scores(rng, n);
        auto c = random_scores(rng, n);
        require(std::abs(st::rmse(h, c) - refstats::rmse(h, c)) < 1e-12,
                "rmse diverged from the brute-force oracle");
        require(std::abs(st::mae(h, c) - refstats::mae(h, c)) < 1e-12,
                "mae diverged from the brute-force oracle");
        require(std::abs(st::pearson(h, c).r - refstats::pearson(h, c)) < 1e-12,
                "pearson diverged from the brute-force oracle");
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    require(elapsed < 1.0, "100 fixtures took " + std::to_string(elapsed) + " s (>= 1 s)");
}

// --- 2. anova correctness ------------------------------------------------------

void criterion_anova() {
    std::vector<std::vector<double>> fixture = {{1, 2, 3, 4}, {2, 3, 4, 5}};
    auto r = st::anova_one_way(fixture);
    require(std::abs(r.ss_between - 2.0) < 1e-12, "ss_between != 2");
    require(std::abs(r.ss_within - 10.0) < 1e-12, "ss_within != 10");
    require(std::abs(r.f_value - 1.2) < 1e-12, "f != 1.2");
    require(r.df_between == 1 && r.df_within == 6, "df != (1,6)");
    require(std::abs(r.p_value - 0.315) < 1e-3, "p not ~0.315");
    require(std::abs(r.p_value - refstats::f_upper_tail_quadrature(1.2, 1, 6)) < 1e-3,
            "p diverged from the reference oracle");

    std::mt19937 rng(202);
    std::uniform_int_distribution<std::size_t> size(2, 40);
    for (int i = 0; i < 50; ++i) {
        std::vector<std::vector<double>> groups = {random_scores(rng, size(rng)),
                                                   random_scores(rng, size(rng))};
        auto mine = st::anova_one_way(groups);
        auto ref = refstats::anova(groups);
        require(std::abs(mine.f_value - ref.f_value) < 1e-9,
                "random fixture f diverged beyond 1e-9");
        require(std::abs(mine.p_value - ref.p_value) < 1e-6,
                "random fixture p diverged beyond 1e-6");
    }
}

// --- 3. degenerate statistics ---------------------------------------------------

void criterion_degenerate() {
    std::vector<std::vector<double>> identical = {{1, 2, 3}, {1, 2, 3}};
    auto r = st::anova_one_way(identical);
    require(r.f_value == 0.0 && r.p_value == 1.0, "identical groups not (f=0, p=1)");

    bool typed_error = false;
    try {
        auto result = st::pearson(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3});
        require(!std::isnan(result.r), "pearson returned NaN instead of an error");
    } catch (const Error& e) {
        typed_error = e.kind() == ErrorKind::stats;
    }
    require(typed_error, "zero-variance pearson did not raise the typed error");

    std::mt19937 rng(303);
    std::uniform_int_distribution<std::size_t> size(2, 200);
    for (int i = 0; i < 100; ++i) {
        const auto n = size(rng);
        auto h = random_scores(rng, n);
        auto c = random_scores(rng, n);
        require(st::rmse(h, c) >= st::mae(h, c), "rmse < mae on a random fixture");
    }
}

// --- 4. fisher ci recipe ---------------------------------------------------------

void criterion_fisher() {
    std::vector<double> same(10, 0.38);
    auto flat = st::aggregate_pearson_ci(same);
    require(flat.half_width == 0.0, "identical rs did not collapse the interval");

    std::vector<double> rs = {0.1, 0.25, 0.4, 0.55};
    auto pos = st::aggregate_pearson_ci(rs);
    std::vector<double> negated = rs;
    for (auto& v : negated) v = -v;
    auto neg = st::aggregate_pearson_ci(negated);
    require(std::abs(neg.mean_r + pos.mean_r) < 1e-12, "negation did not negate mean_r");
    require(std::abs(neg.half_width - pos.half_width) < 1e-12,
            "negation changed the half-width");

    std::vector<double> fixture = {0.2, 0.3, 0.4, 0.5};
    auto ci = st::aggregate_pearson_ci(fixture);
    auto ref = refstats::fisher_ci_95(fixture);
    require(std::abs(ci.mean_r - ref.mean_r) < 1e-9, "fixture mean_r diverged beyond 1e-9");
    require(std::abs(ci.half_width - ref.half_width) < 1e-9,
            "fixture half-width diverged beyond 1e-9");
}

// --- 5. regression recovery -------------------------------------------------------

std::vector<PersonaProfile> regression_panel() {
    auto profile = [](std::string name, int age, int exp, std::vector<std::string> traits) {
        return validate_profile(name, age, "Researcher", exp, traits);
    };
    return {
        profile("r1", 23, 1, {"Curious", "Patient", "Logical"}),
        profile("r2", 31, 4, {"Curious", "Creative", "Assertive"}),
        profile("r3", 37, 2, {"Patient", "Creative", "Logical"}),
        profile("r4", 45, 8, {"Assertive", "Patient", "Curious"}),
        profile("r5", 52, 3, {"Logical", "Creative", "Assertive"}),
        profile("r6", 29, 6, {"Curious", "Logical", "Assertive"}),
        profile("r7", 41, 5, {"Patient", "Creative", "Curious"}),
        profile("r8", 36, 9, {"Assertive", "Logical", "Patient"}),
        profile("r9", 48, 2, {"Creative", "Curious", "Logical"}),
    };
}

void criterion_regression() {
    auto panel = regression_panel();
    std::vector<double> planted;
    for (const auto& p : panel) planted.push_back(0.5 * p.age);
    auto w = st::feature_importance(panel, planted, Dimension::Coherence);
    require(std::abs(w.weights.at("age") - 0.5) < 1e-6, "planted age weight missed 0.5");
    for (const auto& [name, weight] : w.weights) {
        if (name != "age") {
            require(std::abs(weight) < 1e-6, "non-planted weight " + name + " not ~0");
        }
    }

    std::mt19937 rng(404);
    std::uniform_real_distribution<double> score(1.0, 5.0);
    for (int round = 0; round < 10; ++round) {
        std::vector<double> y;
        for (std::size_t i = 0; i < panel.size(); ++i) y.push_back(score(rng));
        auto mine = st::feature_importance(panel, y, Dimension::Relevance);
        auto design = st::one_hot_profiles(panel);
        auto ref = refstats::centered_min_norm_fit(design.rows, y);
        for (std::size_t j = 0; j < design.feature_names.size(); ++j) {
            require(std::abs(mine.weights.at(design.feature_names[j]) - ref.weights[j]) <
                        1e-8,
                    "random instance diverged from the normal-equations oracle");
        }

        auto shifted_y = y;
        for (auto& v : shifted_y) v += 1.75;
        auto shifted = st::feature_importance(panel, shifted_y, Dimension::Relevance);
        require(std::abs(shifted.intercept - (mine.intercept + 1.75)) < 1e-9,
                "constant shift did not land in the intercept");
        for (const auto& [name, weight] : mine.weights) {
            require(std::abs(shifted.weights.at(name) - weight) < 1e-9,
                    "constant shift changed feature weight " + name);
        }
        require(shifted.ranking == mine.ranking, "constant shift changed the ranking");
    }
}

// --- 6. rubric fidelity --------------------------------------------------------------

void criterion_rubric() {
    Rubric rubric = Rubric::load(testutil::data_dir() / "rubric_appendix_a.json");
    rubric.validate();
    require(rubric.lookup(Dimension::Coherence, 5) ==
                "Logical progression with no more than 1 minor disruption.",
            "(Coherence, 5) text mismatch");
    require(rubric.lookup(Dimension::Relevance, 3) == "50-74% relevant to the title.",
            "(Relevance, 3) text mismatch");
    require(rubric.lookup(Dimension::Interestingness, 1) ==
                "Not engaging; 0-1 interesting points.",
            "(Interestingness, 1) text mismatch");

    TempDir tmp;
    rubric.save(tmp / "rubric.json");
    Rubric again = Rubric::load(tmp / "rubric.json");
    for (Dimension d : kAllDimensions) {
        for (int s = 1; s <= 5; ++s) {
            require(again.lookup(d, s) == rubric.lookup(d, s),
                    "round-trip changed a criterion");
            require(!again.lookup(d, s).empty(), "round-trip emptied a criterion");
        }
    }
}

// --- 7 + 8 + 9 + 11. end-to-end runs ------------------------------------------------

struct E2eArtifacts {
    TempDir tmp;
    std::filesystem::path panel;
    std::filesystem::path articles;
    std::filesystem::path first_out;
};

E2eArtifacts& e2e() {
    static E2eArtifacts artifacts;
    static bool initialized = [] {
        auto& a = artifacts;
        auto profiles = load_participants(testutil::data_dir() / "participants.csv");
        profiles.resize(2);
        a.panel = a.tmp / "panel2.csv";
        save_participants(a.panel, profiles);

        std::vector<Article> articles;
        for (int i = 0; i < 3; ++i) {
            articles.push_back(
                {"art-" + std::to_string(i + 1), "Fixture Title " + std::to_string(i + 1),
                 "Opening sentence number " + std::to_string(i + 1) +
                     ". A middle sentence follows. A closing sentence ends it.",
                 i % 2 == 0 ? "gpt4" : "ollama3.1"});
        }
        a.articles = a.tmp / "articles.jsonl";
        save_articles(a.articles, articles);
        return true;
    }();
    (void)initialized;
    return artifacts;
}

void criterion_deterministic_e2e() {
    auto& a = e2e();
    const std::string common = " --participants " + a.panel.string() + " --articles " +
                               a.articles.string();
    const auto start = std::chrono::steady_clock::now();
    require(run_cli("elicit --backend mock --participants " + a.panel.string() + " --out " +
                    (a.tmp / "eli").string()) == 0,
            "elicit failed");
    require(run_cli("evaluate --backend mock" + common + " --rubric " +
                    (a.tmp / "eli" / "rubric.json").string() + " --out " +
                    (a.tmp / "ev1").string()) == 0,
            "evaluate failed");
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    require(elapsed < 5.0, "elicit + evaluate took " + std::to_string(elapsed) + " s (>= 5)");

    auto ratings = load_ratings(a.tmp / "ev1" / "ratings.csv");
    require(ratings.size() == 30, "expected exactly 30 rating rows, got " +
                                      std::to_string(ratings.size()));
    for (const auto& r : ratings) {
        require(r.score.value() >= 1 && r.score.value() <= 5, "score out of 1..5");
    }

    require(run_cli("evaluate --backend mock" + common + " --rubric " +
                    (a.tmp / "eli" / "rubric.json").string() + " --out " +
                    (a.tmp / "ev2").string()) == 0,
            "second evaluate failed");
    require(slurp(a.tmp / "ev1" / "ratings.csv") == slurp(a.tmp / "ev2" / "ratings.csv"),
            "rating CSVs are not byte-identical across runs");
    for (const char* name : {"Sarah.jsonl", "Alex.jsonl"}) {
        require(slurp(a.tmp / "ev1" / "transcripts" / name) ==
                    slurp(a.tmp / "ev2" / "transcripts" / name),
                std::string("transcript ") + name + " not byte-identical across runs");
    }
    e2e().first_out = a.tmp / "ev1";
}

void criterion_replay() {
    auto& a = e2e();
    const std::string common = " --participants " + a.panel.string() + " --articles " +
                               a.articles.string() + " --rubric " +
                               (a.tmp / "eli" / "rubric.json").string();
    require(run_cli("evaluate --backend record --record-from mock" + common + " --out " +
                    (a.tmp / "rec").string()) == 0,
            "record run failed");
    require(std::filesystem::exists(a.tmp / "rec" / "cassette.jsonl"),
            "record run wrote no cassette");

    require(run_cli("evaluate --backend replay --cassette " +
                    (a.tmp / "rec" / "cassette.jsonl").string() + common + " --out " +
                    (a.tmp / "rep").string()) == 0,
            "replay run failed");
    require(slurp(a.tmp / "rec" / "ratings.csv") == slurp(a.tmp / "rep" / "ratings.csv"),
            "replayed ratings diverged from the recorded run");
    for (const char* name : {"Sarah.jsonl", "Alex.jsonl"}) {
        require(slurp(a.tmp / "rec" / "transcripts" / name) ==
                    slurp(a.tmp / "rep" / "transcripts" / name),
                "replayed transcript diverged from the recorded run");
    }

    std::string output;
    int code = run_cli("evaluate --backend replay --cassette " +
                           (a.tmp / "rec" / "cassette.jsonl").string() + common +
                           " --seed unseen --out " + (a.tmp / "miss").string(),
                       &output);
    require(code == 3, "cassette miss exited " + std::to_string(code) + ", expected 3");
    auto at = output.find("cassette miss for digest ");
    require(at != std::string::npos, "cassette miss did not name a digest");
    const std::string digest = output.substr(at + 25, 64);
    require(digest.size() == 64 &&
                digest.find_first_not_of("0123456789abcdef") == std::string::npos,
            "named digest is not a 64-hex sha256");
}

void criterion_protocol_shape() {
    auto& a = e2e();
    require(!a.first_out.empty(), "deterministic e2e must run first");
    auto articles = load_articles(a.articles);

    for (const char* name : {"Sarah.jsonl", "Alex.jsonl"}) {
        std::istringstream in(slurp(a.first_out / "transcripts" / name));
        struct Line {
            std::int64_t seq;
            std::string kind, topic;
        };
        std::vector<Line> lines;
        std::string raw;
        while (std::getline(in, raw)) {
            if (raw.empty()) continue;
            auto j = nlohmann::json::parse(raw);
            lines.push_back({j.at("seq").get<std::int64_t>(), j.at("kind"), j.at("topic")});
        }
        require(!lines.empty(), "transcript is empty");
        for (std::size_t i = 1; i < lines.size(); ++i) {
            require(lines[i].seq > lines[i - 1].seq, "transcript seq not strictly increasing");
        }

        for (const auto& article : articles) {
            for (Dimension d : kAllDimensions) {
                const std::string topic = evaluation_topic(article, d);
                const std::string dim(to_string(d));
                // expected order: step1 (article), step2 (criteria), step3
                // (task_intro), then plan, reflection, rating
                const std::vector<std::pair<std::string, std::string>> expected = {
                    {"article", topic}, {"criteria", dim},     {"task_intro", topic},
                    {"plan", topic},    {"reflection", topic}, {"rating", topic},
                };
                std::size_t stage = 0;
                std::int64_t last_seq = -1;
                for (const auto& line : lines) {
                    if (stage >= expected.size()) break;
                    if (line.kind == expected[stage].first &&
                        line.topic == expected[stage].second) {
                        require(line.seq > last_seq, "step seq not strictly increasing");
                        last_seq = line.seq;
                        ++stage;
                    }
                }
                require(stage == expected.size(),
                        "missing evaluation step " + std::to_string(stage + 1) + " for (" +
                            article.id + ", " + dim + ")");
            }
        }
    }

    // the 1-to-5 baseline is a single exchange with no rubric text
    class CapturingBackend : public Backend {
    public:
        CompletionResponse complete(const CompletionRequest& request) override {
            requests.push_back(request);
            return inner.complete(request);
        }
        std::string name() const override { return "capturing"; }
        std::vector<CompletionRequest> requests;
        MockBackend inner;
    };
    CapturingBackend capture;
    Rubric rubric = Rubric::load(a.tmp / "eli" / "rubric.json");
    auto article = load_articles(a.articles).front();
    (void)baseline_single_prompt(capture, article, Dimension::Coherence,
                                 TemplateSet::builtin(), "mock-model", 0.8, "0");
    require(capture.requests.size() == 1, "baseline made more than one exchange");
    for (const auto& message : capture.requests.front().messages) {
        for (Dimension d : kAllDimensions) {
            for (int s = 1; s <= 5; ++s) {
                require(message.content.find(rubric.lookup(d, s)) == std::string::npos,
                        "baseline prompt leaked rubric text");
            }
        }
    }
}

// --- 10. vote properties ---------------------------------------------------------

void criterion_votes() {
    std::mt19937 rng(505);
    std::uniform_int_distribution<int> votes_per_cell(1, 7);
    std::uniform_int_distribution<int> threshold(1, 4);

    for (int round = 0; round < 100; ++round) {
        std::vector<ElicitedCriterion> criteria;
        std::map<std::pair<int, int>, std::map<std::string, int>> expected_counts;
        for (Dimension d : kAllDimensions) {
            for (int s = 1; s <= 5; ++s) {
                const int n = votes_per_cell(rng);
                for (int v = 0; v < n; ++v) {
                    const int lapses = threshold(rng), drift = threshold(rng);
                    ElicitedCriterion c;
                    c.agent_id = "agent-" + std::to_string(v);
                    c.dimension = d;
                    c.score = s;
                    c.criterion_text = "Allows " + std::to_string(lapses) + " lapses and " +
                                       std::to_string(drift) + "0% drift";
                    c.canonical_key = canonical_criterion_key(c.criterion_text);
                    expected_counts[{static_cast<int>(d), s}][c.canonical_key] += 1;
                    criteria.push_back(std::move(c));
                }
            }
        }

        auto unified = unify_criteria(criteria);
        for (Dimension d : kAllDimensions) {
            for (int s = 1; s <= 5; ++s) {
                const auto& counts = expected_counts[{static_cast<int>(d), s}];
                // independent mode computation with lexicographic tie-break
                std::string best_key;
                int best = -1;
                for (const auto& [key, count] : counts) {
                    if (count > best || (count == best && key < best_key)) {
                        best_key = key;
                        best = count;
                    }
                }
                const std::string winner_key =
                    canonical_criterion_key(unified.rubric.lookup(d, s));
                require(winner_key == best_key, "winner is not the modal key");
            }
        }

        std::shuffle(criteria.begin(), criteria.end(), rng);
        auto reshuffled = unify_criteria(criteria);
        require(reshuffled.rubric == unified.rubric,
                "unify_criteria is not permutation-invariant");
    }

    // explicit tie: both keys appear once, smallest key must win
    std::vector<ElicitedCriterion> tie;
    for (Dimension d : kAllDimensions) {
        for (int s = 1; s <= 5; ++s) {
            for (const char* text : {"Allows 9 lapses", "Allows 2 lapses"}) {
                ElicitedCriterion c;
                c.dimension = d;
                c.score = s;
                c.criterion_text = text;
                c.canonical_key = canonical_criterion_key(text);
                tie.push_back(std::move(c));
            }
        }
    }
    auto unified = unify_criteria(tie);
    require(canonical_criterion_key(unified.rubric.lookup(Dimension::Clarity, 4)) == "t:2",
            "tie did not resolve to the lexicographically smallest key");
}

// --- 11. report shape -------------------------------------------------------------

void criterion_report_shape() {
    auto& a = e2e();
    require(!a.first_out.empty(), "deterministic e2e must run first");

    // synthetic paired human file: same raters, perturbed scores
    auto records = load_ratings(a.first_out / "ratings.csv");
    std::mt19937 rng(606);
    std::uniform_int_distribution<int> jitter(-1, 1);
    for (auto& r : records) {
        r.rater_kind = RaterKind::human;
        r.score = Rating(std::clamp(r.score.value() + jitter(rng), 1, 5));
        r.transcript_ref.reset();
    }
    save_ratings(a.tmp / "human.csv", records);

    require(run_cli("analyze --human " + (a.tmp / "human.csv").string() + " --agent " +
                    (a.first_out / "ratings.csv").string() + " --articles " +
                    a.articles.string() + " --participants " + a.panel.string() + " --out " +
                    (a.tmp / "an").string()) == 0,
            "analyze failed");

    CsvTable anova = read_csv(a.tmp / "an" / "anova.csv");
    require(anova.header == std::vector<std::string>{"metric", "ss_between", "ss_error",
                                                     "ms_between", "ms_error", "f_value",
                                                     "p_value"},
            "anova.csv columns do not mirror the expected table");
    require(anova.rows.size() == 6, "anova.csv must list 5 dimensions + Average");
    for (std::size_t i = 0; i < 5; ++i) {
        require(anova.rows[i][0] == std::string(to_string(kAllDimensions[i])),
                "anova.csv rows not in canonical dimension order");
    }

    CsvTable errors = read_csv(a.tmp / "an" / "errors.csv");
    require(errors.header == std::vector<std::string>{"attribute", "framework", "rmse",
                                                      "mae"},
            "errors.csv columns do not mirror the expected table");
    require(errors.rows.size() == 5, "errors.csv must list one row per attribute");
    for (const auto& row : errors.rows) {
        require(row[1] == "AgentEval", "errors.csv framework label missing");
        (void)std::stod(row[2]);
        (void)std::stod(row[3]);
    }

    CsvTable pearson = read_csv(a.tmp / "an" / "pearson.csv");
    require(pearson.header == std::vector<std::string>{"metric", "mean_r", "ci_half_width"},
            "pearson.csv columns do not mirror the expected table");
    require(pearson.rows.size() == 5, "pearson.csv must list one row per metric");
    for (std::size_t i = 0; i < 5; ++i) {
        require(pearson.rows[i][0] == std::string(to_string(kAllDimensions[i])),
                "pearson.csv rows not in canonical dimension order");
    }
}

struct Criterion {
    int id;
    const char* name;
    std::function<void()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "formula oracle equivalence (rmse/mae/pearson, 100 fixtures, < 1 s)",
         criterion_formula_oracles},
        {2, "anova correctness (worked fixture + 50 randomized vs oracle)", criterion_anova},
        {3, "degenerate statistics (f=0/p=1, typed pearson error, rmse >= mae)",
         criterion_degenerate},
        {4, "fisher ci recipe (zero width, antisymmetry, scripted oracle)", criterion_fisher},
        {5, "regression recovery (planted weights, oracle match, shift invariance)",
         criterion_regression},
        {6, "rubric fidelity (byte-exact cells, total round-trip)", criterion_rubric},
        {7, "deterministic end-to-end (30 rows, < 5 s, byte-identical reruns)",
         criterion_deterministic_e2e},
        {8, "replay fidelity (byte-identical replay, named cassette miss)", criterion_replay},
        {9, "protocol shape (3 steps then plan/reflection/rating; bare baseline)",
         criterion_protocol_shape},
        {10, "vote properties (mode-correct, permutation-invariant, smallest-key ties)",
         criterion_votes},
        {11, "report shape (anova/errors/pearson column mirrors)", criterion_report_shape},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        try {
            criterion.run();
            std::printf("[PASS] %2d. %s\n", criterion.id, criterion.name);
        } catch (const Failure& f) {
            ++failures;
            std::printf("[FAIL] %2d. %s: %s\n", criterion.id, criterion.name,
                        f.reason.c_str());
        } catch (const std::exception& e) {
            ++failures;
            std::printf("[FAIL] %2d. %s: unexpected error: %s\n", criterion.id,
                        criterion.name, e.what());
        }
        std::fflush(stdout);
    }
    if (failures == 0) {
        std::printf("all %zu acceptance criteria passed\n", criteria.size());
        return 0;
    }
    std::printf("%d acceptance criteria failed\n", failures);
    return 1;
}
