#include "agenteval/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "agenteval/agent.hpp"
#include "agenteval/csv.hpp"
#include "agenteval/digest.hpp"
#include "agenteval/errors.hpp"
#include "agenteval/protocol.hpp"

namespace agenteval {

namespace {

std::optional<std::string> env_var(const char* name) {
    const char* value = std::getenv(name);
    if (!value || !*value) return std::nullopt;
    return std::string(value);
}

std::string sanitize_filename(std::string_view name) {
    std::string out;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') out += c;
        else out += '_';
    }
    return out;
}

TemplateSet resolve_templates(const std::optional<std::filesystem::path>& dir) {
    return dir ? TemplateSet::load(*dir) : TemplateSet::builtin();
}

std::string resolve_model(const BackendOptions& options) {
    if (!options.model.empty()) return options.model;
    if (auto env = env_var("AGENTEVAL_MODEL")) return *env;
    if (options.backend == "http" ||
        (options.backend == "record" && options.record_source == "http")) {
        throw Error(ErrorKind::config, "http backend needs a model "
                                       "(--model or AGENTEVAL_MODEL)");
    }
    return "mock-model";
}

nlohmann::json backend_config_json(const BackendOptions& options,
                                   const std::filesystem::path& cassette,
                                   const TemplateSet& templates) {
    nlohmann::json j;
    j["backend"] = options.backend;
    if (options.backend == "record") j["record_source"] = options.record_source;
    j["model"] = resolve_model(options);
    j["temperature"] = options.temperature;
    j["seed"] = options.seed;
    if (!cassette.empty()) j["cassette"] = std::filesystem::absolute(cassette).string();
    j["templates"] = templates.digests();
    return j;
}

} // namespace

std::shared_ptr<Backend> make_backend(const BackendOptions& options,
                                      const std::filesystem::path& out_dir) {
    auto make_http = [&]() -> std::shared_ptr<Backend> {
        HttpConfig config;
        config.base_url = options.api_base.value_or(env_var("AGENTEVAL_API_BASE").value_or(""));
        config.api_key = options.api_key.value_or(env_var("AGENTEVAL_API_KEY").value_or(""));
        return std::make_shared<HttpBackend>(config);
    };

    if (options.backend == "mock") return std::make_shared<MockBackend>();
    if (options.backend == "http") return make_http();
    if (options.backend == "record") {
        std::filesystem::path cassette =
            options.cassette.value_or(out_dir / "cassette.jsonl");
        std::shared_ptr<Backend> inner;
        if (options.record_source == "mock") inner = std::make_shared<MockBackend>();
        else if (options.record_source == "http") inner = make_http();
        else throw Error(ErrorKind::config, "record source must be http or mock");
        return std::make_shared<RecordBackend>(inner,
                                               std::make_shared<CassetteWriter>(cassette));
    }
    if (options.backend == "replay") {
        if (!options.cassette) {
            throw Error(ErrorKind::config, "replay backend needs --cassette");
        }
        return std::make_shared<ReplayBackend>(*options.cassette);
    }
    throw Error(ErrorKind::config, "unknown backend '" + options.backend +
                                       "' (expected http, mock, record or replay)");
}

// --- generate -----------------------------------------------------------------

GenerateResult run_generate(const GenerateOptions& options) {
    if (options.n_articles < 1) {
        throw Error(ErrorKind::config, "--n must be >= 1");
    }
    if (options.models.empty()) {
        throw Error(ErrorKind::config, "at least one model label required");
    }
    std::filesystem::create_directories(options.out_dir);
    TemplateSet templates = resolve_templates(options.templates_dir);
    auto fewshot = load_fewshot_dir(options.fewshot_dir);
    auto backend = make_backend(options.backend, options.out_dir);

    RunManifest manifest;
    manifest.command = "generate";
    manifest.created_utc = utc_timestamp();
    nlohmann::json config = backend_config_json(
        options.backend, options.backend.cassette.value_or(
                             options.backend.backend == "record"
                                 ? options.out_dir / "cassette.jsonl"
                                 : std::filesystem::path()),
        templates);
    config["models"] = options.models;
    config["n_articles"] = options.n_articles;
    config["fewshot_dir"] = std::filesystem::absolute(options.fewshot_dir).string();
    manifest.set_config(config);
    for (const auto& entry : std::filesystem::directory_iterator(options.fewshot_dir)) {
        if (entry.is_regular_file()) manifest.add_input(entry.path());
    }

    std::vector<Article> corpus;
    const auto articles_path = options.out_dir / "articles.jsonl";
    try {
        // block split: n/k articles per model, earlier labels take the remainder
        const int k = static_cast<int>(options.models.size());
        int index = 0;
        for (int m = 0; m < k; ++m) {
            int count = options.n_articles / k + (m < options.n_articles % k ? 1 : 0);
            GenerationConfig gen;
            gen.model = options.models[static_cast<std::size_t>(m)];
            gen.temperature = options.backend.temperature;
            gen.n_articles = options.n_articles;
            gen.fewshot_dir = options.fewshot_dir;
            for (int i = 0; i < count; ++i, ++index) {
                corpus.push_back(generate_article(*backend, gen, fewshot, templates, index,
                                                  options.backend.seed));
            }
        }
    } catch (...) {
        // flush what we have with a failure marker in the name
        if (!corpus.empty()) {
            save_articles(options.out_dir / "articles.jsonl.partial", corpus);
        }
        throw;
    }
    save_articles(articles_path, corpus);

    manifest.add_output(options.out_dir, "articles.jsonl");
    manifest.run_id = derive_run_id(manifest);
    manifest.save(options.out_dir / "manifest.json");

    return {articles_path, static_cast<int>(corpus.size()), manifest};
}

// --- elicit -------------------------------------------------------------------

namespace {

void write_votes_csv(const std::filesystem::path& path,
                     const std::vector<VoteTally>& tallies) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& tally : tallies) {
        for (const auto& [key, votes] : tally.counts) {
            rows.push_back({std::string(to_string(tally.dimension)),
                            std::to_string(tally.score), key, std::to_string(votes),
                            key == tally.winner_key ? "1" : "0", tally.sample.at(key)});
        }
    }
    write_csv(path, {"dimension", "score", "canonical_key", "votes", "is_winner",
                     "sample_text"},
              rows);
}

} // namespace

ElicitResult run_elicit(const ElicitOptions& options) {
    std::filesystem::create_directories(options.out_dir);
    TemplateSet templates = resolve_templates(options.templates_dir);

    RunManifest manifest;
    manifest.command = "elicit";
    manifest.created_utc = utc_timestamp();

    const auto rubric_path = options.out_dir / "rubric.json";

    if (options.rubric) {
        // skip elicitation: copy the provided rubric verbatim
        Rubric::load(*options.rubric); // validate before copying
        std::filesystem::copy_file(*options.rubric, rubric_path,
                                   std::filesystem::copy_options::overwrite_existing);
        nlohmann::json config;
        config["rubric_source"] = std::filesystem::absolute(*options.rubric).string();
        manifest.set_config(config);
        manifest.add_input(*options.rubric);
        manifest.add_output(options.out_dir, "rubric.json");
        manifest.run_id = derive_run_id(manifest);
        manifest.save(options.out_dir / "manifest.json");
        return {rubric_path, {}, 0, manifest};
    }

    auto profiles = load_participants(options.participants);
    manifest.add_input(options.participants);
    auto backend = make_backend(options.backend, options.out_dir);
    nlohmann::json config = backend_config_json(
        options.backend, options.backend.cassette.value_or(
                             options.backend.backend == "record"
                                 ? options.out_dir / "cassette.jsonl"
                                 : std::filesystem::path()),
        templates);
    config["jobs"] = options.jobs;
    config["participants_path"] = std::filesystem::absolute(options.participants).string();
    manifest.set_config(config);

    const auto transcripts_dir = options.out_dir / "transcripts";
    std::filesystem::create_directories(transcripts_dir);

    std::vector<std::vector<ElicitedCriterion>> per_agent(profiles.size());
    std::vector<std::vector<TranscriptEntry>> transcripts(profiles.size());
    std::vector<std::string> failures(profiles.size());

    const int jobs = std::max(1, options.jobs);
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(profiles.size()); ++i) {
        try {
            AgentOptions agent_options;
            agent_options.model = resolve_model(options.backend);
            agent_options.temperature = options.backend.temperature;
            agent_options.seed = options.backend.seed;
            Agent agent(profiles[static_cast<std::size_t>(i)], backend, agent_options);
            init_agent(agent, templates);
            for (Dimension d : kAllDimensions) {
                for (int score = 5; score >= 1; --score) {
                    per_agent[static_cast<std::size_t>(i)].push_back(
                        elicit_criteria(agent, templates, d, score));
                }
            }
            transcripts[static_cast<std::size_t>(i)] = agent.transcript();
        } catch (const std::exception& e) {
            failures[static_cast<std::size_t>(i)] = e.what();
        }
    }
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        if (!failures[i].empty()) {
            throw Error(ErrorKind::backend,
                        "elicitation failed for " + profiles[i].name + ": " + failures[i]);
        }
    }

    std::vector<ElicitedCriterion> all;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        all.insert(all.end(), per_agent[i].begin(), per_agent[i].end());
        write_transcript(transcripts_dir / (sanitize_filename(profiles[i].name) + ".jsonl"),
                         transcripts[i]);
    }

    UnifiedCriteria unified = unify_criteria(all);
    unified.rubric.save(rubric_path);
    const auto votes_path = options.out_dir / "votes.csv";
    write_votes_csv(votes_path, unified.tallies);

    manifest.add_output(options.out_dir, "rubric.json");
    manifest.add_output(options.out_dir, "votes.csv");
    for (const auto& p : profiles) {
        manifest.add_output(options.out_dir,
                            "transcripts/" + sanitize_filename(p.name) + ".jsonl");
    }
    manifest.run_id = derive_run_id(manifest);
    manifest.save(options.out_dir / "manifest.json");

    return {rubric_path, votes_path, static_cast<int>(all.size()), manifest};
}

// --- evaluate -----------------------------------------------------------------

EvaluateResult run_evaluate(const EvaluateOptions& options) {
    std::filesystem::create_directories(options.out_dir);
    auto profiles = load_participants(options.participants);
    auto articles = load_articles(options.articles);
    if (articles.empty()) throw Error(ErrorKind::config, "articles file is empty");
    TemplateSet templates = resolve_templates(options.templates_dir);

    Rubric rubric;
    if (!options.inline_elicit) {
        rubric = Rubric::load(options.rubric);
    }

    auto backend = make_backend(options.backend, options.out_dir);

    RunManifest manifest;
    manifest.command = "evaluate";
    manifest.created_utc = utc_timestamp();
    manifest.add_input(options.participants);
    manifest.add_input(options.articles);
    nlohmann::json config = backend_config_json(
        options.backend, options.backend.cassette.value_or(
                             options.backend.backend == "record"
                                 ? options.out_dir / "cassette.jsonl"
                                 : std::filesystem::path()),
        templates);
    config["jobs"] = options.jobs;
    config["baseline"] = options.baseline;
    config["inline_elicit"] = options.inline_elicit;
    config["participants_path"] = std::filesystem::absolute(options.participants).string();
    config["articles_path"] = std::filesystem::absolute(options.articles).string();
    if (!options.inline_elicit) {
        config["rubric"] = std::filesystem::absolute(options.rubric).string();
        config["rubric_digest"] = sha256_file_hex(options.rubric);
        manifest.add_input(options.rubric);
    }
    manifest.set_config(config);

    const auto transcripts_dir = options.out_dir / "transcripts";
    std::filesystem::create_directories(transcripts_dir);

    struct FailureRow {
        std::string rater_id, article_id, dimension, error;
    };

    std::vector<std::vector<RatingRecord>> records(profiles.size());
    std::vector<std::vector<FailureRow>> failed(profiles.size());
    std::vector<std::vector<TranscriptEntry>> transcripts(profiles.size());
    std::vector<std::vector<ElicitedCriterion>> elicited(profiles.size());
    std::vector<std::string> fatal(profiles.size());

    AgentOptions agent_options;
    agent_options.model = resolve_model(options.backend);
    agent_options.temperature = options.backend.temperature;
    agent_options.seed = options.backend.seed;

    const int jobs = std::max(1, options.jobs);

    // Pass 1 (inline elicitation only): same agents articulate their criteria
    // first; the unified rubric feeds pass 2 with memory carried over.
    std::vector<std::optional<Agent>> agents(profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        agents[i].emplace(profiles[i], backend, agent_options);
    }

    if (options.inline_elicit) {
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(profiles.size()); ++i) {
            auto& agent = *agents[static_cast<std::size_t>(i)];
            try {
                init_agent(agent, templates);
                for (Dimension d : kAllDimensions) {
                    for (int score = 5; score >= 1; --score) {
                        elicited[static_cast<std::size_t>(i)].push_back(
                            elicit_criteria(agent, templates, d, score));
                    }
                }
            } catch (const std::exception& e) {
                fatal[static_cast<std::size_t>(i)] = e.what();
            }
        }
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            if (!fatal[i].empty()) {
                throw Error(ErrorKind::backend,
                            "elicitation failed for " + profiles[i].name + ": " + fatal[i]);
            }
        }
        std::vector<ElicitedCriterion> all;
        for (const auto& group : elicited) all.insert(all.end(), group.begin(), group.end());
        UnifiedCriteria unified = unify_criteria(all);
        rubric = unified.rubric;
        rubric.save(options.out_dir / "rubric.json");
    }

#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(profiles.size()); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        auto& agent = *agents[idx];
        try {
            if (!options.inline_elicit) init_agent(agent, templates);
            for (const auto& article : articles) {
                auto outcomes = evaluate_article(agent, article, rubric, templates);
                for (auto& outcome : outcomes) {
                    if (outcome.record) {
                        records[idx].push_back(*outcome.record);
                    } else {
                        failed[idx].push_back({agent.id(), article.id,
                                               std::string(to_string(outcome.dimension)),
                                               outcome.error});
                    }
                }
            }
            transcripts[idx] = agent.transcript();
        } catch (const std::exception& e) {
            fatal[idx] = e.what();
        }
    }
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        if (!fatal[i].empty()) {
            throw Error(ErrorKind::backend,
                        "evaluation failed for " + profiles[i].name + ": " + fatal[i]);
        }
    }

    std::vector<RatingRecord> all_records;
    std::vector<FailureRow> all_failures;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        all_records.insert(all_records.end(), records[i].begin(), records[i].end());
        all_failures.insert(all_failures.end(), failed[i].begin(), failed[i].end());
        write_transcript(transcripts_dir / (sanitize_filename(profiles[i].name) + ".jsonl"),
                         transcripts[i]);
    }

    const auto ratings_path = options.out_dir / "ratings.csv";
    save_ratings(ratings_path, all_records);

    // optional 1-to-5 baseline rows, one direct exchange each
    if (options.baseline) {
        std::vector<RatingRecord> baseline_rows;
        for (const auto& article : articles) {
            for (Dimension d : kAllDimensions) {
                auto result =
                    baseline_single_prompt(*backend, article, d, templates,
                                           agent_options.model, agent_options.temperature,
                                           options.backend.seed);
                RatingRecord record;
                record.rater_id = "baseline-1to5";
                record.rater_kind = RaterKind::agent;
                record.article_id = article.id;
                record.dimension = d;
                record.score = result.rating;
                record.transcript_ref = result.response.request_digest;
                baseline_rows.push_back(std::move(record));
            }
        }
        save_ratings(options.out_dir / "baseline.csv", baseline_rows);
    }

    std::filesystem::path failures_path;
    if (!all_failures.empty()) {
        failures_path = options.out_dir / "failures.csv";
        std::vector<std::vector<std::string>> rows;
        for (const auto& f : all_failures) {
            rows.push_back({f.rater_id, f.article_id, f.dimension, f.error});
        }
        write_csv(failures_path, {"rater_id", "article_id", "dimension", "error"}, rows);
    }

    manifest.add_output(options.out_dir, "ratings.csv");
    if (options.baseline) manifest.add_output(options.out_dir, "baseline.csv");
    if (options.inline_elicit) manifest.add_output(options.out_dir, "rubric.json");
    if (!all_failures.empty()) manifest.add_output(options.out_dir, "failures.csv");
    for (const auto& p : profiles) {
        manifest.add_output(options.out_dir,
                            "transcripts/" + sanitize_filename(p.name) + ".jsonl");
    }
    manifest.run_id = derive_run_id(manifest);
    manifest.save(options.out_dir / "manifest.json");

    const std::size_t attempted = all_records.size() + all_failures.size();
    EvaluateResult result{ratings_path, failures_path, static_cast<int>(all_records.size()),
                          static_cast<int>(all_failures.size()), manifest};
    if (attempted > 0 &&
        static_cast<double>(all_failures.size()) >
            options.max_failure_fraction * static_cast<double>(attempted)) {
        throw Error(ErrorKind::analysis,
                    std::to_string(all_failures.size()) + " of " + std::to_string(attempted) +
                        " rating rows failed (threshold " +
                        std::to_string(options.max_failure_fraction) + ")");
    }
    return result;
}

// --- replay from manifest -------------------------------------------------------

void run_replay_manifest(const std::filesystem::path& manifest_path,
                         const std::filesystem::path& out_dir) {
    RunManifest manifest = RunManifest::load(manifest_path);
    nlohmann::json config = manifest.config();

    if (!config.contains("cassette")) {
        throw Error(ErrorKind::config,
                    "manifest has no cassette; record the run before replaying");
    }

    BackendOptions backend;
    backend.backend = "replay";
    backend.cassette = std::filesystem::path(config["cassette"].get<std::string>());
    backend.model = config.value("model", "mock-model");
    backend.temperature = config.value("temperature", 0.8);
    backend.seed = config.value("seed", "0");

    RunManifest replayed;
    if (manifest.command == "evaluate") {
        EvaluateOptions options;
        options.backend = backend;
        options.participants = config.value("participants_path", "");
        options.articles = config.value("articles_path", "");
        options.rubric = config.value("rubric", "");
        options.baseline = config.value("baseline", false);
        options.inline_elicit = config.value("inline_elicit", false);
        options.out_dir = out_dir;
        replayed = run_evaluate(options).manifest;
    } else if (manifest.command == "elicit") {
        ElicitOptions options;
        options.backend = backend;
        options.participants = config.value("participants_path", "");
        options.out_dir = out_dir;
        replayed = run_elicit(options).manifest;
    } else if (manifest.command == "generate") {
        GenerateOptions options;
        options.backend = backend;
        options.fewshot_dir = config.value("fewshot_dir", "");
        options.models = config.value("models", std::vector<std::string>{});
        options.n_articles = config.value("n_articles", 0);
        options.out_dir = out_dir;
        replayed = run_generate(options).manifest;
    } else {
        throw Error(ErrorKind::config, "cannot replay command '" + manifest.command + "'");
    }

    std::vector<std::string> mismatches;
    for (const auto& [name, digest] : replayed.outputs) {
        auto it = manifest.outputs.find(name);
        if (it == manifest.outputs.end()) {
            mismatches.push_back(name + " (not in original manifest)");
        } else if (it->second != digest) {
            mismatches.push_back(name);
        }
    }
    if (!mismatches.empty()) {
        std::string joined;
        for (const auto& m : mismatches) joined += (joined.empty() ? "" : ", ") + m;
        throw Error(ErrorKind::analysis, "replay output digests diverged: " + joined);
    }
}

} // namespace agenteval
