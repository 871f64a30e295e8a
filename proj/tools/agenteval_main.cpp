#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agenteval/errors.hpp"
#include "agenteval/pipeline.hpp"

namespace {

using namespace agenteval;

void add_backend_flags(CLI::App* cmd, BackendOptions& backend) {
    cmd->add_option("--backend", backend.backend, "http | mock | record | replay")
        ->check(CLI::IsMember({"http", "mock", "record", "replay"}));
    cmd->add_option("--record-from", backend.record_source,
                    "inner backend when recording (http | mock)")
        ->check(CLI::IsMember({"http", "mock"}));
    cmd->add_option("--model", backend.model, "model id / generator label");
    cmd->add_option("--temperature", backend.temperature, "sampling temperature")
        ->check(CLI::Range(0.0, 2.0));
    cmd->add_option("--seed", backend.seed, "seed tag prefix recorded in the manifest");
    cmd->add_option("--cassette", backend.cassette, "cassette file to record to / replay from");
    cmd->add_option("--api-base", backend.api_base, "chat completion base URL");
    cmd->add_option("--api-key", backend.api_key, "API key (prefer AGENTEVAL_API_KEY)");
}

int dispatch(int argc, char** argv) {
    CLI::App app{"AgentEval: persona-conditioned agents rating articles on five "
                 "dimensions, with the alignment statistics to compare frameworks"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "generate an article corpus");
    GenerateOptions generate_options;
    std::string models_csv = "gpt4,ollama3.1";
    std::string generate_replay;
    add_backend_flags(generate, generate_options.backend);
    generate->add_option("--fewshot", generate_options.fewshot_dir,
                         "directory of few-shot exemplars (first line title)");
    generate->add_option("--models", models_csv, "comma-separated generator labels");
    generate->add_option("--n", generate_options.n_articles, "total number of articles");
    generate->add_option("--out", generate_options.out_dir, "output directory")->required();
    generate->add_option("--templates", generate_options.templates_dir,
                         "prompt template directory (defaults to built-ins)");
    generate->add_option("--replay", generate_replay, "re-run from a manifest and verify digests");

    // elicit
    auto* elicit = app.add_subcommand("elicit", "elicit criteria and unify a rubric");
    ElicitOptions elicit_options;
    std::string elicit_replay;
    add_backend_flags(elicit, elicit_options.backend);
    elicit->add_option("--participants", elicit_options.participants, "participants CSV");
    elicit->add_option("--rubric", elicit_options.rubric,
                       "skip elicitation and copy this rubric verbatim");
    elicit->add_option("--out", elicit_options.out_dir, "output directory")->required();
    elicit->add_option("--templates", elicit_options.templates_dir, "prompt template directory");
    elicit->add_option("--jobs", elicit_options.jobs, "parallel agents");
    elicit->add_option("--replay", elicit_replay, "re-run from a manifest and verify digests");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "agents rate every article");
    EvaluateOptions evaluate_options;
    std::string evaluate_replay;
    add_backend_flags(evaluate, evaluate_options.backend);
    evaluate->add_option("--participants", evaluate_options.participants, "participants CSV");
    evaluate->add_option("--articles", evaluate_options.articles, "articles JSON-lines");
    evaluate->add_option("--rubric", evaluate_options.rubric, "rubric JSON");
    evaluate->add_flag("--baseline", evaluate_options.baseline,
                       "also emit 1-to-5 single-prompt baseline rows");
    evaluate->add_flag("--inline-elicit", evaluate_options.inline_elicit,
                       "elicit criteria with these same agents first (memory carried over)");
    evaluate->add_option("--out", evaluate_options.out_dir, "output directory")->required();
    evaluate->add_option("--templates", evaluate_options.templates_dir,
                         "prompt template directory");
    evaluate->add_option("--jobs", evaluate_options.jobs, "parallel agents");
    evaluate->add_option("--max-failures", evaluate_options.max_failure_fraction,
                         "failure fraction above which the exit code is nonzero");
    evaluate->add_option("--replay", evaluate_replay, "re-run from a manifest and verify digests");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "alignment statistics and report CSVs");
    AnalyzeOptions analyze_options;
    std::filesystem::path baseline_path;
    std::vector<std::string> candidate_specs;
    analyze->add_option("--human", analyze_options.human_ratings, "human ratings CSV")
        ->required();
    analyze->add_option("--agent", analyze_options.agent_ratings, "agent ratings CSV")
        ->required();
    analyze->add_option("--baseline", baseline_path, "1-to-5 baseline ratings CSV");
    analyze->add_option("--candidate", candidate_specs,
                        "extra framework as label=ratings.csv (repeatable)");
    analyze->add_option("--articles", analyze_options.articles,
                        "articles JSON-lines (enables per-generator averages)");
    analyze->add_option("--participants", analyze_options.participants,
                        "participants CSV (enables feature-importance weights)");
    analyze->add_option("--out", analyze_options.out_dir, "output directory")->required();

    // report
    auto* report = app.add_subcommand("report", "markdown + SVG from an analyze directory");
    ReportOptions report_options;
    report->add_option("--in", report_options.analyze_dir, "analyze output directory")
        ->required();
    report->add_option("--out", report_options.out_dir, "report output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2; // bad flags are configuration errors
    }

    try {
        if (generate->parsed()) {
            if (!generate_replay.empty()) {
                run_replay_manifest(generate_replay, generate_options.out_dir);
                std::printf("replay verified against %s\n", generate_replay.c_str());
                return 0;
            }
            if (generate_options.fewshot_dir.empty()) {
                throw Error(ErrorKind::config, "--fewshot is required");
            }
            for (std::size_t pos = 0; pos <= models_csv.size();) {
                auto comma = models_csv.find(',', pos);
                if (comma == std::string::npos) comma = models_csv.size();
                if (comma > pos) {
                    generate_options.models.push_back(models_csv.substr(pos, comma - pos));
                }
                pos = comma + 1;
            }
            auto result = run_generate(generate_options);
            std::printf("wrote %d articles to %s\n", result.generated,
                        result.articles_path.string().c_str());
        } else if (elicit->parsed()) {
            if (!elicit_replay.empty()) {
                run_replay_manifest(elicit_replay, elicit_options.out_dir);
                std::printf("replay verified against %s\n", elicit_replay.c_str());
                return 0;
            }
            if (elicit_options.participants.empty() && !elicit_options.rubric) {
                throw Error(ErrorKind::config, "--participants is required unless --rubric is given");
            }
            auto result = run_elicit(elicit_options);
            std::printf("wrote rubric to %s (%d votes)\n",
                        result.rubric_path.string().c_str(), result.vote_count);
        } else if (evaluate->parsed()) {
            if (!evaluate_replay.empty()) {
                run_replay_manifest(evaluate_replay, evaluate_options.out_dir);
                std::printf("replay verified against %s\n", evaluate_replay.c_str());
                return 0;
            }
            if (evaluate_options.participants.empty() || evaluate_options.articles.empty()) {
                throw Error(ErrorKind::config, "--participants and --articles are required");
            }
            if (evaluate_options.rubric.empty() && !evaluate_options.inline_elicit) {
                throw Error(ErrorKind::config, "--rubric is required unless --inline-elicit");
            }
            auto result = run_evaluate(evaluate_options);
            std::printf("wrote %d rating rows to %s (%d failures)\n", result.rating_rows,
                        result.ratings_path.string().c_str(), result.failure_rows);
        } else if (analyze->parsed()) {
            if (!baseline_path.empty()) {
                analyze_options.candidates.emplace_back("1-to-5", baseline_path);
            }
            for (const auto& spec : candidate_specs) {
                auto eq = spec.find('=');
                if (eq == std::string::npos) {
                    throw Error(ErrorKind::config,
                                "--candidate expects label=path, got '" + spec + "'");
                }
                analyze_options.candidates.emplace_back(spec.substr(0, eq),
                                                        spec.substr(eq + 1));
            }
            auto result = run_analyze(analyze_options);
            std::printf("wrote %zu report files to %s\n", result.written.size(),
                        analyze_options.out_dir.string().c_str());
        } else if (report->parsed()) {
            auto result = run_report(report_options);
            std::printf("wrote %zu report files to %s\n", result.written.size(),
                        report_options.out_dir.string().c_str());
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) { return dispatch(argc, argv); }
