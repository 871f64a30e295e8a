#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "agenteval/backend.hpp"
#include "agenteval/domain.hpp"
#include "agenteval/manifest.hpp"
#include "agenteval/templates.hpp"

namespace agenteval {

// Shared backend/model/template configuration resolved from flags and the
// AGENTEVAL_API_KEY / AGENTEVAL_API_BASE / AGENTEVAL_MODEL environment.
struct BackendOptions {
    std::string backend = "mock"; // http | mock | record | replay
    std::string record_source = "http"; // inner backend when recording
    std::string model;
    double temperature = 0.8;
    std::string seed = "0";
    std::optional<std::filesystem::path> cassette;
    std::optional<std::string> api_base;
    std::optional<std::string> api_key;
};

std::shared_ptr<Backend> make_backend(const BackendOptions& options,
                                      const std::filesystem::path& out_dir);

struct GenerateOptions {
    BackendOptions backend;
    std::filesystem::path fewshot_dir;
    std::vector<std::string> models; // generator labels; articles split evenly
    int n_articles = 30;
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> templates_dir;
};

struct GenerateResult {
    std::filesystem::path articles_path;
    int generated = 0;
    RunManifest manifest;
};

GenerateResult run_generate(const GenerateOptions& options);

struct ElicitOptions {
    BackendOptions backend;
    std::filesystem::path participants;
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> templates_dir;
    // When set, elicitation is skipped and this rubric is copied verbatim.
    std::optional<std::filesystem::path> rubric;
    int jobs = 1;
};

struct ElicitResult {
    std::filesystem::path rubric_path;
    std::filesystem::path votes_path; // empty when --rubric skipped elicitation
    int vote_count = 0;
    RunManifest manifest;
};

ElicitResult run_elicit(const ElicitOptions& options);

struct EvaluateOptions {
    BackendOptions backend;
    std::filesystem::path participants;
    std::filesystem::path articles;
    std::filesystem::path rubric;
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> templates_dir;
    bool baseline = false;       // additionally emit 1-to-5 baseline rows
    bool inline_elicit = false;  // elicit criteria with these same agents first
    int jobs = 1;
    double max_failure_fraction = 0.10;
};

struct EvaluateResult {
    std::filesystem::path ratings_path;
    std::filesystem::path failures_path; // written only when failures occurred
    int rating_rows = 0;
    int failure_rows = 0;
    RunManifest manifest;
};

EvaluateResult run_evaluate(const EvaluateOptions& options);

struct AnalyzeOptions {
    std::filesystem::path human_ratings;
    std::filesystem::path agent_ratings;
    // label -> ratings file; extra candidate frameworks for the error table.
    std::vector<std::pair<std::string, std::filesystem::path>> candidates;
    std::optional<std::filesystem::path> articles;     // enables averages_*.csv
    std::optional<std::filesystem::path> participants; // enables weights_*.csv
    std::filesystem::path out_dir;
};

struct AnalyzeResult {
    std::vector<std::filesystem::path> written;
    RunManifest manifest;
};

AnalyzeResult run_analyze(const AnalyzeOptions& options);

struct ReportOptions {
    std::filesystem::path analyze_dir;
    std::filesystem::path out_dir;
};

struct ReportResult {
    std::vector<std::filesystem::path> written;
};

ReportResult run_report(const ReportOptions& options);

// Re-runs a command from its manifest in replay mode and verifies that every
// comparable output digest matches; throws ErrorKind::analysis on mismatch.
void run_replay_manifest(const std::filesystem::path& manifest_path,
                         const std::filesystem::path& out_dir);

} // namespace agenteval
