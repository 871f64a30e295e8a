#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace agenteval {

// A prompt text with {slot} placeholders. Slots and placeholders always
// agree: parse() derives slots from the text, render() demands exactly them.
struct PromptTemplate {
    std::string name;
    std::vector<std::string> slots;
    std::string text;

    static PromptTemplate parse(std::string name, std::string text);

    std::string render(const std::map<std::string, std::string>& values) const;
};

inline constexpr const char* kTemplateNames[] = {
    "task_intro",     "elicit_criterion", "eval_step1", "eval_step2",
    "eval_step3",     "baseline_1to5",    "generate_article"};

class TemplateSet {
public:
    // Compiled-in defaults, identical to the files shipped under data/templates.
    static TemplateSet builtin();

    // Loads <dir>/<name>.txt for every template name.
    static TemplateSet load(const std::filesystem::path& dir);

    const PromptTemplate& get(const std::string& name) const;

    // name -> sha256 of template text, for run manifests.
    std::map<std::string, std::string> digests() const;

private:
    std::map<std::string, PromptTemplate> templates_;
};

} // namespace agenteval
