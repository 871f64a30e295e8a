#include "agenteval/templates.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "agenteval/digest.hpp"
#include "agenteval/errors.hpp"

namespace agenteval {

namespace {

// The shipped default wording, duplicated under data/templates/*.txt for
// overriding without code changes. A unit test keeps the two in sync.

const char* kTaskIntro =
    "You are {name}, a {age}-year-old {job} with {experience} years of professional "
    "experience. Your three personality traits are {traits}.{routine} You are taking "
    "part in a content evaluation task: you will read AI-generated articles and rate "
    "them on coherence, relevance, interestingness, fairness, and clarity, assigning "
    "scores of 1 to 5.";

const char* kElicitCriterion =
    "How would you quantify a {score}-star article in terms of {dimension}? Give one "
    "concise, measurable criterion, using concrete thresholds such as counts or "
    "percentage ranges, that a {score}-star article must meet.";

const char* kEvalStep1 =
    "1. Utilize the knowledge and expertise in your job, and read these articles "
    "carefully. You will be asked to evaluate them with the criteria provided in the "
    "next step.\n\nTitle: {title}\n\n{body}";

const char* kEvalStep2 =
    "2. Evaluate the {dimension} of that article with the following criteria: "
    "{criteria}";

const char* kEvalStep3 =
    "3. Assign a {dimension} score on a scale of 1 to 5, where 1 is the lowest and 5 "
    "is the highest, based on the evaluation criteria.";

const char* kBaseline1to5 =
    "Assign a {dimension} score on a scale of 1 to 5 for the following article, where "
    "1 is the lowest and 5 is the highest.\n\nTitle: {title}\n\n{body}";

const char* kGenerateArticle =
    "Here are examples of professionally written editorial articles:\n\n{examples}\n\n"
    "Write a new 6-sentence story with an engaging title that mimics professionally "
    "written editorial content. Put the title on the first line and the story on the "
    "following lines.";

const char* builtin_text(const std::string& name) {
    if (name == "task_intro") return kTaskIntro;
    if (name == "elicit_criterion") return kElicitCriterion;
    if (name == "eval_step1") return kEvalStep1;
    if (name == "eval_step2") return kEvalStep2;
    if (name == "eval_step3") return kEvalStep3;
    if (name == "baseline_1to5") return kBaseline1to5;
    if (name == "generate_article") return kGenerateArticle;
    throw Error(ErrorKind::config, "unknown template: " + name);
}

} // namespace

PromptTemplate PromptTemplate::parse(std::string name, std::string text) {
    PromptTemplate t;
    t.name = std::move(name);
    t.text = std::move(text);
    for (std::size_t i = 0; i < t.text.size(); ++i) {
        if (t.text[i] != '{') continue;
        auto close = t.text.find('}', i);
        if (close == std::string::npos) {
            throw Error(ErrorKind::parse, "template " + t.name + ": unclosed '{'");
        }
        std::string slot = t.text.substr(i + 1, close - i - 1);
        if (slot.empty() ||
            slot.find_first_not_of("abcdefghijklmnopqrstuvwxyz"
                                   "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_") !=
                std::string::npos) {
            throw Error(ErrorKind::parse, "template " + t.name + ": bad slot '{" + slot + "}'");
        }
        if (std::find(t.slots.begin(), t.slots.end(), slot) == t.slots.end()) {
            t.slots.push_back(slot);
        }
        i = close;
    }
    return t;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    for (const auto& slot : slots) {
        if (!values.count(slot)) {
            throw Error(ErrorKind::precondition,
                        "template " + name + ": missing value for slot '" + slot + "'");
        }
    }
    for (const auto& [key, _] : values) {
        if (std::find(slots.begin(), slots.end(), key) == slots.end()) {
            throw Error(ErrorKind::precondition,
                        "template " + name + ": no slot named '" + key + "'");
        }
    }
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') {
            out += text[i];
            continue;
        }
        auto close = text.find('}', i);
        out += values.at(text.substr(i + 1, close - i - 1));
        i = close;
    }
    return out;
}

TemplateSet TemplateSet::builtin() {
    TemplateSet set;
    for (const char* name : kTemplateNames) {
        set.templates_.emplace(name, PromptTemplate::parse(name, builtin_text(name)));
    }
    return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    TemplateSet set;
    for (const char* name : kTemplateNames) {
        auto path = dir / (std::string(name) + ".txt");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorKind::config, "missing template file " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        std::string text = buf.str();
        if (!text.empty() && text.back() == '\n') text.pop_back(); // file convention
        set.templates_.emplace(name, PromptTemplate::parse(name, std::move(text)));
    }
    return set;
}

const PromptTemplate& TemplateSet::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw Error(ErrorKind::config, "unknown template: " + name);
    return it->second;
}

std::map<std::string, std::string> TemplateSet::digests() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, t] : templates_) out[name] = sha256_hex(t.text);
    return out;
}

} // namespace agenteval
