#include "agenteval/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include <nlohmann/json.hpp>

#include "agenteval/digest.hpp"
#include "agenteval/errors.hpp"

namespace agenteval {

nlohmann::json RunManifest::config() const { return nlohmann::json::parse(config_json_); }

void RunManifest::set_config(const nlohmann::json& j) { config_json_ = j.dump(); }

void RunManifest::add_input(const std::filesystem::path& path) {
    inputs[path.string()] = sha256_file_hex(path);
}

void RunManifest::add_output(const std::filesystem::path& dir, const std::string& name) {
    outputs[name] = sha256_file_hex(dir / name);
}

void RunManifest::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["run_id"] = run_id;
    j["command"] = command;
    j["created_utc"] = created_utc;
    j["config"] = config();
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write manifest " + path.string());
    out << j.dump(2) << '\n';
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, "manifest " + path.string() + ": " + e.what());
    }
    RunManifest m;
    m.run_id = j.value("run_id", "");
    m.command = j.value("command", "");
    m.created_utc = j.value("created_utc", "");
    m.set_config(j.value("config", nlohmann::json::object()));
    if (j.contains("inputs")) {
        m.inputs = j["inputs"].get<std::map<std::string, std::string>>();
    }
    if (j.contains("outputs")) {
        m.outputs = j["outputs"].get<std::map<std::string, std::string>>();
    }
    return m;
}

std::string derive_run_id(const RunManifest& manifest) {
    std::string blob = manifest.command + "\n" + manifest.config().dump() + "\n";
    for (const auto& [path, digest] : manifest.inputs) blob += path + "=" + digest + "\n";
    return sha256_hex(blob).substr(0, 16);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace agenteval
