#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace agenteval {

// Digest-stamped record of one command run: config snapshot, input digests,
// output digests. Re-running in replay mode with the same manifest must
// reproduce every output digest.
struct RunManifest {
    std::string run_id;
    std::string command;
    std::string created_utc;
    nlohmann::json config() const;
    void set_config(const nlohmann::json& j);

    std::map<std::string, std::string> inputs;  // path (as given) -> sha256
    std::map<std::string, std::string> outputs; // file name -> sha256

    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& dir, const std::string& name);

    void save(const std::filesystem::path& path) const;
    static RunManifest load(const std::filesystem::path& path);

private:
    std::string config_json_ = "{}";
};

// run_id = first 16 hex of sha256(command + config + input digests).
std::string derive_run_id(const RunManifest& manifest);

std::string utc_timestamp();

} // namespace agenteval
