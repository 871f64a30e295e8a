#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace agenteval {

enum class ErrorKind {
    config,        // missing files, bad flags, absent credentials
    validation,    // domain invariant violated by input data
    precondition,  // operation called out of order / with bad arguments
    parse,         // unparseable model output or malformed file
    backend,       // transport / HTTP status failure
    cassette_miss, // replay lookup failed
    stats,         // degenerate statistical input
    io,            // filesystem failure
    analysis,      // report-level assertion failure (digest mismatch, pairing)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

// Carries every violation found, not just the first.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error(ErrorKind::validation, join(violations)),
          violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out;
        for (const auto& s : v) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> violations_;
};

// CLI contract: 0 success, 1 analysis/assertion failure, 2 configuration
// error, 3 backend failure.
inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::backend:
        case ErrorKind::cassette_miss: return 3;
        default: return 1;
    }
}

} // namespace agenteval
