#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace agenteval {

// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(std::string_view data);

// SHA-256 of a file's contents, lowercase hex.
std::string sha256_file_hex(const std::filesystem::path& path);

// First 8 hex digits of a digest interpreted as an unsigned integer.
std::uint32_t digest_prefix_u32(std::string_view hex_digest);

} // namespace agenteval
