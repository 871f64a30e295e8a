#include "agenteval/digest.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "agenteval/errors.hpp"

namespace agenteval {

std::string sha256_hex(std::string_view data) {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int out_len = 0;
    if (EVP_Digest(data.data(), data.size(), out, &out_len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::io, "sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string result(out_len * 2, '0');
    for (unsigned int i = 0; i < out_len; ++i) {
        result[2 * i] = hex[out[i] >> 4];
        result[2 * i + 1] = hex[out[i] & 0xf];
    }
    return result;
}

std::string sha256_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return sha256_hex(buf.str());
}

std::uint32_t digest_prefix_u32(std::string_view hex_digest) {
    std::uint32_t value = 0;
    for (std::size_t i = 0; i < 8 && i < hex_digest.size(); ++i) {
        char c = hex_digest[i];
        std::uint32_t nibble;
        if (c >= '0' && c <= '9') nibble = static_cast<std::uint32_t>(c - '0');
        else if (c >= 'a' && c <= 'f') nibble = static_cast<std::uint32_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') nibble = static_cast<std::uint32_t>(c - 'A' + 10);
        else throw Error(ErrorKind::parse, "not a hex digest: " + std::string(hex_digest));
        value = (value << 4) | nibble;
    }
    return value;
}

} // namespace agenteval
