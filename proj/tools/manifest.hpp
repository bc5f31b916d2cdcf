#ifndef UST_TOOLS_MANIFEST_HPP
#define UST_TOOLS_MANIFEST_HPP

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ust::cli {

inline constexpr const char* kToolVersion = "1.0.0";

std::string sha256_hex(std::string_view bytes);

struct InputDigest {
    std::string path;
    std::size_t bytes = 0;
    std::string sha256;
};

struct RunManifest {
    std::string command;
    std::vector<std::string> argv;  // arguments after the program name
    std::map<std::string, std::string> flags;
    std::map<std::string, std::uint64_t> seeds;
    std::vector<InputDigest> inputs;
    std::vector<std::string> outputs;
    std::string version = kToolVersion;
    std::string timestamp;

    std::string to_json() const;
    static RunManifest from_json(std::string_view text);
};

/// UTC, ISO 8601.
std::string utc_timestamp();

}  // namespace ust::cli

#endif  // UST_TOOLS_MANIFEST_HPP
