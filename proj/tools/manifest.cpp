#include "manifest.hpp"

#include <array>
#include <ctime>
#include <stdexcept>

#include <json.hpp>
#include <openssl/evp.h>

#include "ust/errors.hpp"

namespace ust::cli {

using json = nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw RuntimeFailure("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string RunManifest::to_json() const {
    json doc;
    doc["command"] = command;
    doc["argv"] = argv;
    doc["flags"] = flags;
    doc["seeds"] = seeds;
    doc["inputs"] = json::array();
    for (const auto& in : inputs) doc["inputs"].push_back({{"path", in.path}, {"bytes", in.bytes}, {"sha256", in.sha256}});
    doc["outputs"] = outputs;
    doc["tool_version"] = version;
    doc["timestamp"] = timestamp;
    return doc.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
    RunManifest m;
    try {
        const auto doc = json::parse(text);
        m.command = doc.at("command").get<std::string>();
        m.argv = doc.at("argv").get<std::vector<std::string>>();
        if (doc.contains("flags")) m.flags = doc["flags"].get<std::map<std::string, std::string>>();
        if (doc.contains("seeds")) m.seeds = doc["seeds"].get<std::map<std::string, std::uint64_t>>();
        if (doc.contains("inputs")) {
            for (const auto& in : doc["inputs"]) {
                m.inputs.push_back({in.at("path").get<std::string>(), in.at("bytes").get<std::size_t>(),
                                    in.at("sha256").get<std::string>()});
            }
        }
        if (doc.contains("outputs")) m.outputs = doc["outputs"].get<std::vector<std::string>>();
        m.version = doc.value("tool_version", "");
        m.timestamp = doc.value("timestamp", "");
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

}  // namespace ust::cli
