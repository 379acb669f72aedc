#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "kaleido/core/error.hpp"
#include "kaleido/core/io.hpp"

namespace kaleido::io {

namespace fs = std::filesystem;
using Json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestName = "manifest.json";

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("SHA-256 computation failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

inline std::string sha256_file(const fs::path& p) { return sha256_hex(read_text(p)); }

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Provenance record of one output directory. Artifact paths are relative to
/// the directory holding the manifest.
struct RunManifest {
    std::string command;
    std::string config_hash;
    Json config;
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::string created;
    std::vector<std::pair<std::string, std::string>> artifacts;  // (path, sha256)
    std::vector<std::pair<std::string, std::string>> inputs;     // (path, sha256)
    std::vector<std::string> warnings;

    Json to_json() const {
        Json a = Json::array();
        for (const auto& [p, h] : artifacts) a.push_back({{"path", p}, {"sha256", h}});
        Json in = Json::array();
        for (const auto& [p, h] : inputs) in.push_back({{"path", p}, {"sha256", h}});
        return Json{{"command", command}, {"config_hash", config_hash}, {"config", config},
                    {"seed", seed},       {"tool_version", tool_version}, {"created", created},
                    {"artifacts", a},     {"inputs", in},            {"warnings", warnings}};
    }

    static RunManifest from_json(const Json& j) {
        try {
            RunManifest m;
            m.command = j.at("command").get<std::string>();
            m.config_hash = j.at("config_hash").get<std::string>();
            m.config = j.at("config");
            m.seed = j.at("seed").get<std::uint64_t>();
            m.tool_version = j.at("tool_version").get<std::string>();
            m.created = j.at("created").get<std::string>();
            for (const auto& a : j.at("artifacts"))
                m.artifacts.emplace_back(a.at("path").get<std::string>(), a.at("sha256").get<std::string>());
            for (const auto& a : j.at("inputs"))
                m.inputs.emplace_back(a.at("path").get<std::string>(), a.at("sha256").get<std::string>());
            m.warnings = j.at("warnings").get<std::vector<std::string>>();
            return m;
        } catch (const Json::exception& e) {
            throw IoError(std::string("malformed manifest: ") + e.what());
        }
    }
};

/// Canonical config hash: SHA-256 of the compact JSON dump (keys sorted).
inline std::string config_hash(const Json& config) { return sha256_hex(config.dump()); }

inline void write_manifest(const fs::path& dir, RunManifest m) {
    m.config_hash = config_hash(m.config);
    if (m.created.empty()) m.created = utc_timestamp();
    for (auto& [p, h] : m.artifacts) h = sha256_file(dir / p);
    atomic_write_text(dir / kManifestName, m.to_json().dump(2) + "\n");
}

struct VerifyResult {
    bool ok = true;
    std::vector<std::string> problems;
};

/// Re-hashes the config and every artifact and checks that each file in the
/// directory is listed.
inline VerifyResult verify_manifest(const fs::path& dir) {
    const auto m = RunManifest::from_json(Json::parse(read_text(dir / kManifestName)));
    VerifyResult r;
    auto fail = [&](std::string s) {
        r.ok = false;
        r.problems.push_back(std::move(s));
    };
    if (config_hash(m.config) != m.config_hash) fail("config hash mismatch");
    std::vector<std::string> listed;
    for (const auto& [p, h] : m.artifacts) {
        listed.push_back(p);
        if (!fs::exists(dir / p)) {
            fail("missing artifact " + p);
            continue;
        }
        if (sha256_file(dir / p) != h) fail("hash mismatch for " + p);
    }
    // Subdirectories with their own manifest belong to that manifest.
    for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_directory() && fs::exists(it->path() / kManifestName)) {
            it.disable_recursion_pending();
            continue;
        }
        if (!it->is_regular_file()) continue;
        const auto rel = fs::relative(it->path(), dir).generic_string();
        if (rel == kManifestName) continue;
        if (std::find(listed.begin(), listed.end(), rel) == listed.end()) fail("unlisted file " + rel);
    }
    return r;
}

}  // namespace kaleido::io
