#pragma once

// Config-driven experiment runner. Every stage writes one CSV; a JSON
// manifest beside the CSVs records the config hash, timings, seeds and
// outputs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "varpost/config.hpp"

namespace varpost {

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr const char* kManifestName = "manifest.json";

// Sorted keys, no insignificant whitespace.
std::string canonical_json(const nlohmann::json& config);
// Hex SHA-256 of the canonical form.
std::string config_hash(const nlohmann::json& config);

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<Diagnostic> diagnostics);
    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

struct RunOptions {
    std::filesystem::path out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
};

struct StageTiming {
    std::string name;
    double seconds = 0.0;
};

struct RunManifest {
    std::string config_hash;
    std::string version = kArtifactVersion;
    std::string experiment;
    std::string status;
    std::vector<std::uint64_t> seeds;
    std::vector<StageTiming> stages;
    std::vector<std::string> outputs;
    std::vector<std::string> notes;

    nlohmann::json to_json() const;
};

// The config with the seed override applied and the output entry removed;
// this is what the manifest hash covers.
nlohmann::json effective_config(const nlohmann::json& config, const RunOptions& options);

std::vector<Diagnostic> validate(const nlohmann::json& config, ExperimentKind kind, const RunOptions& options = {});

// Throws ConfigError before any output is written when validation fails.
// On a runtime failure the CSVs written so far are removed, the manifest is
// finalized with status "failed", and the error is rethrown.
RunManifest run(const nlohmann::json& config, ExperimentKind kind, const RunOptions& options);

}  // namespace varpost
