#pragma once

// Experiment configuration (strict JSON schema), the run manifest, and the
// subcommand entry points. The manifest's content hash covers the canonical
// config and the seed; execution-only parameters (threads, output directory)
// and timestamps stay outside the identity, so re-runs at any thread count
// reproduce results.csv bitwise.

#include <cstdint>
#include <string>

#include "json.hpp"

#include "mvsde/coeffs.hpp"
#include "mvsde/solver.hpp"
#include "mvsde/verify.hpp"

namespace mvsde {

struct ExperimentConfig {
    nlohmann::json raw;       // as parsed, with CLI overrides applied
    std::string model_name;
    nlohmann::json model_params;
    CoefficientSet model;
    SolverConfig solver;
    InitialLaw initial;
    MollifyOptions mollify;
    nlohmann::json experiment; // subcommand-specific block

    nlohmann::json canonical() const; // raw minus execution-only keys
};

ExperimentConfig parse_config_json(const nlohmann::json& j);
ExperimentConfig parse_config_file(const std::string& path);

struct RunManifest {
    nlohmann::json config;
    uint64_t seed = 0;
    std::string tool_version;
    std::string content_hash; // fnv1a-64 hex over canonical config + seed + version
    std::string created_utc;  // excluded from the hash
    std::string out_dir;

    nlohmann::json to_json() const;
};

RunManifest make_manifest(const ExperimentConfig& cfg, const std::string& out_dir);

uint64_t fnv1a64(const std::string& data);
std::string tool_version();

/// Executes one subcommand; writes manifest, artifacts and results.csv under
/// out_dir. Returns 0 (holds / simulation ok), 2 (verdict violated); errors
/// propagate as exceptions for the CLI to map onto exit 1.
int run_subcommand(const std::string& name, ExperimentConfig& cfg, const std::string& out_dir);

const std::vector<std::string>& subcommand_names();

} // namespace mvsde
