#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "farmstate/conditional_risk.hpp"
#include "farmstate/covariance.hpp"
#include "farmstate/spectral.hpp"
#include "farmstate/synthetic.hpp"

namespace farmstate {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Fully resolved pipeline configuration. Exactly one of the two input
// sources is active. Runtime knobs (threads, cache) never enter the config
// hash, so results and manifests are identical across thread counts.
struct PipelineConfig {
    bool use_synthetic = false;

    // [input]
    std::string velocity_csv;
    std::string power_csv;
    bool allow_gaps = false;

    // [synthetic]
    FarmScenario scenario;

    // [analysis]
    std::vector<int> lags{0, 1, 2, 3, 4, 5, 6};
    std::vector<int> q_values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<int> tau_values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int tau_cap = 144;  // horizon searches beyond this are data-starved
    BinningConfig binning;
    double floor_epsilon_rel = 1e-6;
    double sample_interval_s = 600.0;
    bool measure_toeplitz = true;
    double toeplitz_warn_rel = 1e-6;

    // [output]
    std::string out_dir = "out";
    bool cache = true;

    // runtime only
    int threads = 1;

    // Deterministic key = value listing of every hashed setting.
    std::string canonical_echo() const;
};

// Parses and validates a config file. All violations are collected and
// reported together in one ConfigError.
PipelineConfig validate_config(const std::string& path);

struct RunResult {
    std::string manifest_hash;
    std::vector<std::string> outputs;  // file names relative to out_dir
    bool covariance_cached = false;
    bool spectral_cached = false;
};

// Full pipeline: ingest/generate, covariance, spectral, states, densities,
// risk-return table, policy, manifest. Artifacts are committed atomically at
// the end; nothing is left behind on failure.
RunResult run_analyze(const PipelineConfig& cfg);

// Through the spectral stage only (structure report, spectrum, mode
// profiles, manifest).
RunResult run_spectrum(const PipelineConfig& cfg);

// Writes velocity.csv / power.csv for the configured synthetic scenario.
RunResult run_generate(const PipelineConfig& cfg);

struct VerifyResult {
    StructureReport report;
    bool hermitian_ok = false;
    bool presym_ok = false;
    bool spectral_gates_ok = false;
    bool toeplitz_ok = false;  // consistency within the warn threshold
    std::vector<std::string> messages;
    bool all_ok() const {
        return hermitian_ok && presym_ok && spectral_gates_ok && toeplitz_ok;
    }
};

// Structure and invariant checks only; writes no artifacts.
VerifyResult run_verify(const PipelineConfig& cfg);

// Recomputes the optimal policy from a previously exported table CSV.
RunResult run_policy(const PipelineConfig& cfg, const std::string& table_csv);

// FNV-1a 64-bit hex digest; the hash used for config, inputs and manifests.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace farmstate
