#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "evomd/dataset.hpp"
#include "evomd/events.hpp"

namespace evomd {

// Whole-pipeline configuration. Loaded from JSON; every field has the
// documented default except out_dir and the input source (exactly one of
// network / frames).
struct PipelineConfig {
    std::filesystem::path out_dir;

    // input: either a reaction network to simulate, or a pre-existing frames file
    std::optional<std::filesystem::path> network;
    std::optional<std::filesystem::path> frames;
    int trajectories = 20;
    std::int64_t events_per_trajectory = 2000;
    bool emit_frames = true;  // false: simulate writes events directly, skipping extraction

    double bo_min = 0.5;
    FilterBand band;          // tau_min/tau_max, default (10, 500)
    DurationBins bins;        // default edges {50, 150}
    std::int64_t cap = 150;
    HistoryRange history;     // default [3, 5]
    double test_fraction = 0.2;
    std::vector<std::string> tasks = {"forward_1", "forward_2", "backward", "potential_k"};

    std::optional<std::filesystem::path> qa;  // external Q&A pool (jsonl)
    double qa_ratio = 0.0;

    std::string baseline = "markov";
    int order = 1;
    double alpha = 0.1;
    double lambda = 1e-3;

    int k = 5;
    std::int64_t duration_tolerance_ps = 50;
    std::uint64_t seed = 0;
    int threads = 1;  // accepted cap; stages are deterministic either way
};

PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& config);
// Root-seed resolution: explicit config value, else the EVOMD_SEED
// environment variable, else 0.
PipelineConfig load_config(const std::filesystem::path& path);

void validate_config(const PipelineConfig& config);

// Runs simulate -> extract -> filter -> balance -> dataset -> mix -> fit ->
// predict -> eval. Outputs land under config.out_dir; each completed stage is
// recorded in manifest.json with a signature (config slice + input hashes)
// and output hashes, and is skipped on rerun while signature and outputs
// still match. A stage is marked invalid in the manifest while it runs, so
// an aborted run never leaves a stage that looks complete. Stage failures
// surface as StageError (CLI exit 3), bad inputs as ValidationError (exit 2).
nlohmann::json run_pipeline(const PipelineConfig& config);

}  // namespace evomd
