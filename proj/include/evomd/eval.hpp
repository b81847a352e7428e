#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evomd/dataset.hpp"
#include "evomd/formula.hpp"
#include "evomd/task.hpp"

namespace evomd {

// Why a prediction string failed to parse:
//   no_tuple     - no "(...)" tuple present (or the tuple is structurally broken)
//   bad_formula  - formula part is not a strict canonical formula
//   bad_duration - duration part is not a positive integer
//   extra_text   - a tuple is present but surrounded by other text
enum class ParseFailureKind { no_tuple, bad_formula, bad_duration, extra_text };

std::string_view parse_failure_name(ParseFailureKind kind);

// Total on arbitrary bytes: failures are data, not exceptions.
struct ParsedPrediction {
    bool ok = false;
    CanonicalFormula formula;
    std::int64_t duration_ps = 0;
    ParseFailureKind failure = ParseFailureKind::no_tuple;
};

// Accepts `(<formula>, <positive integer>)` with optional whitespace around
// and inside the parens. Strict canonical formula mode.
ParsedPrediction parse_prediction(std::string_view raw);

// Multi-target outputs: `(A, 1); (B, 2)`. ok only when every part parses and
// the count matches expected_count.
struct ParsedPredictionList {
    bool ok = false;
    std::vector<std::pair<CanonicalFormula, std::int64_t>> tuples;
    ParseFailureKind failure = ParseFailureKind::no_tuple;
};

ParsedPredictionList parse_prediction_list(std::string_view raw, int expected_count);

enum class MismatchClass { under_sulfidation, over_sulfidation, oxygen_deviation, other };

std::string_view mismatch_class_name(MismatchClass cls);

// Kinetic mismatch taxonomy over a wrong-but-valid prediction:
// fewer S atoms than truth -> under; more -> over; equal S but different O ->
// oxygen deviation; anything else -> other. pred == truth is an error.
MismatchClass classify_mismatch(const CanonicalFormula& pred, const CanonicalFormula& truth);

// One predictions.jsonl row: either a single output string or a ranked
// candidate list (potential_k).
struct PredictionEntry {
    std::string sample_id;
    std::optional<std::string> output;
    std::vector<std::string> candidates;
};

PredictionEntry prediction_entry_from_json(const nlohmann::json& j, const std::string& where);
std::vector<PredictionEntry> read_predictions(const std::filesystem::path& path);

struct TaskScore {
    std::string task;
    std::int64_t total = 0;
    std::int64_t hits = 0;           // species-level correct (all targets for forward_2)
    std::int64_t wrong_valid = 0;    // parsed but species mismatch
    std::int64_t parse_failures = 0; // includes missing entries
    double accuracy_pct = 0.0;
    double missing_rate_pct = 0.0;

    // duration quality over species-correct targets only
    std::int64_t duration_scored = 0;
    double duration_mae_ps = 0.0;
    double duration_within_tol_pct = 0.0;

    std::map<int, double> potential_k_hit_pct;   // potential_k: hit-rate at 1..k
    std::vector<double> per_step_accuracy_pct;   // multi-step tasks: steps 1..N
    double nstep_mean_accuracy_pct = 0.0;        // mean over steps (multi-step tasks)

    std::map<std::string, std::int64_t> taxonomy;       // mismatch class -> count
    std::map<std::string, std::int64_t> failure_kinds;  // parse-failure kind -> count
    // truth species -> (predicted species | "UNPARSEABLE") -> count; each
    // sample contributes its first-target pair, so row sums = test counts
    std::map<std::string, std::map<std::string, std::int64_t>> confusion;
};

struct EvalReport {
    std::vector<TaskScore> tasks;
    int k = 5;
    std::int64_t duration_tolerance_ps = 50;
};

// Scores one task's predictions against the test-split records of that task.
// Every test sample needs exactly one entry; missing entries score as parse
// failures, duplicates and unknown sample ids are errors.
TaskScore score_task(const std::vector<PredictionEntry>& entries, const std::vector<DatasetRecord>& truth,
                     Task task, int k, std::int64_t duration_tolerance_ps);

nlohmann::json score_to_json(const TaskScore& score);

// Writes report.json plus confusion.csv / nstep_decay.csv / error_taxonomy.csv
// into out_dir, and returns a human-readable summary (percentages at 2
// decimals).
std::string emit_report(const EvalReport& report, const std::filesystem::path& out_dir);

}  // namespace evomd
