#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "evomd/dataset.hpp"
#include "evomd/formula.hpp"

namespace evomd {

// freq       - order-0 frequency model (always predicts the majority species)
// markov     - order-N count model over species tokens
// semimarkov - order-N count model over (species, duration-bin) tokens, the
//              duration-aware counterpart used for the scaffolding ablation
// regressor  - ridge regression on composition vectors, decoded to the
//              nearest vocabulary formula
enum class ModelKind { freq, markov, semimarkov, regressor };

std::string_view model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(std::string_view name);

struct BaselineHyperparams {
    int order = 1;          // context length for markov/semimarkov
    double alpha = 0.1;     // additive smoothing
    double lambda = 1e-3;   // ridge penalty
    DurationBins bins;      // semimarkov duration-bin labels
};

// Count/weight state for every model kind. Fitted by fit(), serialized as
// versioned JSON. Count models keep contexts at every order 1..order so
// prediction can back off; the terminal fallback is the unigram.
struct BaselineModel {
    ModelKind kind = ModelKind::markov;
    bool backward_direction = false;  // fitted on time-reversed sequences
    int order = 1;
    double alpha = 0.1;
    double lambda = 1e-3;
    DurationBins bins;
    int feature_slots = 5;  // regressor history slots (left-padded)

    std::vector<std::string> vocabulary;  // sorted species strings
    std::vector<std::string> universe;    // sorted element symbols

    std::map<std::string, std::map<std::string, std::int64_t>> counts;  // context -> next -> n
    std::map<std::string, std::int64_t> unigram;
    std::map<std::string, std::map<std::int64_t, std::int64_t>> duration_hist;  // species -> dur -> n

    // regressor: (feature_slots x |universe| + 1) rows (bias last) x |universe| cols
    std::vector<std::vector<double>> weights;
};

using HistoryPairs = std::vector<std::pair<CanonicalFormula, std::int64_t>>;
using Prediction = std::pair<std::string, std::int64_t>;  // (formula string, duration ps)

// Fits on the samples' (history + targets) token streams. backward samples
// train a time-reversed model; mixing backward with forward tasks is an
// error. Empty train set is an error.
BaselineModel fit(ModelKind kind, const std::vector<PredictionSample>& train,
                  const BaselineHyperparams& hp);

// Smoothed next-species distribution given a chronological history, in
// vocabulary order; sums to 1 within 1e-9. Backs off to the longest seen
// context, ultimately the unigram. Regressor models have no distribution.
std::vector<double> next_distribution(const BaselineModel& model, const HistoryPairs& history);

// Top-k candidates ranked by model probability (count models) or by
// composition distance (regressor); ties break toward the vocabulary order.
// Durations are the predicted species' median (rounded to integer ps).
std::vector<Prediction> predict_topk(const BaselineModel& model, const HistoryPairs& history, int k);

// Top-1 precursor prediction from a chronological future window; requires a
// backward-direction model.
Prediction predict_backward(const BaselineModel& model, const HistoryPairs& future_window);

// Greedy autoregressive n-step rollout: each prediction is appended to the
// context before the next step.
std::vector<Prediction> rollout_nstep(const BaselineModel& model, const HistoryPairs& history, int n);

std::int64_t median_duration(const BaselineModel& model, const std::string& species);

// One predictions.jsonl row for a dataset record: {"sample_id", "output"} for
// single-answer and rollout tasks, {"sample_id", "candidates"} (top-k) for
// potential_k. The model's direction must match the record's task.
nlohmann::json predict_record(const BaselineModel& model, const DatasetRecord& record, int k);

nlohmann::json model_to_json(const BaselineModel& model);
BaselineModel model_from_json(const nlohmann::json& j, const std::string& where);

void save_model(const std::filesystem::path& path, const BaselineModel& model);
BaselineModel load_model(const std::filesystem::path& path);

}  // namespace evomd
