#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "evomd/events.hpp"
#include "evomd/formula.hpp"
#include "evomd/task.hpp"

namespace evomd {

// Duration bins over [tau_min, tau_max]: bin k collects durations in
// [edges[k-1], edges[k]) with the last bin closed on the right by tau_max.
// Defaults give short [10,50), medium [50,150), long [150,500].
struct DurationBins {
    std::vector<std::int64_t> edges = {50, 150};

    int bin_count() const { return static_cast<int>(edges.size()) + 1; }
};

void validate_bins(const DurationBins& bins);

// Index of the bin containing duration d: the number of edges <= d.
int duration_bin(const DurationBins& bins, std::int64_t duration_ps);

// "short"/"medium"/"long" for the default three-bin layout, "bin<k>" otherwise.
std::string bin_label(const DurationBins& bins, int bin_index);

// (species, duration-bin) stratum key, e.g. "MoS2/short".
std::string stratum_key(const CanonicalFormula& formula, const DurationBins& bins, std::int64_t duration_ps);

// Per-stratum downsampling to at most `cap` events; strata under the cap pass
// through whole. Event order (hence temporal order within lineages) is
// preserved; selection is seeded per stratum so it is independent of which
// other strata exist.
std::vector<MolecularEvent> balance(const std::vector<MolecularEvent>& events, const DurationBins& bins,
                                    std::int64_t cap, std::uint64_t seed);

// Stratum histogram (key -> count), for reports and balance tests.
std::map<std::string, std::int64_t> stratum_counts(const std::vector<MolecularEvent>& events,
                                                   const DurationBins& bins);

// One forecasting sample. history and targets are consecutive events of a
// single lineage; for backward the target immediately precedes the history.
struct PredictionSample {
    Task task = Task::forward_1;
    std::string trajectory_id;
    std::int64_t lineage_id = 0;
    // Index (into the lineage's event list) of the first target event: the
    // window geometry anchor. Unique per (task, lineage), so it keys sample ids.
    std::int64_t anchor_index = 0;
    std::vector<std::pair<CanonicalFormula, std::int64_t>> history;  // length in [3,5]
    std::vector<std::pair<CanonicalFormula, std::int64_t>> targets;  // 1, or 2 for forward_2
    std::string split;  // "train" | "test", set by split_disjoint

    std::string sample_id() const;
};

struct HistoryRange {
    int min_len = 3;
    int max_len = 5;
};

struct WindowReport {
    std::int64_t samples = 0;
    std::int64_t short_sequences = 0;   // sequences that fit no window at all
    std::int64_t skipped_windows = 0;   // anchors whose drawn history length did not fit
};

// Sliding windows with stride 1 over each sequence. The history length is
// drawn uniformly from [range.min_len, range.max_len] per anchor (seeded); an
// anchor whose draw does not fit inside the sequence is skipped and counted.
// With min_len == max_len == h, the sample count is exactly
// sum_i max(0, n_i - h - t + 1) over sequences (t = target count).
std::vector<PredictionSample> build_windows(const std::vector<EventSequence>& sequences, Task task,
                                            HistoryRange range, std::uint64_t seed, WindowReport* report);

// Trajectory-disjoint split: round(test_fraction x #trajectories) whole
// trajectories go to the test side (clamped so both sides stay nonempty).
// Returns (train, test) with each sample's split field set.
std::pair<std::vector<PredictionSample>, std::vector<PredictionSample>> split_disjoint(
    std::vector<PredictionSample> samples, double test_fraction, std::uint64_t seed);

// samples.jsonl rows: the intermediate between windowing and formatting, so
// split/format can run as separate commands.
nlohmann::json sample_to_json(const PredictionSample& sample);
PredictionSample sample_from_json(const nlohmann::json& j, const std::string& where);

void write_samples(const std::filesystem::path& path, const std::vector<PredictionSample>& samples);
std::vector<PredictionSample> read_samples(const std::filesystem::path& path);

// Instruction-formatted dataset row, serialized to dataset.jsonl.
struct DatasetRecord {
    std::string sample_id;
    std::string task;
    std::string split;
    std::string trajectory_id;
    std::string system;
    std::string instruction;
    std::string output;
    std::vector<std::pair<std::string, std::int64_t>> history;
    std::vector<std::pair<std::string, std::int64_t>> targets;
};

DatasetRecord format_record(const PredictionSample& sample);
std::vector<DatasetRecord> format_records(const std::vector<PredictionSample>& samples);

nlohmann::json record_to_json(const DatasetRecord& record);
DatasetRecord record_from_json(const nlohmann::json& j, const std::string& where);

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path);

// Mixes externally supplied Q&A rows into a forecast dataset at
// ratio = (#qa / #forecast). Forecast rows pass through byte-identical; QA
// rows must carry string "instruction" and "output" fields and are tagged
// task="qa" when untagged. Selection and the final interleave are seeded.
// An unattainable ratio raises an error reporting the maximum attainable.
std::vector<nlohmann::json> interleave_qa(const std::vector<nlohmann::json>& forecast,
                                          const std::vector<nlohmann::json>& qa_pool, double ratio,
                                          std::uint64_t seed);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

}  // namespace evomd
