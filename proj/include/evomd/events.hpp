#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "evomd/formula.hpp"
#include "evomd/frames.hpp"
#include "evomd/species_graph.hpp"

namespace evomd {

// One maximal run of a species within a lineage. duration_ps = run length in
// frames x frame interval.
struct MolecularEvent {
    std::string trajectory_id;
    std::int64_t lineage_id = 0;
    CanonicalFormula formula;
    std::int64_t start_ps = 0;
    std::int64_t duration_ps = 0;

    bool operator==(const MolecularEvent&) const = default;
};

// Inclusive duration band: an event survives iff tau_min_ps <= duration_ps <= tau_max_ps.
struct FilterBand {
    std::int64_t tau_min_ps = 10;
    std::int64_t tau_max_ps = 500;
};

void validate_band(const FilterBand& band);

// Collapses maximal runs of identical formulas into events. `samples` must be
// chronological with a constant gap equal to interval_ps. Empty input -> empty output.
std::vector<MolecularEvent> rle_encode(const std::string& trajectory_id, std::int64_t lineage_id,
                                       const std::vector<std::pair<std::int64_t, CanonicalFormula>>& samples,
                                       std::int64_t interval_ps);

// Inverse of rle_encode: expands events back to the per-frame (time, formula)
// list. Events must be chronological and contiguous.
std::vector<std::pair<std::int64_t, CanonicalFormula>> rle_decode(const std::vector<MolecularEvent>& events,
                                                                  std::int64_t interval_ps);

// Keeps exactly the events inside the band; relative order preserved;
// survivors adjacent across a gap are never merged.
std::vector<MolecularEvent> bandpass_filter(const std::vector<MolecularEvent>& events, const FilterBand& band);

// One lineage's chronological events. Post-filter sequences may carry temporal
// gaps where filtered events were removed.
struct EventSequence {
    std::string trajectory_id;
    std::int64_t lineage_id = 0;
    std::vector<MolecularEvent> events;
};

// Groups events by (trajectory_id, lineage_id), chronological within each
// group. Groups are ordered by trajectory first appearance, then lineage id.
std::vector<EventSequence> group_sequences(const std::vector<MolecularEvent>& events);

// Cross-frame identity assignment. Components are matched to live lineages by
// maximum atom-index-set overlap; ties go to the pair with the smaller
// component minimum atom index, then the smaller lineage minimum atom index.
// Zero-overlap components start fresh lineages; unmatched lineages terminate.
class LineageTracker {
public:
    LineageTracker();
    ~LineageTracker();
    LineageTracker(LineageTracker&&) noexcept;

    // Lineage ids parallel to `components`. New ids are allocated in component order.
    std::vector<std::int64_t> advance(const std::vector<Component>& components);

    std::int64_t lineages_created() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Streaming frames -> events for one trajectory: tracks lineages and run-length
// encodes each lineage's formula stream incrementally, so memory stays
// proportional to the number of live lineages, not the frame count.
class TrajectoryEventExtractor {
public:
    explicit TrajectoryEventExtractor(std::string trajectory_id);
    ~TrajectoryEventExtractor();
    TrajectoryEventExtractor(TrajectoryEventExtractor&&) noexcept;

    // Frames must arrive chronologically with a constant interval.
    void add_frame(const Frame& frame);

    // Flushes open runs. Events come back sorted by (start_ps, lineage_id).
    std::vector<MolecularEvent> finish();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Whole-file extraction: demultiplexes interleaved trajectories and runs one
// extractor per trajectory. Output is grouped by trajectory in order of first
// appearance, chronological within each.
std::vector<MolecularEvent> extract_events(const std::filesystem::path& frames_path, BondThreshold threshold);

// --- events.jsonl ---
// {"trajectory_id": str, "lineage_id": int, "formula": str, "start_ps": int, "duration_ps": int}

nlohmann::json event_to_json(const MolecularEvent& event);
MolecularEvent event_from_json(const nlohmann::json& j, const std::string& where);

void write_event(std::ostream& out, const MolecularEvent& event);
void write_events(const std::filesystem::path& path, const std::vector<MolecularEvent>& events);
std::vector<MolecularEvent> read_events(const std::filesystem::path& path);

// --- stage report ---

// Event counts surviving each pipeline stage, in order.
struct StageCounts {
    std::int64_t raw_events = 0;
    std::int64_t extracted_events = 0;
    std::int64_t filtered_events = 0;
    std::int64_t balanced_events = 0;
};

// Five-number summary of a species' durations (quartiles by linear
// interpolation between closest ranks).
struct DurationSummary {
    std::int64_t count = 0;
    std::int64_t min_ps = 0;
    double q1_ps = 0.0;
    double median_ps = 0.0;
    double q3_ps = 0.0;
    std::int64_t max_ps = 0;
};

struct StageReport {
    StageCounts counts;
    std::map<std::string, DurationSummary> per_species;  // keyed by rendered formula
};

DurationSummary summarize_durations(std::vector<std::int64_t> durations);

// `events` feeds the per-species duration summaries (use the filtered set).
StageReport make_stage_report(const StageCounts& counts, const std::vector<MolecularEvent>& events);

std::string stage_report_json(const StageReport& report);

}  // namespace evomd
