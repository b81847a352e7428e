#include "evomd/events.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "json.hpp"

#include "evomd/errors.hpp"
#include "evomd/jsonl.hpp"

namespace evomd {

using nlohmann::json;

void validate_band(const FilterBand& band) {
    if (band.tau_min_ps < 1)
        throw ValidationError("tau_min must be a positive integer, got " + std::to_string(band.tau_min_ps));
    if (band.tau_min_ps > band.tau_max_ps)
        throw ValidationError("tau_min " + std::to_string(band.tau_min_ps) + " exceeds tau_max " +
                              std::to_string(band.tau_max_ps));
}

std::vector<MolecularEvent> rle_encode(const std::string& trajectory_id, std::int64_t lineage_id,
                                       const std::vector<std::pair<std::int64_t, CanonicalFormula>>& samples,
                                       std::int64_t interval_ps) {
    if (interval_ps <= 0) throw ValidationError("rle_encode: interval must be positive");
    std::vector<MolecularEvent> out;
    if (samples.empty()) return out;
    for (std::size_t k = 1; k < samples.size(); ++k)
        if (samples[k].first - samples[k - 1].first != interval_ps)
            throw ValidationError("rle_encode: samples not on a constant " + std::to_string(interval_ps) +
                                  " ps grid at t=" + std::to_string(samples[k].first));

    std::int64_t run_start = samples[0].first;
    std::int64_t run_frames = 1;
    const CanonicalFormula* run_formula = &samples[0].second;
    auto flush = [&]() {
        out.push_back(MolecularEvent{trajectory_id, lineage_id, *run_formula, run_start,
                                     run_frames * interval_ps});
    };
    for (std::size_t k = 1; k < samples.size(); ++k) {
        if (samples[k].second == *run_formula) {
            ++run_frames;
        } else {
            flush();
            run_start = samples[k].first;
            run_frames = 1;
            run_formula = &samples[k].second;
        }
    }
    flush();
    return out;
}

std::vector<std::pair<std::int64_t, CanonicalFormula>> rle_decode(const std::vector<MolecularEvent>& events,
                                                                  std::int64_t interval_ps) {
    if (interval_ps <= 0) throw ValidationError("rle_decode: interval must be positive");
    std::vector<std::pair<std::int64_t, CanonicalFormula>> out;
    std::int64_t expected_start = 0;
    bool first = true;
    for (const auto& e : events) {
        if (e.duration_ps <= 0 || e.duration_ps % interval_ps != 0)
            throw ValidationError("rle_decode: duration " + std::to_string(e.duration_ps) +
                                  " ps is not a multiple of the " + std::to_string(interval_ps) + " ps interval");
        if (!first && e.start_ps != expected_start)
            throw ValidationError("rle_decode: events not contiguous at t=" + std::to_string(e.start_ps));
        first = false;
        const std::int64_t frames = e.duration_ps / interval_ps;
        for (std::int64_t f = 0; f < frames; ++f) out.emplace_back(e.start_ps + f * interval_ps, e.formula);
        expected_start = e.start_ps + e.duration_ps;
    }
    return out;
}

std::vector<MolecularEvent> bandpass_filter(const std::vector<MolecularEvent>& events, const FilterBand& band) {
    validate_band(band);
    std::vector<MolecularEvent> out;
    for (const auto& e : events)
        if (e.duration_ps >= band.tau_min_ps && e.duration_ps <= band.tau_max_ps) out.push_back(e);
    return out;
}

namespace {

// Intersection size of two ascending index vectors.
std::size_t overlap_size(const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t n = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j])
            ++i;
        else if (b[j] < a[i])
            ++j;
        else
            ++n, ++i, ++j;
    }
    return n;
}

// Greedy maximum-overlap matching between live lineage atom sets and the new
// frame's components. Returns, per component, the index into `lineage_atoms`
// (-1 = unmatched). Pairs are taken in order of (overlap desc, component min
// atom asc, lineage min atom asc); live lineages never share atoms, so the
// lineage minimum makes the order total.
std::vector<int> match_components(const std::vector<std::vector<int>>& lineage_atoms,
                                  const std::vector<Component>& components) {
    struct Pair {
        std::size_t overlap;
        int comp_min;
        int lineage_min;
        int comp;
        int lineage;
    };
    std::vector<Pair> pairs;
    for (int c = 0; c < static_cast<int>(components.size()); ++c)
        for (int l = 0; l < static_cast<int>(lineage_atoms.size()); ++l) {
            std::size_t ov = overlap_size(components[c].atom_indices, lineage_atoms[l]);
            if (ov > 0)
                pairs.push_back(Pair{ov, components[c].atom_indices.front(), lineage_atoms[l].front(), c, l});
        }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return std::tuple(-static_cast<std::int64_t>(a.overlap), a.comp_min, a.lineage_min) <
               std::tuple(-static_cast<std::int64_t>(b.overlap), b.comp_min, b.lineage_min);
    });

    std::vector<int> assignment(components.size(), -1);
    std::vector<bool> lineage_taken(lineage_atoms.size(), false);
    for (const auto& p : pairs) {
        if (assignment[p.comp] != -1 || lineage_taken[p.lineage]) continue;
        assignment[p.comp] = p.lineage;
        lineage_taken[p.lineage] = true;
    }
    return assignment;
}

}  // namespace

struct LineageTracker::Impl {
    std::vector<std::int64_t> ids;               // live lineage ids
    std::vector<std::vector<int>> atoms;         // parallel atom sets
    std::int64_t next_id = 0;
};

LineageTracker::LineageTracker() : impl_(std::make_unique<Impl>()) {}
LineageTracker::~LineageTracker() = default;
LineageTracker::LineageTracker(LineageTracker&&) noexcept = default;

std::vector<std::int64_t> LineageTracker::advance(const std::vector<Component>& components) {
    auto assignment = match_components(impl_->atoms, components);

    std::vector<std::int64_t> out(components.size());
    std::vector<std::int64_t> new_ids;
    std::vector<std::vector<int>> new_atoms;
    for (std::size_t c = 0; c < components.size(); ++c) {
        std::int64_t id;
        if (assignment[c] >= 0)
            id = impl_->ids[assignment[c]];
        else
            id = impl_->next_id++;
        out[c] = id;
        new_ids.push_back(id);
        new_atoms.push_back(components[c].atom_indices);
    }
    impl_->ids = std::move(new_ids);
    impl_->atoms = std::move(new_atoms);
    return out;
}

std::int64_t LineageTracker::lineages_created() const { return impl_->next_id; }

struct TrajectoryEventExtractor::Impl {
    std::string trajectory_id;

    // Open RLE run per live lineage, parallel to `atoms`.
    struct Live {
        std::int64_t id;
        std::vector<int> atoms;
        CanonicalFormula formula;
        std::int64_t run_start_ps;
        std::int64_t run_frames;
    };
    std::vector<Live> live;
    std::int64_t next_id = 0;

    std::int64_t frame_count = 0;
    std::int64_t last_time = 0;
    std::int64_t interval = 0;  // 0 = not yet established

    std::vector<MolecularEvent> done;

    void flush(const Live& l) {
        if (interval == 0)
            throw ValidationError("trajectory " + trajectory_id +
                                  ": at least 2 frames required to determine the interval");
        done.push_back(MolecularEvent{trajectory_id, l.id, l.formula, l.run_start_ps, l.run_frames * interval});
    }
};

TrajectoryEventExtractor::TrajectoryEventExtractor(std::string trajectory_id)
    : impl_(std::make_unique<Impl>()) {
    impl_->trajectory_id = std::move(trajectory_id);
}

TrajectoryEventExtractor::~TrajectoryEventExtractor() = default;
TrajectoryEventExtractor::TrajectoryEventExtractor(TrajectoryEventExtractor&&) noexcept = default;

void TrajectoryEventExtractor::add_frame(const Frame& frame) {
    auto& st = *impl_;
    if (frame.trajectory_id != st.trajectory_id)
        throw ValidationError("extractor for trajectory " + st.trajectory_id + " fed frame from " +
                              frame.trajectory_id);
    if (st.frame_count > 0) {
        if (frame.time_ps <= st.last_time)
            throw ValidationError("trajectory " + st.trajectory_id + ": non-monotone time_ps at t=" +
                                  std::to_string(frame.time_ps) + " ps");
        const std::int64_t gap = frame.time_ps - st.last_time;
        if (st.interval == 0)
            st.interval = gap;
        else if (gap != st.interval)
            throw ValidationError("trajectory " + st.trajectory_id + ": non-constant interval at t=" +
                                  std::to_string(frame.time_ps) + " ps");
    }
    st.last_time = frame.time_ps;
    ++st.frame_count;

    auto components = connected_components(frame);

    std::vector<std::vector<int>> lineage_atoms;
    lineage_atoms.reserve(st.live.size());
    for (const auto& l : st.live) lineage_atoms.push_back(l.atoms);
    auto assignment = match_components(lineage_atoms, components);

    std::vector<bool> matched(st.live.size(), false);
    std::vector<Impl::Live> next_live;
    next_live.reserve(components.size());
    for (std::size_t c = 0; c < components.size(); ++c) {
        if (assignment[c] >= 0) {
            matched[assignment[c]] = true;
            Impl::Live l = std::move(st.live[assignment[c]]);
            l.atoms = components[c].atom_indices;
            if (components[c].formula == l.formula) {
                ++l.run_frames;
            } else {
                st.flush(l);
                l.formula = components[c].formula;
                l.run_start_ps = frame.time_ps;
                l.run_frames = 1;
            }
            next_live.push_back(std::move(l));
        } else {
            next_live.push_back(Impl::Live{st.next_id++, components[c].atom_indices, components[c].formula,
                                           frame.time_ps, 1});
        }
    }
    for (std::size_t l = 0; l < st.live.size(); ++l)
        if (!matched[l]) st.flush(st.live[l]);
    st.live = std::move(next_live);
}

std::vector<MolecularEvent> TrajectoryEventExtractor::finish() {
    auto& st = *impl_;
    if (st.frame_count < 2)
        throw ValidationError("trajectory " + st.trajectory_id +
                              ": at least 2 frames required to determine the interval");
    for (const auto& l : st.live) st.flush(l);
    st.live.clear();
    std::sort(st.done.begin(), st.done.end(), [](const MolecularEvent& a, const MolecularEvent& b) {
        return std::tuple(a.start_ps, a.lineage_id) < std::tuple(b.start_ps, b.lineage_id);
    });
    return std::move(st.done);
}

std::vector<MolecularEvent> extract_events(const std::filesystem::path& frames_path, BondThreshold threshold) {
    FrameReader reader(frames_path, threshold);
    std::vector<std::string> order;
    std::map<std::string, TrajectoryEventExtractor> extractors;
    while (auto frame = reader.next()) {
        auto it = extractors.find(frame->trajectory_id);
        if (it == extractors.end()) {
            order.push_back(frame->trajectory_id);
            it = extractors.emplace(frame->trajectory_id, TrajectoryEventExtractor(frame->trajectory_id)).first;
        }
        it->second.add_frame(*frame);
    }
    if (order.empty()) throw ValidationError(frames_path.string() + ": no frames");

    std::vector<MolecularEvent> out;
    for (const auto& id : order) {
        auto events = extractors.at(id).finish();
        out.insert(out.end(), std::make_move_iterator(events.begin()), std::make_move_iterator(events.end()));
    }
    return out;
}

std::vector<EventSequence> group_sequences(const std::vector<MolecularEvent>& events) {
    std::vector<std::string> trajectory_order;
    std::map<std::string, std::map<std::int64_t, std::vector<MolecularEvent>>> grouped;
    for (const auto& e : events) {
        if (!grouped.count(e.trajectory_id)) trajectory_order.push_back(e.trajectory_id);
        grouped[e.trajectory_id][e.lineage_id].push_back(e);
    }
    std::vector<EventSequence> out;
    for (const auto& id : trajectory_order) {
        for (auto& [lineage, evs] : grouped[id]) {
            std::sort(evs.begin(), evs.end(), [](const MolecularEvent& a, const MolecularEvent& b) {
                return a.start_ps < b.start_ps;
            });
            out.push_back(EventSequence{id, lineage, std::move(evs)});
        }
    }
    return out;
}

json event_to_json(const MolecularEvent& event) {
    return json{{"trajectory_id", event.trajectory_id},
                {"lineage_id", event.lineage_id},
                {"formula", event.formula.render()},
                {"start_ps", event.start_ps},
                {"duration_ps", event.duration_ps}};
}

MolecularEvent event_from_json(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("trajectory_id") || !j.contains("lineage_id") ||
        !j.contains("formula") || !j.contains("start_ps") || !j.contains("duration_ps"))
        throw ValidationError(where +
                              ": malformed record: expected trajectory_id/lineage_id/formula/start_ps/duration_ps");
    MolecularEvent e;
    if (!j["trajectory_id"].is_string() || j["trajectory_id"].get<std::string>().empty())
        throw ValidationError(where + ": malformed record: trajectory_id must be a non-empty string");
    e.trajectory_id = j["trajectory_id"].get<std::string>();
    if (!j["lineage_id"].is_number_integer() || j["lineage_id"].get<std::int64_t>() < 0)
        throw ValidationError(where + ": malformed record: lineage_id must be a non-negative integer");
    e.lineage_id = j["lineage_id"].get<std::int64_t>();
    if (!j["formula"].is_string())
        throw ValidationError(where + ": malformed record: formula must be a string");
    e.formula = parse_formula(j["formula"].get<std::string>(), FormulaMode::strict);
    if (!j["start_ps"].is_number_integer() || j["start_ps"].get<std::int64_t>() < 0)
        throw ValidationError(where + ": malformed record: start_ps must be a non-negative integer");
    e.start_ps = j["start_ps"].get<std::int64_t>();
    if (!j["duration_ps"].is_number_integer() || j["duration_ps"].get<std::int64_t>() <= 0)
        throw ValidationError(where + ": malformed record: duration_ps must be a positive integer");
    e.duration_ps = j["duration_ps"].get<std::int64_t>();
    return e;
}

void write_event(std::ostream& out, const MolecularEvent& event) {
    out << event_to_json(event).dump() << '\n';
}

void write_events(const std::filesystem::path& path, const std::vector<MolecularEvent>& events) {
    auto out = open_output(path);
    for (const auto& e : events) write_event(out, e);
}

std::vector<MolecularEvent> read_events(const std::filesystem::path& path) {
    JsonlReader reader(path);
    std::vector<MolecularEvent> out;
    json j;
    while (reader.next(j)) out.push_back(event_from_json(j, reader.location()));
    return out;
}

DurationSummary summarize_durations(std::vector<std::int64_t> durations) {
    if (durations.empty()) throw ValidationError("summarize_durations: empty input");
    std::sort(durations.begin(), durations.end());
    const std::size_t n = durations.size();
    // Quartile by linear interpolation between the two closest order statistics.
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(n - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        if (lo + 1 >= n) return static_cast<double>(durations[n - 1]);
        return static_cast<double>(durations[lo]) +
               frac * static_cast<double>(durations[lo + 1] - durations[lo]);
    };
    DurationSummary s;
    s.count = static_cast<std::int64_t>(n);
    s.min_ps = durations.front();
    s.q1_ps = quantile(0.25);
    s.median_ps = quantile(0.5);
    s.q3_ps = quantile(0.75);
    s.max_ps = durations.back();
    return s;
}

StageReport make_stage_report(const StageCounts& counts, const std::vector<MolecularEvent>& events) {
    StageReport report;
    report.counts = counts;
    std::map<std::string, std::vector<std::int64_t>> durations;
    for (const auto& e : events) durations[e.formula.render()].push_back(e.duration_ps);
    for (auto& [formula, d] : durations) report.per_species[formula] = summarize_durations(std::move(d));
    return report;
}

std::string stage_report_json(const StageReport& report) {
    auto pct_of = [](std::int64_t part, std::int64_t whole) {
        return whole > 0 ? 100.0 * static_cast<double>(part) / static_cast<double>(whole) : 0.0;
    };
    json stages{{"raw_events", report.counts.raw_events},
                {"extracted_events", report.counts.extracted_events},
                {"filtered_events", report.counts.filtered_events},
                {"balanced_events", report.counts.balanced_events}};
    json retention{{"extracted_pct", pct_of(report.counts.extracted_events, report.counts.raw_events)},
                   {"filtered_pct", pct_of(report.counts.filtered_events, report.counts.raw_events)},
                   {"balanced_pct", pct_of(report.counts.balanced_events, report.counts.raw_events)}};
    json species = json::object();
    for (const auto& [formula, s] : report.per_species)
        species[formula] = json{{"count", s.count},   {"min_ps", s.min_ps}, {"q1_ps", s.q1_ps},
                                {"median_ps", s.median_ps}, {"q3_ps", s.q3_ps}, {"max_ps", s.max_ps}};
    return json{{"stages", stages}, {"retention", retention}, {"duration_by_species", species}}.dump(2);
}

}  // namespace evomd
