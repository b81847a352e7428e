#include "evomd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "evomd/errors.hpp"
#include "evomd/jsonl.hpp"
#include "evomd/rng.hpp"
#include "evomd/templates.hpp"

namespace evomd {

using nlohmann::json;

void validate_bins(const DurationBins& bins) {
    for (std::size_t k = 0; k < bins.edges.size(); ++k) {
        if (bins.edges[k] <= 0) throw ValidationError("bin edges must be positive");
        if (k > 0 && bins.edges[k] <= bins.edges[k - 1])
            throw ValidationError("bin edges must be strictly increasing");
    }
}

int duration_bin(const DurationBins& bins, std::int64_t duration_ps) {
    int bin = 0;
    for (auto edge : bins.edges)
        if (edge <= duration_ps) ++bin;
    return bin;
}

std::string bin_label(const DurationBins& bins, int bin_index) {
    if (bin_index < 0 || bin_index >= bins.bin_count())
        throw ValidationError("bin index " + std::to_string(bin_index) + " out of range");
    if (bins.bin_count() == 3) {
        static const char* const names[] = {"short", "medium", "long"};
        return names[bin_index];
    }
    return "bin" + std::to_string(bin_index);
}

std::string stratum_key(const CanonicalFormula& formula, const DurationBins& bins,
                        std::int64_t duration_ps) {
    return formula.render() + "/" + bin_label(bins, duration_bin(bins, duration_ps));
}

std::vector<MolecularEvent> balance(const std::vector<MolecularEvent>& events, const DurationBins& bins,
                                    std::int64_t cap, std::uint64_t seed) {
    validate_bins(bins);
    if (cap <= 0) throw ValidationError("balance: cap must be positive");

    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t k = 0; k < events.size(); ++k)
        strata[stratum_key(events[k].formula, bins, events[k].duration_ps)].push_back(k);

    std::vector<bool> keep(events.size(), false);
    for (const auto& [key, indices] : strata) {
        if (static_cast<std::int64_t>(indices.size()) <= cap) {
            for (auto k : indices) keep[k] = true;
            continue;
        }
        // Seed per stratum key, so a stratum's selection does not depend on
        // which other strata happen to exist.
        std::mt19937_64 rng(derive_seed(seed, string_hash64(key)));
        for (auto pos : sample_without_replacement(indices.size(), static_cast<std::size_t>(cap), rng))
            keep[indices[pos]] = true;
    }

    std::vector<MolecularEvent> out;
    for (std::size_t k = 0; k < events.size(); ++k)
        if (keep[k]) out.push_back(events[k]);
    return out;
}

std::map<std::string, std::int64_t> stratum_counts(const std::vector<MolecularEvent>& events,
                                                   const DurationBins& bins) {
    std::map<std::string, std::int64_t> counts;
    for (const auto& e : events) ++counts[stratum_key(e.formula, bins, e.duration_ps)];
    return counts;
}

std::string PredictionSample::sample_id() const {
    return std::string(task_name(task)) + ":" + trajectory_id + ":" + std::to_string(lineage_id) + ":" +
           std::to_string(anchor_index);
}

std::vector<PredictionSample> build_windows(const std::vector<EventSequence>& sequences, Task task,
                                            HistoryRange range, std::uint64_t seed, WindowReport* report) {
    if (range.min_len < 1 || range.min_len > range.max_len)
        throw ValidationError("history range must satisfy 1 <= min <= max");
    const int t = target_count(task);

    WindowReport local;
    std::vector<PredictionSample> out;
    auto pair_of = [](const MolecularEvent& e) { return std::make_pair(e.formula, e.duration_ps); };

    for (std::size_t si = 0; si < sequences.size(); ++si) {
        const auto& seq = sequences[si];
        const auto n = static_cast<std::int64_t>(seq.events.size());
        std::mt19937_64 rng(derive_seed(seed, si));

        if (task == Task::backward) {
            // anchor = the target event, history = the range.min..max events after it
            if (n < range.min_len + 1) {
                ++local.short_sequences;
                continue;
            }
            for (std::int64_t anchor = 0; anchor + range.min_len < n; ++anchor) {
                const auto h = uniform_between(rng, range.min_len, range.max_len);
                if (anchor + h >= n) {
                    ++local.skipped_windows;
                    continue;
                }
                PredictionSample s;
                s.task = task;
                s.trajectory_id = seq.trajectory_id;
                s.lineage_id = seq.lineage_id;
                s.anchor_index = anchor;
                for (std::int64_t k = anchor + 1; k <= anchor + h; ++k) s.history.push_back(pair_of(seq.events[k]));
                s.targets.push_back(pair_of(seq.events[anchor]));
                out.push_back(std::move(s));
                ++local.samples;
            }
        } else {
            // anchor = the first target event, history = the h events before it
            if (n < range.min_len + t) {
                ++local.short_sequences;
                continue;
            }
            for (std::int64_t anchor = range.min_len; anchor + t <= n; ++anchor) {
                const auto h = uniform_between(rng, range.min_len, range.max_len);
                if (anchor - h < 0) {
                    ++local.skipped_windows;
                    continue;
                }
                PredictionSample s;
                s.task = task;
                s.trajectory_id = seq.trajectory_id;
                s.lineage_id = seq.lineage_id;
                s.anchor_index = anchor;
                for (std::int64_t k = anchor - h; k < anchor; ++k) s.history.push_back(pair_of(seq.events[k]));
                for (int k = 0; k < t; ++k) s.targets.push_back(pair_of(seq.events[anchor + k]));
                out.push_back(std::move(s));
                ++local.samples;
            }
        }
    }
    if (report) *report = local;
    return out;
}

std::pair<std::vector<PredictionSample>, std::vector<PredictionSample>> split_disjoint(
    std::vector<PredictionSample> samples, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ValidationError("test fraction must lie in (0,1)");

    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& s : samples)
        if (seen.insert(s.trajectory_id).second) ids.push_back(s.trajectory_id);
    if (ids.size() < 2)
        throw ValidationError("trajectory-disjoint split needs at least 2 trajectories, got " +
                              std::to_string(ids.size()));

    const auto n = static_cast<std::int64_t>(ids.size());
    auto n_test = std::llround(test_fraction * static_cast<double>(n));
    n_test = std::clamp<std::int64_t>(n_test, 1, n - 1);  // both sides stay nonempty

    // Sort before shuffling so the choice depends only on the id set, not on
    // sample order.
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(derive_seed(seed, 0));
    seeded_shuffle(ids, rng);
    std::set<std::string> test_ids(ids.begin(), ids.begin() + n_test);

    std::vector<PredictionSample> train, test;
    for (auto& s : samples) {
        const bool is_test = test_ids.count(s.trajectory_id) > 0;
        s.split = is_test ? "test" : "train";
        (is_test ? test : train).push_back(std::move(s));
    }
    return {std::move(train), std::move(test)};
}

json sample_to_json(const PredictionSample& sample) {
    auto pairs = [](const std::vector<std::pair<CanonicalFormula, std::int64_t>>& v) {
        json arr = json::array();
        for (const auto& [f, d] : v) arr.push_back(json::array({f.render(), d}));
        return arr;
    };
    return json{{"task", std::string(task_name(sample.task))},
                {"trajectory_id", sample.trajectory_id},
                {"lineage_id", sample.lineage_id},
                {"anchor_index", sample.anchor_index},
                {"history", pairs(sample.history)},
                {"targets", pairs(sample.targets)},
                {"split", sample.split}};
}

PredictionSample sample_from_json(const json& j, const std::string& where) {
    auto fail = [&](const std::string& what) -> ValidationError {
        return ValidationError(where + ": malformed sample: " + what);
    };
    auto pairs = [&](const char* key) {
        std::vector<std::pair<CanonicalFormula, std::int64_t>> v;
        if (!j.contains(key) || !j[key].is_array()) throw fail("missing array field \"" + std::string(key) + "\"");
        for (const auto& item : j[key]) {
            if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_number_integer())
                throw fail("\"" + std::string(key) + "\" entries must be [formula, duration] pairs");
            v.emplace_back(parse_formula(item[0].get<std::string>(), FormulaMode::lenient),
                           item[1].get<std::int64_t>());
        }
        return v;
    };
    if (!j.is_object()) throw fail("expected an object");
    if (!j.contains("task") || !j["task"].is_string()) throw fail("missing string field \"task\"");
    if (!j.contains("trajectory_id") || !j["trajectory_id"].is_string())
        throw fail("missing string field \"trajectory_id\"");
    if (!j.contains("lineage_id") || !j["lineage_id"].is_number_integer())
        throw fail("missing integer field \"lineage_id\"");
    if (!j.contains("anchor_index") || !j["anchor_index"].is_number_integer())
        throw fail("missing integer field \"anchor_index\"");

    PredictionSample s;
    s.task = task_from_name(j["task"].get<std::string>());
    s.trajectory_id = j["trajectory_id"].get<std::string>();
    s.lineage_id = j["lineage_id"].get<std::int64_t>();
    s.anchor_index = j["anchor_index"].get<std::int64_t>();
    s.history = pairs("history");
    s.targets = pairs("targets");
    s.split = j.value("split", "");
    return s;
}

void write_samples(const std::filesystem::path& path, const std::vector<PredictionSample>& samples) {
    auto out = open_output(path);
    for (const auto& s : samples) out << sample_to_json(s).dump() << '\n';
}

std::vector<PredictionSample> read_samples(const std::filesystem::path& path) {
    JsonlReader reader(path);
    std::vector<PredictionSample> out;
    json j;
    while (reader.next(j)) out.push_back(sample_from_json(j, reader.location()));
    return out;
}

DatasetRecord format_record(const PredictionSample& sample) {
    if (sample.history.empty()) throw ValidationError("format_record: empty history");
    if (sample.targets.size() != static_cast<std::size_t>(target_count(sample.task)))
        throw ValidationError("format_record: " + std::string(task_name(sample.task)) + " sample with " +
                              std::to_string(sample.targets.size()) + " targets");
    DatasetRecord r;
    r.sample_id = sample.sample_id();
    r.task = std::string(task_name(sample.task));
    r.split = sample.split;
    r.trajectory_id = sample.trajectory_id;
    r.system = templates::kSystem;
    r.instruction = format_instruction(sample.task, sample.history);
    r.output = serialize_targets(sample.targets);
    for (const auto& [f, d] : sample.history) r.history.emplace_back(f.render(), d);
    for (const auto& [f, d] : sample.targets) r.targets.emplace_back(f.render(), d);
    return r;
}

std::vector<DatasetRecord> format_records(const std::vector<PredictionSample>& samples) {
    std::vector<DatasetRecord> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(format_record(s));
    return out;
}

json record_to_json(const DatasetRecord& record) {
    auto pairs = [](const std::vector<std::pair<std::string, std::int64_t>>& v) {
        json arr = json::array();
        for (const auto& [f, d] : v) arr.push_back(json::array({f, d}));
        return arr;
    };
    return json{{"sample_id", record.sample_id},
                {"task", record.task},
                {"split", record.split},
                {"trajectory_id", record.trajectory_id},
                {"system", record.system},
                {"instruction", record.instruction},
                {"output", record.output},
                {"history", pairs(record.history)},
                {"targets", pairs(record.targets)}};
}

DatasetRecord record_from_json(const json& j, const std::string& where) {
    auto str = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string())
            throw ValidationError(where + ": malformed record: missing string field \"" + key + "\"");
        return j[key].get<std::string>();
    };
    auto pairs = [&](const char* key) {
        std::vector<std::pair<std::string, std::int64_t>> v;
        if (!j.contains(key) || !j[key].is_array())
            throw ValidationError(where + ": malformed record: missing array field \"" + key + "\"");
        for (const auto& item : j[key]) {
            if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_number_integer())
                throw ValidationError(where + ": malformed record: \"" + key +
                                      "\" entries must be [formula, duration] pairs");
            v.emplace_back(item[0].get<std::string>(), item[1].get<std::int64_t>());
        }
        return v;
    };
    DatasetRecord r;
    r.sample_id = str("sample_id");
    r.task = str("task");
    r.split = str("split");
    r.trajectory_id = str("trajectory_id");
    r.system = str("system");
    r.instruction = str("instruction");
    r.output = str("output");
    r.history = pairs("history");
    r.targets = pairs("targets");
    return r;
}

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
    auto out = open_output(path);
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
    JsonlReader reader(path);
    std::vector<DatasetRecord> out;
    json j;
    while (reader.next(j)) out.push_back(record_from_json(j, reader.location()));
    return out;
}

std::vector<json> interleave_qa(const std::vector<json>& forecast, const std::vector<json>& qa_pool,
                                double ratio, std::uint64_t seed) {
    if (ratio < 0.0 || !std::isfinite(ratio)) throw ValidationError("qa ratio must be finite and >= 0");
    const auto n_forecast = static_cast<std::int64_t>(forecast.size());
    const auto needed = std::llround(ratio * static_cast<double>(n_forecast));
    if (needed > static_cast<std::int64_t>(qa_pool.size())) {
        std::ostringstream msg;
        msg << "qa ratio " << ratio << " needs " << needed << " qa records but the pool holds "
            << qa_pool.size() << "; maximum attainable ratio is " << std::setprecision(6)
            << (n_forecast > 0 ? static_cast<double>(qa_pool.size()) / static_cast<double>(n_forecast) : 0.0);
        throw ValidationError(msg.str());
    }

    for (std::size_t k = 0; k < qa_pool.size(); ++k) {
        const auto& q = qa_pool[k];
        if (!q.is_object() || !q.contains("instruction") || !q["instruction"].is_string() ||
            !q.contains("output") || !q["output"].is_string())
            throw ValidationError("qa record " + std::to_string(k + 1) +
                                  ": expected an object with string instruction/output");
    }

    std::vector<std::size_t> order(qa_pool.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::mt19937_64 select_rng(derive_seed(seed, 1));
    seeded_shuffle(order, select_rng);

    std::vector<json> mixed = forecast;
    for (std::int64_t k = 0; k < needed; ++k) {
        json q = qa_pool[order[static_cast<std::size_t>(k)]];
        if (!q.contains("task")) q["task"] = "qa";
        if (!q.contains("system")) q["system"] = templates::kSystem;
        mixed.push_back(std::move(q));
    }
    std::mt19937_64 mix_rng(derive_seed(seed, 2));
    seeded_shuffle(mixed, mix_rng);
    return mixed;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    JsonlReader reader(path);
    std::vector<json> out;
    json j;
    while (reader.next(j)) out.push_back(std::move(j));
    return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
    auto out = open_output(path);
    for (const auto& row : rows) out << row.dump() << '\n';
}

}  // namespace evomd
