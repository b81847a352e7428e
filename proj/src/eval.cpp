#include "evomd/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

#include "evomd/errors.hpp"
#include "evomd/jsonl.hpp"

namespace evomd {

using nlohmann::json;

std::string_view parse_failure_name(ParseFailureKind kind) {
    switch (kind) {
        case ParseFailureKind::no_tuple: return "no_tuple";
        case ParseFailureKind::bad_formula: return "bad_formula";
        case ParseFailureKind::bad_duration: return "bad_duration";
        case ParseFailureKind::extra_text: return "extra_text";
    }
    throw ValidationError("unknown parse failure kind");
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

ParsedPrediction fail(ParseFailureKind kind) {
    ParsedPrediction p;
    p.failure = kind;
    return p;
}

}  // namespace

ParsedPrediction parse_prediction(std::string_view raw) {
    const auto s = trim(raw);
    if (s.empty()) return fail(ParseFailureKind::no_tuple);

    const auto open = s.find('(');
    const auto close = s.rfind(')');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        return fail(ParseFailureKind::no_tuple);
    if (open != 0 || close != s.size() - 1) return fail(ParseFailureKind::extra_text);

    const auto inner = s.substr(1, s.size() - 2);
    const auto comma = inner.find(',');
    if (comma == std::string_view::npos) return fail(ParseFailureKind::no_tuple);

    const auto formula_text = trim(inner.substr(0, comma));
    const auto duration_text = trim(inner.substr(comma + 1));

    ParsedPrediction out;
    try {
        out.formula = parse_formula(formula_text, FormulaMode::strict);
    } catch (const ValidationError&) {
        return fail(ParseFailureKind::bad_formula);
    }

    if (duration_text.empty() || duration_text.size() > 18 ||
        !std::all_of(duration_text.begin(), duration_text.end(),
                     [](char c) { return c >= '0' && c <= '9'; }))
        return fail(ParseFailureKind::bad_duration);
    out.duration_ps = std::stoll(std::string(duration_text));
    if (out.duration_ps < 1) return fail(ParseFailureKind::bad_duration);

    out.ok = true;
    return out;
}

ParsedPredictionList parse_prediction_list(std::string_view raw, int expected_count) {
    ParsedPredictionList out;
    const auto s = trim(raw);

    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto split = s.find(';', start);
        if (split == std::string_view::npos) {
            parts.push_back(s.substr(start));
            break;
        }
        parts.push_back(s.substr(start, split - start));
        start = split + 1;
    }

    for (const auto part : parts) {
        const auto p = parse_prediction(part);
        if (!p.ok) {
            out.failure = p.failure;
            return out;
        }
        out.tuples.emplace_back(p.formula, p.duration_ps);
    }
    if (static_cast<int>(out.tuples.size()) != expected_count) {
        // too many valid tuples = extra words; too few = a missing tuple
        out.failure = static_cast<int>(out.tuples.size()) > expected_count ? ParseFailureKind::extra_text
                                                                           : ParseFailureKind::no_tuple;
        out.tuples.clear();
        return out;
    }
    out.ok = true;
    return out;
}

std::string_view mismatch_class_name(MismatchClass cls) {
    switch (cls) {
        case MismatchClass::under_sulfidation: return "under_sulfidation";
        case MismatchClass::over_sulfidation: return "over_sulfidation";
        case MismatchClass::oxygen_deviation: return "oxygen_deviation";
        case MismatchClass::other: return "other";
    }
    throw ValidationError("unknown mismatch class");
}

MismatchClass classify_mismatch(const CanonicalFormula& pred, const CanonicalFormula& truth) {
    if (pred == truth) throw ValidationError("classify_mismatch called on equal formulas");
    const auto s_pred = pred.count_of("S"), s_truth = truth.count_of("S");
    if (s_pred < s_truth) return MismatchClass::under_sulfidation;
    if (s_pred > s_truth) return MismatchClass::over_sulfidation;
    if (pred.count_of("O") != truth.count_of("O")) return MismatchClass::oxygen_deviation;
    return MismatchClass::other;
}

PredictionEntry prediction_entry_from_json(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("sample_id") || !j["sample_id"].is_string())
        throw ValidationError(where + ": malformed record: missing string \"sample_id\"");
    PredictionEntry e;
    e.sample_id = j["sample_id"].get<std::string>();
    if (j.contains("output")) {
        if (!j["output"].is_string())
            throw ValidationError(where + ": malformed record: \"output\" must be a string");
        e.output = j["output"].get<std::string>();
    }
    if (j.contains("candidates")) {
        if (!j["candidates"].is_array())
            throw ValidationError(where + ": malformed record: \"candidates\" must be an array");
        for (const auto& c : j["candidates"]) {
            if (!c.is_string())
                throw ValidationError(where + ": malformed record: candidates must be strings");
            e.candidates.push_back(c.get<std::string>());
        }
    }
    if (!e.output && e.candidates.empty())
        throw ValidationError(where + ": malformed record: need \"output\" or \"candidates\"");
    return e;
}

std::vector<PredictionEntry> read_predictions(const std::filesystem::path& path) {
    JsonlReader reader(path);
    std::vector<PredictionEntry> out;
    json j;
    while (reader.next(j)) out.push_back(prediction_entry_from_json(j, reader.location()));
    return out;
}

namespace {

struct DurationAccumulator {
    std::int64_t scored = 0;
    std::int64_t within = 0;
    double abs_sum = 0.0;

    void add(std::int64_t predicted, std::int64_t truth, std::int64_t tolerance) {
        ++scored;
        const auto diff = std::abs(predicted - truth);
        abs_sum += static_cast<double>(diff);
        if (diff <= tolerance) ++within;
    }
};

double pct(std::int64_t part, std::int64_t whole) {
    return whole > 0 ? 100.0 * static_cast<double>(part) / static_cast<double>(whole) : 0.0;
}

}  // namespace

TaskScore score_task(const std::vector<PredictionEntry>& entries, const std::vector<DatasetRecord>& truth,
                     Task task, int k, std::int64_t duration_tolerance_ps) {
    if (k < 1) throw ValidationError("k must be positive");
    if (duration_tolerance_ps < 0) throw ValidationError("duration tolerance must be non-negative");
    if (truth.empty()) throw ValidationError("empty ground truth");
    for (const auto& r : truth)
        if (r.task != task_name(task))
            throw ValidationError("ground-truth record " + r.sample_id + " has task " + r.task +
                                  ", expected " + std::string(task_name(task)));

    std::map<std::string, const PredictionEntry*> by_id;
    for (const auto& e : entries) {
        if (!by_id.emplace(e.sample_id, &e).second)
            throw ValidationError("duplicate sample_id " + e.sample_id + " in predictions");
    }
    {
        std::set<std::string> truth_ids;
        for (const auto& r : truth)
            if (!truth_ids.insert(r.sample_id).second)
                throw ValidationError("duplicate sample_id " + r.sample_id + " in ground truth");
        for (const auto& e : entries)
            if (!truth_ids.count(e.sample_id))
                throw ValidationError("prediction for unknown sample_id " + e.sample_id);
    }

    const int n_targets = target_count(task);
    TaskScore score;
    score.task = std::string(task_name(task));
    score.total = static_cast<std::int64_t>(truth.size());

    std::vector<std::int64_t> step_hits(static_cast<std::size_t>(n_targets), 0);
    std::map<int, std::int64_t> hit_at_k;
    DurationAccumulator durations;

    auto record_failure = [&](const std::string& truth_species, ParseFailureKind kind) {
        ++score.parse_failures;
        ++score.failure_kinds[std::string(parse_failure_name(kind))];
        ++score.confusion[truth_species]["UNPARSEABLE"];
    };
    auto record_mismatch = [&](const CanonicalFormula& pred, const CanonicalFormula& target) {
        ++score.taxonomy[std::string(mismatch_class_name(classify_mismatch(pred, target)))];
    };

    for (const auto& record : truth) {
        if (record.targets.size() != static_cast<std::size_t>(n_targets))
            throw ValidationError("record " + record.sample_id + " carries " +
                                  std::to_string(record.targets.size()) + " targets, expected " +
                                  std::to_string(n_targets));
        std::vector<std::pair<CanonicalFormula, std::int64_t>> targets;
        for (const auto& [f, d] : record.targets)
            targets.emplace_back(parse_formula(f, FormulaMode::lenient), d);
        const std::string truth_species = targets.front().first.render();

        auto it = by_id.find(record.sample_id);
        if (it == by_id.end()) {
            record_failure(truth_species, ParseFailureKind::no_tuple);
            continue;
        }
        const PredictionEntry& entry = *it->second;

        if (task == Task::potential_k) {
            std::vector<std::string> candidates = entry.candidates;
            if (candidates.empty() && entry.output) candidates.push_back(*entry.output);

            std::vector<ParsedPrediction> parsed;
            for (const auto& c : candidates) parsed.push_back(parse_prediction(c));

            // top-1 decides hit / wrong / failure
            if (parsed.empty() || !parsed.front().ok) {
                record_failure(truth_species,
                               parsed.empty() ? ParseFailureKind::no_tuple : parsed.front().failure);
            } else if (parsed.front().formula == targets.front().first) {
                ++score.hits;
                ++score.confusion[truth_species][parsed.front().formula.render()];
                durations.add(parsed.front().duration_ps, targets.front().second, duration_tolerance_ps);
            } else {
                ++score.wrong_valid;
                ++score.confusion[truth_species][parsed.front().formula.render()];
                record_mismatch(parsed.front().formula, targets.front().first);
            }

            bool found = false;
            for (int j = 1; j <= k; ++j) {
                if (!found && j <= static_cast<int>(parsed.size()) &&
                    parsed[static_cast<std::size_t>(j - 1)].ok &&
                    parsed[static_cast<std::size_t>(j - 1)].formula == targets.front().first)
                    found = true;
                if (found) ++hit_at_k[j];
            }
            continue;
        }

        if (!entry.output) {
            record_failure(truth_species, ParseFailureKind::no_tuple);
            continue;
        }
        const auto parsed = parse_prediction_list(*entry.output, n_targets);
        if (!parsed.ok) {
            record_failure(truth_species, parsed.failure);
            continue;
        }

        bool all_match = true;
        int first_wrong = -1;
        for (int step = 0; step < n_targets; ++step) {
            const bool match =
                parsed.tuples[static_cast<std::size_t>(step)].first == targets[static_cast<std::size_t>(step)].first;
            if (match) {
                ++step_hits[static_cast<std::size_t>(step)];
                durations.add(parsed.tuples[static_cast<std::size_t>(step)].second,
                              targets[static_cast<std::size_t>(step)].second, duration_tolerance_ps);
            } else {
                all_match = false;
                if (first_wrong < 0) first_wrong = step;
            }
        }
        ++score.confusion[truth_species][parsed.tuples.front().first.render()];
        if (all_match) {
            ++score.hits;
        } else {
            ++score.wrong_valid;
            record_mismatch(parsed.tuples[static_cast<std::size_t>(first_wrong)].first,
                            targets[static_cast<std::size_t>(first_wrong)].first);
        }
    }

    score.accuracy_pct = pct(score.hits, score.total);
    score.missing_rate_pct = pct(score.parse_failures, score.total);
    score.duration_scored = durations.scored;
    score.duration_mae_ps = durations.scored > 0 ? durations.abs_sum / static_cast<double>(durations.scored) : 0.0;
    score.duration_within_tol_pct = pct(durations.within, durations.scored);

    if (task == Task::potential_k)
        for (int j = 1; j <= k; ++j) score.potential_k_hit_pct[j] = pct(hit_at_k[j], score.total);

    if (n_targets > 1) {
        double sum = 0.0;
        for (int step = 0; step < n_targets; ++step) {
            const double a = pct(step_hits[static_cast<std::size_t>(step)], score.total);
            score.per_step_accuracy_pct.push_back(a);
            sum += a;
        }
        score.nstep_mean_accuracy_pct = sum / static_cast<double>(n_targets);
    }
    return score;
}

json score_to_json(const TaskScore& s) {
    json j;
    j["task"] = s.task;
    j["total"] = s.total;
    j["hits"] = s.hits;
    j["wrong_valid"] = s.wrong_valid;
    j["parse_failures"] = s.parse_failures;
    j["accuracy_pct"] = s.accuracy_pct;
    j["missing_rate_pct"] = s.missing_rate_pct;
    j["duration_scored"] = s.duration_scored;
    j["duration_mae_ps"] = s.duration_mae_ps;
    j["duration_within_tol_pct"] = s.duration_within_tol_pct;
    if (!s.potential_k_hit_pct.empty()) {
        json hits = json::object();
        for (const auto& [kk, v] : s.potential_k_hit_pct) hits[std::to_string(kk)] = v;
        j["potential_k_hit_pct"] = std::move(hits);
    }
    if (!s.per_step_accuracy_pct.empty()) {
        j["per_step_accuracy_pct"] = s.per_step_accuracy_pct;
        j["nstep_mean_accuracy_pct"] = s.nstep_mean_accuracy_pct;
    }
    j["taxonomy"] = s.taxonomy;
    j["failure_kinds"] = s.failure_kinds;
    j["confusion"] = s.confusion;
    return j;
}

namespace {

std::string two_dec(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << v;
    return out.str();
}

}  // namespace

std::string emit_report(const EvalReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    json j;
    j["k"] = report.k;
    j["duration_tolerance_ps"] = report.duration_tolerance_ps;
    json tasks = json::array();
    for (const auto& s : report.tasks) tasks.push_back(score_to_json(s));
    j["tasks"] = std::move(tasks);
    {
        auto out = open_output(out_dir / "report.json");
        out << j.dump(2) << '\n';
    }

    {
        auto out = open_output(out_dir / "confusion.csv");
        out << "task,truth,predicted,count\n";
        for (const auto& s : report.tasks)
            for (const auto& [truth, row] : s.confusion)
                for (const auto& [pred, count] : row)
                    out << s.task << ',' << truth << ',' << pred << ',' << count << '\n';
    }

    {
        auto out = open_output(out_dir / "nstep_decay.csv");
        out << "task,step,accuracy_pct\n";
        for (const auto& s : report.tasks)
            for (std::size_t step = 0; step < s.per_step_accuracy_pct.size(); ++step)
                out << s.task << ',' << (step + 1) << ',' << two_dec(s.per_step_accuracy_pct[step]) << '\n';
    }

    {
        auto out = open_output(out_dir / "error_taxonomy.csv");
        out << "task,class,count,share_pct\n";
        static const char* const classes[] = {"under_sulfidation", "over_sulfidation", "oxygen_deviation",
                                              "other"};
        for (const auto& s : report.tasks) {
            for (const char* cls : classes) {
                auto it = s.taxonomy.find(cls);
                const std::int64_t count = it == s.taxonomy.end() ? 0 : it->second;
                std::ostringstream share;
                share << std::fixed << std::setprecision(4) << pct(count, s.wrong_valid);
                out << s.task << ',' << cls << ',' << count << ',' << share.str() << '\n';
            }
        }
    }

    std::ostringstream summary;
    for (const auto& s : report.tasks) {
        summary << s.task << ": accuracy " << two_dec(s.accuracy_pct) << "% (" << s.hits << "/" << s.total
                << "), missing rate " << two_dec(s.missing_rate_pct) << "%";
        if (s.duration_scored > 0)
            summary << ", duration MAE " << two_dec(s.duration_mae_ps) << " ps (within "
                    << report.duration_tolerance_ps << " ps: " << two_dec(s.duration_within_tol_pct) << "%)";
        summary << '\n';
        if (!s.potential_k_hit_pct.empty()) {
            summary << "  potential-k hit rates:";
            for (const auto& [kk, v] : s.potential_k_hit_pct) summary << " k=" << kk << ": " << two_dec(v) << "%";
            summary << '\n';
        }
        for (std::size_t step = 0; step < s.per_step_accuracy_pct.size(); ++step)
            summary << "  step " << (step + 1) << " accuracy " << two_dec(s.per_step_accuracy_pct[step])
                    << "%\n";
        if (s.wrong_valid > 0) {
            summary << "  mismatch taxonomy:";
            for (const auto& [cls, count] : s.taxonomy)
                summary << " " << cls << " " << two_dec(pct(count, s.wrong_valid)) << "%";
            summary << '\n';
        }
    }
    return summary.str();
}

}  // namespace evomd
