// evomd._core — Python bindings over the pipeline's main operations.
//
// All composite values cross the boundary as plain dicts/lists mirroring the
// on-disk JSON shapes (events.jsonl rows, samples.jsonl rows, dataset.jsonl
// rows, model JSON), so Python-side artifacts stay interchangeable with the
// CLI's files.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "evomd/baselines.hpp"
#include "evomd/dataset.hpp"
#include "evomd/errors.hpp"
#include "evomd/eval.hpp"
#include "evomd/events.hpp"
#include "evomd/formula.hpp"
#include "evomd/jsonl.hpp"
#include "evomd/kmc.hpp"
#include "evomd/pipeline.hpp"
#include "evomd/templates.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

json py_to_json(const py::handle& obj) {
    if (obj.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(obj)) return obj.cast<bool>();
    if (py::isinstance<py::int_>(obj)) return obj.cast<std::int64_t>();
    if (py::isinstance<py::float_>(obj)) return obj.cast<double>();
    if (py::isinstance<py::str>(obj)) return obj.cast<std::string>();
    if (py::isinstance<py::dict>(obj)) {
        json out = json::object();
        for (auto item : obj.cast<py::dict>())
            out[py::str(item.first).cast<std::string>()] = py_to_json(item.second);
        return out;
    }
    if (py::isinstance<py::list>(obj) || py::isinstance<py::tuple>(obj)) {
        json out = json::array();
        for (auto item : obj.cast<py::sequence>()) out.push_back(py_to_json(item));
        return out;
    }
    throw evomd::ValidationError("cannot convert Python object of type " +
                                 py::str(py::type::of(obj)).cast<std::string>() + " to JSON");
}

py::object json_to_py(const json& j) {
    switch (j.type()) {
        case json::value_t::null:
            return py::none();
        case json::value_t::boolean:
            return py::bool_(j.get<bool>());
        case json::value_t::number_integer:
            return py::int_(j.get<std::int64_t>());
        case json::value_t::number_unsigned:
            return py::int_(j.get<std::uint64_t>());
        case json::value_t::number_float:
            return py::float_(j.get<double>());
        case json::value_t::string:
            return py::str(j.get<std::string>());
        case json::value_t::array: {
            py::list out;
            for (const auto& item : j) out.append(json_to_py(item));
            return out;
        }
        case json::value_t::object: {
            py::dict out;
            for (const auto& [k, v] : j.items()) out[py::str(k)] = json_to_py(v);
            return out;
        }
        default:
            return py::none();
    }
}

std::vector<evomd::MolecularEvent> events_from_py(const py::list& rows) {
    std::vector<evomd::MolecularEvent> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.push_back(evomd::event_from_json(py_to_json(rows[i]), "events[" + std::to_string(i) + "]"));
    return out;
}

py::list events_to_py(const std::vector<evomd::MolecularEvent>& events) {
    py::list out;
    for (const auto& e : events) out.append(json_to_py(evomd::event_to_json(e)));
    return out;
}

std::vector<evomd::PredictionSample> samples_from_py(const py::list& rows) {
    std::vector<evomd::PredictionSample> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.push_back(evomd::sample_from_json(py_to_json(rows[i]), "samples[" + std::to_string(i) + "]"));
    return out;
}

py::list samples_to_py(const std::vector<evomd::PredictionSample>& samples) {
    py::list out;
    for (const auto& s : samples) out.append(json_to_py(evomd::sample_to_json(s)));
    return out;
}

std::vector<evomd::DatasetRecord> records_from_py(const py::list& rows) {
    std::vector<evomd::DatasetRecord> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.push_back(evomd::record_from_json(py_to_json(rows[i]), "records[" + std::to_string(i) + "]"));
    return out;
}

evomd::DurationBins bins_from_edges(const std::vector<std::int64_t>& edges) {
    evomd::DurationBins bins;
    if (!edges.empty()) bins.edges = edges;
    evomd::validate_bins(bins);
    return bins;
}

// Dataset records -> model-ready samples (history/targets re-parsed).
std::vector<evomd::PredictionSample> samples_from_records(const std::vector<evomd::DatasetRecord>& records) {
    std::vector<evomd::PredictionSample> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        evomd::PredictionSample s;
        s.task = evomd::task_from_name(r.task);
        s.trajectory_id = r.trajectory_id;
        s.split = r.split;
        for (const auto& [f, d] : r.history)
            s.history.emplace_back(evomd::parse_formula(f, evomd::FormulaMode::lenient), d);
        for (const auto& [f, d] : r.targets)
            s.targets.emplace_back(evomd::parse_formula(f, evomd::FormulaMode::lenient), d);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "reactive-MD species event pipeline: extraction, filtering, datasets, baselines, metrics";

    py::register_exception<evomd::ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<evomd::StageError>(m, "StageError", PyExc_RuntimeError);

    // --- formulas -----------------------------------------------------------
    m.def(
        "canonicalize",
        [](const std::string& text, bool strict) {
            return evomd::parse_formula(text, strict ? evomd::FormulaMode::strict : evomd::FormulaMode::lenient)
                .render();
        },
        py::arg("formula"), py::arg("strict") = false,
        "Parse a molecular formula and re-render it canonically (Hill-ordered elements, count 1 omitted).");

    // --- frames -> events ----------------------------------------------------
    m.def(
        "extract_events",
        [](const std::filesystem::path& frames_path, double bo_min) {
            return events_to_py(evomd::extract_events(frames_path, evomd::BondThreshold{bo_min}));
        },
        py::arg("frames_path"), py::arg("bo_min") = 0.5,
        "Extract duration-annotated species events (RLE + lineage tracking) from a frames.jsonl file.");

    m.def(
        "read_events", [](const std::filesystem::path& path) { return events_to_py(evomd::read_events(path)); },
        py::arg("path"));
    m.def(
        "write_events",
        [](const std::filesystem::path& path, const py::list& events) {
            evomd::write_events(path, events_from_py(events));
        },
        py::arg("path"), py::arg("events"));

    // --- filtering / balancing ------------------------------------------------
    m.def(
        "bandpass_filter",
        [](const py::list& events, std::int64_t tau_min, std::int64_t tau_max) {
            return events_to_py(evomd::bandpass_filter(events_from_py(events),
                                                       evomd::FilterBand{tau_min, tau_max}));
        },
        py::arg("events"), py::arg("tau_min") = 10, py::arg("tau_max") = 500,
        "Keep events with tau_min <= duration_ps <= tau_max (inclusive band).");

    m.def(
        "balance",
        [](const py::list& events, const std::vector<std::int64_t>& bin_edges, std::int64_t cap,
           std::uint64_t seed) {
            return events_to_py(evomd::balance(events_from_py(events), bins_from_edges(bin_edges), cap, seed));
        },
        py::arg("events"), py::arg("bin_edges") = std::vector<std::int64_t>{50, 150}, py::arg("cap") = 150,
        py::arg("seed") = 0,
        "Downsample each (species, duration-bin) stratum to at most `cap` events.");

    // --- dataset construction ---------------------------------------------------
    m.def(
        "build_windows",
        [](const py::list& events, const std::string& task, int history_min, int history_max,
           std::uint64_t seed) {
            const auto sequences = evomd::group_sequences(events_from_py(events));
            evomd::WindowReport report;
            const auto samples =
                evomd::build_windows(sequences, evomd::task_from_name(task),
                                     evomd::HistoryRange{history_min, history_max}, seed, &report);
            py::dict stats;
            stats["samples"] = report.samples;
            stats["short_sequences"] = report.short_sequences;
            stats["skipped_windows"] = report.skipped_windows;
            return py::make_tuple(samples_to_py(samples), stats);
        },
        py::arg("events"), py::arg("task") = "forward_1", py::arg("history_min") = 3,
        py::arg("history_max") = 5, py::arg("seed") = 0,
        "Slide forecasting windows over event sequences; returns (samples, stats).");

    m.def(
        "split_disjoint",
        [](const py::list& samples, double test_fraction, std::uint64_t seed) {
            auto [train, test] = evomd::split_disjoint(samples_from_py(samples), test_fraction, seed);
            return py::make_tuple(samples_to_py(train), samples_to_py(test));
        },
        py::arg("samples"), py::arg("test_fraction") = 0.2, py::arg("seed") = 0,
        "Trajectory-disjoint train/test split; returns (train, test).");

    m.def(
        "format_records",
        [](const py::list& samples) {
            py::list out;
            for (const auto& r : evomd::format_records(samples_from_py(samples)))
                out.append(json_to_py(evomd::record_to_json(r)));
            return out;
        },
        py::arg("samples"), "Render samples into instruction-formatted dataset records.");

    m.def(
        "interleave_qa",
        [](const py::list& forecast, const py::list& qa_pool, double ratio, std::uint64_t seed) {
            std::vector<json> fc, qa;
            for (auto row : forecast) fc.push_back(py_to_json(row));
            for (auto row : qa_pool) qa.push_back(py_to_json(row));
            py::list out;
            for (const auto& row : evomd::interleave_qa(fc, qa, ratio, seed)) out.append(json_to_py(row));
            return out;
        },
        py::arg("forecast"), py::arg("qa_pool"), py::arg("ratio"), py::arg("seed") = 0,
        "Mix Q&A rows into a forecast dataset at qa/forecast = ratio.");

    // --- synthetic trajectories ---------------------------------------------------
    m.def(
        "generate_events",
        [](const std::filesystem::path& network_path, int trajectories, std::int64_t events_per,
           std::uint64_t seed) {
            const auto net = evomd::load_network(network_path);
            py::list out;
            for (const auto& traj : evomd::generate_corpus(net, trajectories, events_per, seed))
                for (const auto& e : traj.events) out.append(json_to_py(evomd::event_to_json(e)));
            return out;
        },
        py::arg("network_path"), py::arg("trajectories") = 20, py::arg("events_per") = 2000,
        py::arg("seed") = 0, "Sample semi-Markov event trajectories from a reaction network file.");

    m.def(
        "generate_frames",
        [](const std::filesystem::path& network_path, const std::filesystem::path& out_path,
           int trajectories, std::int64_t events_per, std::uint64_t seed) {
            const auto net = evomd::load_network(network_path);
            auto out = evomd::open_output(out_path);
            std::int64_t frames = 0, events = 0;
            for (const auto& traj : evomd::generate_corpus(net, trajectories, events_per, seed)) {
                events += static_cast<std::int64_t>(traj.events.size());
                frames += evomd::expand_to_frames(traj, net, out);
            }
            py::dict stats;
            stats["trajectories"] = trajectories;
            stats["events"] = events;
            stats["frames"] = frames;
            return stats;
        },
        py::arg("network_path"), py::arg("out_path"), py::arg("trajectories") = 20,
        py::arg("events_per") = 2000, py::arg("seed") = 0,
        "Sample trajectories and expand them to a frames.jsonl file; returns counts.");

    // --- baselines ------------------------------------------------------------------
    m.def(
        "fit_baseline",
        [](const py::list& records, const std::string& kind, int order, double alpha, double lambda,
           const std::vector<std::int64_t>& bin_edges) {
            evomd::BaselineHyperparams hp{order, alpha, lambda, bins_from_edges(bin_edges)};
            const auto model = evomd::fit(evomd::model_kind_from_name(kind),
                                          samples_from_records(records_from_py(records)), hp);
            return json_to_py(evomd::model_to_json(model));
        },
        py::arg("records"), py::arg("kind") = "markov", py::arg("order") = 1, py::arg("alpha") = 0.1,
        py::arg("lambda_") = 1e-3, py::arg("bin_edges") = std::vector<std::int64_t>{50, 150},
        "Fit a baseline on dataset records (pre-filter to one task's train split); returns the model as a dict.");

    m.def(
        "predict",
        [](const py::dict& model_dict, const py::list& records, int k) {
            const auto model = evomd::model_from_json(py_to_json(model_dict), "model");
            py::list out;
            for (const auto& r : records_from_py(records))
                out.append(json_to_py(evomd::predict_record(model, r, k)));
            return out;
        },
        py::arg("model"), py::arg("records"), py::arg("k") = 5,
        "Predict each record; returns predictions.jsonl-shaped rows.");

    // --- evaluation --------------------------------------------------------------------
    m.def(
        "parse_prediction",
        [](const std::string& text) {
            const auto p = evomd::parse_prediction(text);
            py::dict out;
            out["ok"] = p.ok;
            if (p.ok) {
                out["formula"] = p.formula.render();
                out["duration_ps"] = p.duration_ps;
            } else {
                out["failure"] = std::string(evomd::parse_failure_name(p.failure));
            }
            return out;
        },
        py::arg("text"), "Total parser for `(formula, duration)` prediction strings.");

    m.def(
        "score",
        [](const py::list& predictions, const py::list& truth_records, const std::string& task, int k,
           std::int64_t duration_tolerance_ps) {
            std::vector<evomd::PredictionEntry> entries;
            for (std::size_t i = 0; i < predictions.size(); ++i)
                entries.push_back(evomd::prediction_entry_from_json(
                    py_to_json(predictions[i]), "predictions[" + std::to_string(i) + "]"));
            const auto score = evomd::score_task(entries, records_from_py(truth_records),
                                                 evomd::task_from_name(task), k, duration_tolerance_ps);
            return json_to_py(evomd::score_to_json(score));
        },
        py::arg("predictions"), py::arg("truth_records"), py::arg("task") = "forward_1", py::arg("k") = 5,
        py::arg("duration_tolerance_ps") = 50,
        "Score prediction rows against test-split dataset records; returns the metric dict.");

    // --- templates / pipeline --------------------------------------------------------------
    m.def(
        "templates",
        [] {
            evomd::verify_template_hashes();
            py::dict out;
            auto entry = [](const char* text, const char* hash) {
                py::dict e;
                e["text"] = text;
                e["sha256"] = hash;
                return e;
            };
            out["system"] = entry(evomd::templates::kSystem, evomd::templates::kSystemSha256);
            out["forward_1"] = entry(evomd::templates::kForward1, evomd::templates::kForward1Sha256);
            out["forward_2"] = entry(evomd::templates::kForward2, evomd::templates::kForward2Sha256);
            out["backward"] = entry(evomd::templates::kBackward, evomd::templates::kBackwardSha256);
            py::dict rs;
            rs["text"] = evomd::templates::kReasoningSystem;
            out["reasoning_system"] = rs;
            py::dict ri;
            ri["text"] = evomd::templates::kReasoningInstruction;
            out["reasoning_instruction"] = ri;
            return out;
        },
        "The pinned instruction templates and their SHA-256 hashes.");

    m.def(
        "run_pipeline",
        [](const py::object& config) {
            evomd::PipelineConfig cfg;
            if (py::isinstance<py::str>(config))
                cfg = evomd::load_config(config.cast<std::string>());
            else
                cfg = evomd::config_from_json(py_to_json(config));
            return json_to_py(evomd::run_pipeline(cfg));
        },
        py::arg("config"),
        "Run the full pipeline from a config dict or a config-file path; returns the run manifest.");
}
