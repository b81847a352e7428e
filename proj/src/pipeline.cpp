#include "evomd/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include "evomd/baselines.hpp"
#include "evomd/errors.hpp"
#include "evomd/eval.hpp"
#include "evomd/jsonl.hpp"
#include "evomd/kmc.hpp"
#include "evomd/rng.hpp"
#include "evomd/sha256.hpp"
#include "evomd/templates.hpp"

namespace evomd {

using nlohmann::json;

PipelineConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    PipelineConfig c;

    if (!j.contains("out_dir") || !j["out_dir"].is_string())
        throw ValidationError("config needs a string \"out_dir\"");
    c.out_dir = j["out_dir"].get<std::string>();

    if (j.contains("network")) c.network = std::filesystem::path(j["network"].get<std::string>());
    if (j.contains("frames")) c.frames = std::filesystem::path(j["frames"].get<std::string>());
    c.trajectories = j.value("trajectories", c.trajectories);
    c.events_per_trajectory = j.value("events_per_trajectory", c.events_per_trajectory);
    c.emit_frames = j.value("emit_frames", c.emit_frames);

    c.bo_min = j.value("bo_min", c.bo_min);
    c.band.tau_min_ps = j.value("tau_min", c.band.tau_min_ps);
    c.band.tau_max_ps = j.value("tau_max", c.band.tau_max_ps);
    if (j.contains("bin_edges")) c.bins.edges = j["bin_edges"].get<std::vector<std::int64_t>>();
    c.cap = j.value("cap", c.cap);
    c.history.min_len = j.value("history_min", c.history.min_len);
    c.history.max_len = j.value("history_max", c.history.max_len);
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    if (j.contains("tasks")) c.tasks = j["tasks"].get<std::vector<std::string>>();

    if (j.contains("qa")) c.qa = std::filesystem::path(j["qa"].get<std::string>());
    c.qa_ratio = j.value("qa_ratio", c.qa_ratio);

    c.baseline = j.value("baseline", c.baseline);
    c.order = j.value("order", c.order);
    c.alpha = j.value("alpha", c.alpha);
    c.lambda = j.value("lambda", c.lambda);

    c.k = j.value("k", c.k);
    c.duration_tolerance_ps = j.value("duration_tolerance_ps", c.duration_tolerance_ps);
    if (j.contains("seed")) {
        c.seed = j["seed"].get<std::uint64_t>();
    } else if (const char* env = std::getenv("EVOMD_SEED")) {
        try {
            c.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ValidationError("EVOMD_SEED must be an unsigned integer, got \"" + std::string(env) + "\"");
        }
    }
    c.threads = j.value("threads", c.threads);

    validate_config(c);
    return c;
}

json config_to_json(const PipelineConfig& c) {
    json j;
    j["out_dir"] = c.out_dir.string();
    if (c.network) j["network"] = c.network->string();
    if (c.frames) j["frames"] = c.frames->string();
    j["trajectories"] = c.trajectories;
    j["events_per_trajectory"] = c.events_per_trajectory;
    j["emit_frames"] = c.emit_frames;
    j["bo_min"] = c.bo_min;
    j["tau_min"] = c.band.tau_min_ps;
    j["tau_max"] = c.band.tau_max_ps;
    j["bin_edges"] = c.bins.edges;
    j["cap"] = c.cap;
    j["history_min"] = c.history.min_len;
    j["history_max"] = c.history.max_len;
    j["test_fraction"] = c.test_fraction;
    j["tasks"] = c.tasks;
    if (c.qa) j["qa"] = c.qa->string();
    j["qa_ratio"] = c.qa_ratio;
    j["baseline"] = c.baseline;
    j["order"] = c.order;
    j["alpha"] = c.alpha;
    j["lambda"] = c.lambda;
    j["k"] = c.k;
    j["duration_tolerance_ps"] = c.duration_tolerance_ps;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    return j;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed JSON: " + e.what());
    }
    return config_from_json(j);
}

void validate_config(const PipelineConfig& c) {
    if (c.out_dir.empty()) throw ValidationError("out_dir must not be empty");
    if (c.network.has_value() == c.frames.has_value())
        throw ValidationError("exactly one of \"network\" / \"frames\" must be given");
    if (c.network) {
        if (c.trajectories < 2)
            throw ValidationError("trajectories must be >= 2 (the split needs at least 2)");
        if (c.events_per_trajectory < 1) throw ValidationError("events_per_trajectory must be positive");
    }
    if (!(c.bo_min > 0.0)) throw ValidationError("bo_min must be positive");
    validate_band(c.band);
    validate_bins(c.bins);
    if (c.cap < 1) throw ValidationError("cap must be positive");
    if (c.history.min_len < 1 || c.history.min_len > c.history.max_len)
        throw ValidationError("history range must satisfy 1 <= min <= max");
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
        throw ValidationError("test_fraction must lie in (0,1)");
    if (c.tasks.empty()) throw ValidationError("tasks must not be empty");
    std::set<std::string> seen;
    for (const auto& t : c.tasks) {
        task_from_name(t);  // throws on unknown names
        if (!seen.insert(t).second) throw ValidationError("duplicate task " + t);
    }
    if (c.qa_ratio < 0.0) throw ValidationError("qa_ratio must be >= 0");
    if (c.qa_ratio > 0.0 && !c.qa) throw ValidationError("qa_ratio > 0 needs a \"qa\" pool path");
    model_kind_from_name(c.baseline);
    if (c.order < 1) throw ValidationError("order must be >= 1");
    if (!(c.alpha > 0.0)) throw ValidationError("alpha must be positive");
    if (c.lambda < 0.0) throw ValidationError("lambda must be >= 0");
    if (c.k < 1) throw ValidationError("k must be >= 1");
    if (c.duration_tolerance_ps < 0) throw ValidationError("duration_tolerance_ps must be >= 0");
    if (c.threads < 1) throw ValidationError("threads must be >= 1");
}

namespace {

// Seed streams, one per randomized stage.
enum SeedStream : std::uint64_t {
    kSimulateStream = 100,
    kBalanceStream = 200,
    kWindowStreamBase = 300,  // + task index
    kSplitStream = 400,
    kMixStream = 500,
};

struct StageRunner {
    const PipelineConfig& config;
    std::filesystem::path manifest_path;
    json manifest;

    explicit StageRunner(const PipelineConfig& c) : config(c) {
        manifest_path = c.out_dir / "manifest.json";
        std::filesystem::create_directories(c.out_dir);
        if (std::filesystem::exists(manifest_path)) {
            std::ifstream in(manifest_path);
            try {
                manifest = json::parse(in);
            } catch (const json::exception&) {
                manifest = json::object();  // unreadable manifest: rebuild everything
            }
        }
        if (!manifest.is_object()) manifest = json::object();
        if (!manifest.contains("stages") || !manifest["stages"].is_object())
            manifest["stages"] = json::object();
        manifest["format_version"] = 1;
        manifest["root_seed"] = config.seed;
        manifest["config"] = config_to_json(config);
        manifest["template_hashes"] = json{{"system", templates::kSystemSha256},
                                           {"forward_1", templates::kForward1Sha256},
                                           {"forward_2", templates::kForward2Sha256},
                                           {"backward", templates::kBackwardSha256}};
    }

    void persist() {
        auto out = open_output(manifest_path);
        out << manifest.dump(2) << '\n';
    }

    std::filesystem::path path_of(const std::string& name) const { return config.out_dir / name; }

    // A stage can be skipped when its recorded signature matches and every
    // recorded output file still hashes to the recorded value.
    bool can_skip(const std::string& stage, const std::string& signature) const {
        const auto& stages = manifest["stages"];
        if (!stages.contains(stage)) return false;
        const auto& entry = stages[stage];
        if (entry.value("status", "") != "ok" || entry.value("signature", "") != signature) return false;
        if (!entry.contains("outputs") || !entry["outputs"].is_object()) return false;
        for (const auto& [name, hash] : entry["outputs"].items()) {
            const auto p = path_of(name);
            if (!std::filesystem::exists(p) || sha256_file_hex(p) != hash.get<std::string>()) return false;
        }
        return true;
    }

    // Runs `body` unless the stage is current. body returns the stage's
    // metadata (counts etc); outputs are hashed afterwards.
    template <typename Body>
    void stage(const std::string& name, const json& signature_material,
               const std::vector<std::string>& outputs, Body&& body) {
        const std::string signature = sha256_hex(signature_material.dump());
        if (can_skip(name, signature)) return;

        manifest["stages"][name] = json{{"status", "invalid"}, {"signature", signature}};
        persist();

        json meta;
        try {
            meta = body();
        } catch (const ValidationError& e) {
            persist();
            throw ValidationError(name + ": " + e.what());
        } catch (const std::exception& e) {
            persist();
            throw StageError(name, e.what());
        }

        json output_hashes = json::object();
        for (const auto& out_name : outputs) output_hashes[out_name] = sha256_file_hex(path_of(out_name));
        manifest["stages"][name] =
            json{{"status", "ok"}, {"signature", signature}, {"outputs", output_hashes}, {"meta", meta}};
        persist();
    }

    void mark_not_applicable(const std::string& name) {
        manifest["stages"][name] = json{{"status", "not_applicable"}};
    }
};

std::string file_hash(const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) throw ValidationError("input file does not exist: " + p.string());
    return sha256_file_hex(p);
}

}  // namespace

json run_pipeline(const PipelineConfig& config) {
    validate_config(config);
    verify_template_hashes();

    StageRunner runner(config);
    const auto& cfg = config;

    // --- simulate ---------------------------------------------------------
    const bool simulated = cfg.network.has_value();
    const std::string frames_name = "frames.jsonl";
    const std::string raw_events_name = "events_raw.jsonl";
    if (simulated) {
        const std::string out_name = cfg.emit_frames ? frames_name : raw_events_name;
        runner.stage("simulate",
                     json{{"network", file_hash(*cfg.network)},
                          {"trajectories", cfg.trajectories},
                          {"events_per_trajectory", cfg.events_per_trajectory},
                          {"emit_frames", cfg.emit_frames},
                          {"seed", derive_seed(cfg.seed, kSimulateStream)}},
                     {out_name}, [&] {
                         const auto net = load_network(*cfg.network);
                         auto corpus = generate_corpus(net, cfg.trajectories, cfg.events_per_trajectory,
                                                       derive_seed(cfg.seed, kSimulateStream));
                         std::int64_t frames = 0, events = 0;
                         auto out = open_output(runner.path_of(out_name));
                         for (const auto& traj : corpus) {
                             events += static_cast<std::int64_t>(traj.events.size());
                             if (cfg.emit_frames)
                                 frames += expand_to_frames(traj, net, out);
                             else
                                 for (const auto& e : traj.events) write_event(out, e);
                         }
                         return json{{"trajectories", corpus.size()}, {"events", events}, {"frames", frames}};
                     });
    } else {
        runner.mark_not_applicable("simulate");
    }

    // --- extract ----------------------------------------------------------
    const bool have_frames = !simulated || cfg.emit_frames;
    const std::filesystem::path frames_path = simulated ? runner.path_of(frames_name) : *cfg.frames;
    if (have_frames) {
        runner.stage("extract", json{{"frames", file_hash(frames_path)}, {"bo_min", cfg.bo_min}},
                     {raw_events_name}, [&] {
                         auto events = extract_events(frames_path, BondThreshold{cfg.bo_min});
                         write_events(runner.path_of(raw_events_name), events);
                         return json{{"events", events.size()}};
                     });
    } else {
        runner.mark_not_applicable("extract");
    }

    // --- filter -----------------------------------------------------------
    const std::string filtered_name = "events_filtered.jsonl";
    const std::string filter_stats_name = "filter_stats.json";
    runner.stage("filter",
                 json{{"events", file_hash(runner.path_of(raw_events_name))},
                      {"tau_min", cfg.band.tau_min_ps},
                      {"tau_max", cfg.band.tau_max_ps}},
                 {filtered_name, filter_stats_name}, [&] {
                     const auto raw = read_events(runner.path_of(raw_events_name));
                     const auto filtered = bandpass_filter(raw, cfg.band);
                     write_events(runner.path_of(filtered_name), filtered);
                     // low-cut survivor count mirrors the noise-removal stage
                     std::int64_t low_cut = 0;
                     for (const auto& e : raw)
                         if (e.duration_ps >= cfg.band.tau_min_ps) ++low_cut;
                     StageCounts counts{static_cast<std::int64_t>(raw.size()), low_cut,
                                        static_cast<std::int64_t>(filtered.size()), 0};
                     auto stats = open_output(runner.path_of(filter_stats_name));
                     stats << stage_report_json(make_stage_report(counts, filtered)) << '\n';
                     return json{{"raw_events", raw.size()},
                                 {"low_cut_survivors", low_cut},
                                 {"filtered_events", filtered.size()}};
                 });

    // --- balance ----------------------------------------------------------
    const std::string balanced_name = "events_balanced.jsonl";
    runner.stage("balance",
                 json{{"events", file_hash(runner.path_of(filtered_name))},
                      {"bin_edges", cfg.bins.edges},
                      {"cap", cfg.cap},
                      {"seed", derive_seed(cfg.seed, kBalanceStream)}},
                 {balanced_name}, [&] {
                     const auto filtered = read_events(runner.path_of(filtered_name));
                     const auto balanced =
                         balance(filtered, cfg.bins, cfg.cap, derive_seed(cfg.seed, kBalanceStream));
                     write_events(runner.path_of(balanced_name), balanced);
                     json strata = json::object();
                     for (const auto& [key, count] : stratum_counts(balanced, cfg.bins)) strata[key] = count;
                     return json{{"balanced_events", balanced.size()}, {"strata", strata}};
                 });

    // --- dataset (windows + split + format) --------------------------------
    const std::string dataset_name = "dataset.jsonl";
    runner.stage("dataset",
                 json{{"events", file_hash(runner.path_of(balanced_name))},
                      {"history_min", cfg.history.min_len},
                      {"history_max", cfg.history.max_len},
                      {"tasks", cfg.tasks},
                      {"test_fraction", cfg.test_fraction},
                      {"seed", cfg.seed}},
                 {dataset_name}, [&] {
                     const auto balanced = read_events(runner.path_of(balanced_name));
                     const auto sequences = group_sequences(balanced);
                     std::vector<PredictionSample> samples;
                     json window_reports = json::object();
                     for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
                         WindowReport wr;
                         auto task_samples = build_windows(sequences, task_from_name(cfg.tasks[t]),
                                                           cfg.history, derive_seed(cfg.seed, kWindowStreamBase + t),
                                                           &wr);
                         window_reports[cfg.tasks[t]] = json{{"samples", wr.samples},
                                                             {"short_sequences", wr.short_sequences},
                                                             {"skipped_windows", wr.skipped_windows}};
                         samples.insert(samples.end(), std::make_move_iterator(task_samples.begin()),
                                        std::make_move_iterator(task_samples.end()));
                     }
                     // one split over all tasks, so every task shares the same
                     // trajectory partition
                     auto [train, test] =
                         split_disjoint(std::move(samples), cfg.test_fraction, derive_seed(cfg.seed, kSplitStream));
                     std::vector<DatasetRecord> records = format_records(train);
                     auto test_records = format_records(test);
                     records.insert(records.end(), std::make_move_iterator(test_records.begin()),
                                    std::make_move_iterator(test_records.end()));
                     write_dataset(runner.path_of(dataset_name), records);

                     json counts = json::object();
                     for (const auto& r : records) {
                         auto& task_counts = counts[r.task];
                         if (!task_counts.is_object()) task_counts = json::object();
                         task_counts[r.split] = task_counts.value(r.split, 0) + 1;
                     }
                     return json{{"records", records.size()},
                                 {"windows", window_reports},
                                 {"counts", counts}};
                 });

    // --- mix ---------------------------------------------------------------
    const std::string mixed_name = "mixed.jsonl";
    if (cfg.qa && cfg.qa_ratio > 0.0) {
        runner.stage("mix",
                     json{{"dataset", file_hash(runner.path_of(dataset_name))},
                          {"qa", file_hash(*cfg.qa)},
                          {"ratio", cfg.qa_ratio},
                          {"seed", derive_seed(cfg.seed, kMixStream)}},
                     {mixed_name}, [&] {
                         std::vector<json> train_rows;
                         for (auto& row : read_jsonl(runner.path_of(dataset_name)))
                             if (row.value("split", "") == "train") train_rows.push_back(std::move(row));
                         const auto qa_pool = read_jsonl(*cfg.qa);
                         const auto mixed =
                             interleave_qa(train_rows, qa_pool, cfg.qa_ratio, derive_seed(cfg.seed, kMixStream));
                         write_jsonl(runner.path_of(mixed_name), mixed);
                         return json{{"forecast_records", train_rows.size()},
                                     {"qa_records", mixed.size() - train_rows.size()},
                                     {"total", mixed.size()}};
                     });
    } else {
        runner.mark_not_applicable("mix");
    }

    // --- fit ----------------------------------------------------------------
    const std::string forward_model_name = "model_forward.json";
    const std::string backward_model_name = "model_backward.json";
    const bool want_backward =
        std::find(cfg.tasks.begin(), cfg.tasks.end(), "backward") != cfg.tasks.end();
    // the forward model trains on the first forward-direction task's train split
    std::string forward_fit_task;
    for (const auto& t : cfg.tasks)
        if (t != "backward") {
            forward_fit_task = t;
            break;
        }

    const BaselineHyperparams hp{cfg.order, cfg.alpha, cfg.lambda, cfg.bins};
    const ModelKind kind = model_kind_from_name(cfg.baseline);

    // Model-ready train samples for one task (sample ids are irrelevant to fit).
    auto load_train_samples = [&](const std::string& task) {
        std::vector<PredictionSample> out;
        for (const auto& r : read_dataset(runner.path_of(dataset_name))) {
            if (r.task != task || r.split != "train") continue;
            PredictionSample s;
            s.task = task_from_name(r.task);
            s.trajectory_id = r.trajectory_id;
            s.split = r.split;
            for (const auto& [f, d] : r.history)
                s.history.emplace_back(parse_formula(f, FormulaMode::lenient), d);
            for (const auto& [f, d] : r.targets)
                s.targets.emplace_back(parse_formula(f, FormulaMode::lenient), d);
            out.push_back(std::move(s));
        }
        return out;
    };

    {
        std::vector<std::string> outputs;
        if (!forward_fit_task.empty()) outputs.push_back(forward_model_name);
        if (want_backward) outputs.push_back(backward_model_name);
        runner.stage("fit",
                     json{{"dataset", file_hash(runner.path_of(dataset_name))},
                          {"kind", cfg.baseline},
                          {"order", cfg.order},
                          {"alpha", cfg.alpha},
                          {"lambda", cfg.lambda},
                          {"bin_edges", cfg.bins.edges},
                          {"forward_fit_task", forward_fit_task},
                          {"backward", want_backward}},
                     outputs, [&] {
                         json meta = json::object();
                         if (!forward_fit_task.empty()) {
                             auto train = load_train_samples(forward_fit_task);
                             auto model = fit(kind, train, hp);
                             save_model(runner.path_of(forward_model_name), model);
                             meta["forward_train_samples"] = train.size();
                             meta["vocabulary"] = model.vocabulary.size();
                         }
                         if (want_backward) {
                             auto train = load_train_samples("backward");
                             auto model = fit(kind, train, hp);
                             save_model(runner.path_of(backward_model_name), model);
                             meta["backward_train_samples"] = train.size();
                         }
                         return meta;
                     });
    }

    // --- predict -------------------------------------------------------------
    auto predictions_name = [](const std::string& task) { return "predictions_" + task + ".jsonl"; };
    {
        std::vector<std::string> outputs;
        for (const auto& t : cfg.tasks) outputs.push_back(predictions_name(t));
        json sig{{"dataset", file_hash(runner.path_of(dataset_name))}, {"k", cfg.k}, {"tasks", cfg.tasks}};
        if (!forward_fit_task.empty()) sig["forward_model"] = file_hash(runner.path_of(forward_model_name));
        if (want_backward) sig["backward_model"] = file_hash(runner.path_of(backward_model_name));
        runner.stage("predict", sig, outputs, [&] {
            json meta = json::object();
            std::optional<BaselineModel> forward_model, backward_model;
            if (!forward_fit_task.empty()) forward_model = load_model(runner.path_of(forward_model_name));
            if (want_backward) backward_model = load_model(runner.path_of(backward_model_name));

            const auto records = read_dataset(runner.path_of(dataset_name));
            for (const auto& task_str : cfg.tasks) {
                const auto& model = task_str == "backward" ? *backward_model : *forward_model;
                auto out = open_output(runner.path_of(predictions_name(task_str)));
                std::int64_t n = 0;
                for (const auto& r : records) {
                    if (r.task != task_str || r.split != "test") continue;
                    out << predict_record(model, r, cfg.k).dump() << '\n';
                    ++n;
                }
                meta[task_str] = n;
            }
            return meta;
        });
    }

    // --- eval -----------------------------------------------------------------
    {
        json sig{{"dataset", file_hash(runner.path_of(dataset_name))},
                 {"k", cfg.k},
                 {"duration_tolerance_ps", cfg.duration_tolerance_ps},
                 {"tasks", cfg.tasks}};
        for (const auto& t : cfg.tasks) sig["predictions_" + t] = file_hash(runner.path_of(predictions_name(t)));
        runner.stage("eval", sig,
                     {"report/report.json", "report/confusion.csv", "report/nstep_decay.csv",
                      "report/error_taxonomy.csv", "report/summary.txt"},
                     [&] {
                         const auto records = read_dataset(runner.path_of(dataset_name));
                         EvalReport report;
                         report.k = cfg.k;
                         report.duration_tolerance_ps = cfg.duration_tolerance_ps;
                         for (const auto& task_str : cfg.tasks) {
                             std::vector<DatasetRecord> truth;
                             for (const auto& r : records)
                                 if (r.task == task_str && r.split == "test") truth.push_back(r);
                             const auto entries = read_predictions(runner.path_of(predictions_name(task_str)));
                             report.tasks.push_back(score_task(entries, truth, task_from_name(task_str),
                                                               cfg.k, cfg.duration_tolerance_ps));
                         }
                         const auto summary = emit_report(report, runner.path_of("report"));
                         auto out = open_output(runner.path_of("report/summary.txt"));
                         out << summary;
                         json meta = json::object();
                         for (const auto& s : report.tasks)
                             meta[s.task] = json{{"accuracy_pct", s.accuracy_pct},
                                                 {"missing_rate_pct", s.missing_rate_pct}};
                         return meta;
                     });
    }

    // Appendix-A style stage counts, assembled from whichever stages ran.
    {
        const auto& stages = runner.manifest["stages"];
        json counts = json::object();
        if (stages.contains("filter") && stages["filter"].contains("meta")) {
            counts["raw_events"] = stages["filter"]["meta"].value("raw_events", 0);
            counts["low_cut_survivors"] = stages["filter"]["meta"].value("low_cut_survivors", 0);
            counts["filtered_events"] = stages["filter"]["meta"].value("filtered_events", 0);
        }
        if (stages.contains("balance") && stages["balance"].contains("meta"))
            counts["balanced_events"] = stages["balance"]["meta"].value("balanced_events", 0);
        if (stages.contains("dataset") && stages["dataset"].contains("meta"))
            counts["dataset_records"] = stages["dataset"]["meta"].value("records", 0);
        runner.manifest["counts"] = counts;
        runner.persist();
    }

    return runner.manifest;
}

}  // namespace evomd
