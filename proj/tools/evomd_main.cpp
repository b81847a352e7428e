// evomd — command-line front end.
//
// One subcommand per pipeline stage plus `run --config` for the whole chain.
// Exit codes: 0 success, 2 validation error (bad flags or bad input data),
// 3 stage failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "evomd/baselines.hpp"
#include "evomd/dataset.hpp"
#include "evomd/errors.hpp"
#include "evomd/eval.hpp"
#include "evomd/events.hpp"
#include "evomd/frames.hpp"
#include "evomd/jsonl.hpp"
#include "evomd/kmc.hpp"
#include "evomd/pipeline.hpp"
#include "evomd/sha256.hpp"
#include "evomd/templates.hpp"

namespace {

using nlohmann::json;

// --seed definition shared by the seeded subcommands: explicit flag, else the
// EVOMD_SEED environment variable, else 0.
void add_seed_option(CLI::App* cmd, std::uint64_t& seed) {
    cmd->add_option("--seed", seed, "root seed")->envname("EVOMD_SEED")->capture_default_str();
}

evomd::DurationBins bins_from(const std::vector<std::int64_t>& edges) {
    evomd::DurationBins bins;
    if (!edges.empty()) bins.edges = edges;
    evomd::validate_bins(bins);
    return bins;
}

void add_ingest(CLI::App& app) {
    auto* cmd = app.add_subcommand("ingest", "validate a frames file and write per-trajectory manifests");
    auto frames = std::make_shared<std::string>();
    auto bo_min = std::make_shared<double>(0.5);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--frames", *frames, "frames.jsonl")->required();
    cmd->add_option("--bo-min", *bo_min, "bond-order threshold (exclusive)")->capture_default_str();
    cmd->add_option("--out", *out, "manifest JSON path")->required();
    cmd->callback([=] {
        const auto all = evomd::read_frames(*frames, evomd::BondThreshold{*bo_min});
        // group by trajectory in first-appearance order; frames may interleave
        std::vector<std::string> order;
        std::map<std::string, std::vector<evomd::Frame>> groups;
        for (const auto& f : all) {
            if (!groups.count(f.trajectory_id)) order.push_back(f.trajectory_id);
            groups[f.trajectory_id].push_back(f);
        }
        json manifests = json::array();
        for (const auto& id : order) {
            const auto m = evomd::validate_trajectory(groups[id]);
            manifests.push_back(json{{"trajectory_id", m.trajectory_id},
                                     {"frame_count", m.frame_count},
                                     {"interval_ps", m.interval_ps},
                                     {"atom_count", m.atom_count}});
        }
        auto os = evomd::open_output(*out);
        os << json{{"bo_min", *bo_min}, {"trajectories", manifests}}.dump(2) << '\n';
        std::cout << "ingest: " << order.size() << " trajectories, " << all.size() << " frames\n";
    });
}

void add_extract(CLI::App& app) {
    auto* cmd = app.add_subcommand("extract", "frames -> duration-annotated species events (RLE + lineages)");
    auto frames = std::make_shared<std::string>();
    auto bo_min = std::make_shared<double>(0.5);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--frames", *frames, "frames.jsonl")->required();
    cmd->add_option("--bo-min", *bo_min, "bond-order threshold (exclusive)")->capture_default_str();
    cmd->add_option("--out", *out, "events.jsonl")->required();
    cmd->callback([=] {
        const auto events = evomd::extract_events(*frames, evomd::BondThreshold{*bo_min});
        evomd::write_events(*out, events);
        std::cout << "extract: " << events.size() << " events\n";
    });
}

void add_filter(CLI::App& app) {
    auto* cmd = app.add_subcommand("filter", "band-pass events by duration");
    auto events = std::make_shared<std::string>();
    auto band = std::make_shared<evomd::FilterBand>();
    auto out = std::make_shared<std::string>();
    auto stats = std::make_shared<std::string>();
    cmd->add_option("--events", *events, "events.jsonl")->required();
    cmd->add_option("--tau-min", band->tau_min_ps, "lower cutoff, ps (inclusive)")->capture_default_str();
    cmd->add_option("--tau-max", band->tau_max_ps, "upper cutoff, ps (inclusive)")->capture_default_str();
    cmd->add_option("--out", *out, "filtered events.jsonl")->required();
    cmd->add_option("--stats", *stats, "stage-report JSON path (optional)");
    cmd->callback([=] {
        const auto raw = evomd::read_events(*events);
        const auto filtered = evomd::bandpass_filter(raw, *band);
        evomd::write_events(*out, filtered);
        if (!stats->empty()) {
            std::int64_t low_cut = 0;
            for (const auto& e : raw)
                if (e.duration_ps >= band->tau_min_ps) ++low_cut;
            evomd::StageCounts counts{static_cast<std::int64_t>(raw.size()), low_cut,
                                      static_cast<std::int64_t>(filtered.size()), 0};
            auto os = evomd::open_output(*stats);
            os << evomd::stage_report_json(evomd::make_stage_report(counts, filtered)) << '\n';
        }
        std::cout << "filter: " << filtered.size() << " of " << raw.size() << " events kept\n";
    });
}

void add_balance(CLI::App& app) {
    auto* cmd = app.add_subcommand("balance", "cap each (species, duration-bin) stratum by downsampling");
    auto events = std::make_shared<std::string>();
    auto edges = std::make_shared<std::vector<std::int64_t>>();
    auto cap = std::make_shared<std::int64_t>(150);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--events", *events, "filtered events.jsonl")->required();
    cmd->add_option("--bin-edges", *edges, "duration bin edges, ps")->delimiter(',');
    cmd->add_option("--cap", *cap, "max events per stratum")->capture_default_str();
    add_seed_option(cmd, *seed);
    cmd->add_option("--out", *out, "balanced events.jsonl")->required();
    cmd->callback([=] {
        const auto bins = bins_from(*edges);
        const auto input = evomd::read_events(*events);
        const auto balanced = evomd::balance(input, bins, *cap, *seed);
        evomd::write_events(*out, balanced);
        std::cout << "balance: " << balanced.size() << " of " << input.size() << " events kept\n";
    });
}

void add_windows(CLI::App& app) {
    auto* cmd = app.add_subcommand("windows", "slide forecasting windows over event sequences");
    auto events = std::make_shared<std::string>();
    auto task = std::make_shared<std::string>("forward_1");
    auto range = std::make_shared<evomd::HistoryRange>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--events", *events, "balanced events.jsonl")->required();
    cmd->add_option("--task", *task, "forward_1|forward_2|backward|potential_k")->capture_default_str();
    cmd->add_option("--history-min", range->min_len, "min history length")->capture_default_str();
    cmd->add_option("--history-max", range->max_len, "max history length")->capture_default_str();
    add_seed_option(cmd, *seed);
    cmd->add_option("--out", *out, "samples.jsonl")->required();
    cmd->callback([=] {
        const auto sequences = evomd::group_sequences(evomd::read_events(*events));
        evomd::WindowReport report;
        const auto samples =
            evomd::build_windows(sequences, evomd::task_from_name(*task), *range, *seed, &report);
        evomd::write_samples(*out, samples);
        std::cout << "windows: " << report.samples << " samples (" << report.short_sequences
                  << " sequences too short, " << report.skipped_windows << " windows skipped)\n";
    });
}

void add_split(CLI::App& app) {
    auto* cmd = app.add_subcommand("split", "trajectory-disjoint train/test split");
    auto samples_path = std::make_shared<std::string>();
    auto frac = std::make_shared<double>(0.2);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--samples", *samples_path, "samples.jsonl")->required();
    cmd->add_option("--test-frac", *frac, "test trajectory fraction")->capture_default_str();
    add_seed_option(cmd, *seed);
    cmd->add_option("--out", *out, "split samples.jsonl")->required();
    cmd->callback([=] {
        auto samples = evomd::read_samples(*samples_path);
        auto [train, test] = evomd::split_disjoint(std::move(samples), *frac, *seed);
        const auto n_train = train.size(), n_test = test.size();
        train.insert(train.end(), std::make_move_iterator(test.begin()), std::make_move_iterator(test.end()));
        evomd::write_samples(*out, train);
        std::cout << "split: " << n_train << " train / " << n_test << " test samples\n";
    });
}

void add_format(CLI::App& app) {
    auto* cmd = app.add_subcommand("format", "render samples into instruction-formatted dataset records");
    auto samples_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--samples", *samples_path, "split samples.jsonl")->required();
    cmd->add_option("--out", *out, "dataset.jsonl")->required();
    cmd->callback([=] {
        const auto samples = evomd::read_samples(*samples_path);
        for (const auto& s : samples)
            if (s.split.empty())
                throw evomd::ValidationError("sample " + s.sample_id() + " has no split; run `evomd split` first");
        evomd::write_dataset(*out, evomd::format_records(samples));
        std::cout << "format: " << samples.size() << " records\n";
    });
}

void add_mix(CLI::App& app) {
    auto* cmd = app.add_subcommand("mix", "interleave Q&A rows into a forecast dataset");
    auto data = std::make_shared<std::string>();
    auto qa = std::make_shared<std::string>();
    auto ratio = std::make_shared<double>(0.0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--data", *data, "forecast dataset.jsonl")->required();
    cmd->add_option("--qa", *qa, "Q&A pool jsonl")->required();
    cmd->add_option("--ratio", *ratio, "qa records per forecast record")->required();
    add_seed_option(cmd, *seed);
    cmd->add_option("--out", *out, "mixed.jsonl")->required();
    cmd->callback([=] {
        const auto forecast = evomd::read_jsonl(*data);
        const auto pool = evomd::read_jsonl(*qa);
        const auto mixed = evomd::interleave_qa(forecast, pool, *ratio, *seed);
        evomd::write_jsonl(*out, mixed);
        std::cout << "mix: " << mixed.size() << " records (" << mixed.size() - forecast.size()
                  << " qa)\n";
    });
}

void add_simulate(CLI::App& app) {
    auto* cmd = app.add_subcommand("simulate", "generate synthetic trajectories from a reaction network");
    auto network = std::make_shared<std::string>();
    auto trajectories = std::make_shared<int>(20);
    auto events_per = std::make_shared<std::int64_t>(2000);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out = std::make_shared<std::string>();
    auto emit = std::make_shared<std::string>("frames");
    cmd->add_option("--network", *network, "network.json")->required();
    cmd->add_option("--trajectories", *trajectories, "trajectory count")->capture_default_str();
    cmd->add_option("--events-per", *events_per, "events per trajectory")->capture_default_str();
    add_seed_option(cmd, *seed);
    cmd->add_option("--out", *out, "frames.jsonl or events.jsonl")->required();
    cmd->add_option("--emit", *emit, "frames|events")
        ->check(CLI::IsMember({"frames", "events"}))
        ->capture_default_str();
    cmd->callback([=] {
        const auto net = evomd::load_network(*network);
        const auto corpus = evomd::generate_corpus(net, *trajectories, *events_per, *seed);
        auto os = evomd::open_output(*out);
        std::int64_t events = 0, frames = 0;
        for (const auto& traj : corpus) {
            events += static_cast<std::int64_t>(traj.events.size());
            if (*emit == "frames")
                frames += evomd::expand_to_frames(traj, net, os);
            else
                for (const auto& e : traj.events) evomd::write_event(os, e);
        }
        std::cout << "simulate: " << corpus.size() << " trajectories, " << events << " events";
        if (*emit == "frames") std::cout << ", " << frames << " frames";
        std::cout << '\n';
    });
}

void add_baseline(CLI::App& app) {
    auto* cmd = app.add_subcommand("baseline", "statistical baseline models");
    cmd->require_subcommand(1);

    auto* fit_cmd = cmd->add_subcommand("fit", "fit a baseline on a dataset's train split");
    {
        auto train = std::make_shared<std::string>();
        auto task = std::make_shared<std::string>("forward_1");
        auto kind = std::make_shared<std::string>("markov");
        auto order = std::make_shared<int>(1);
        auto alpha = std::make_shared<double>(0.1);
        auto lambda = std::make_shared<double>(1e-3);
        auto edges = std::make_shared<std::vector<std::int64_t>>();
        auto out = std::make_shared<std::string>();
        fit_cmd->add_option("--train", *train, "dataset.jsonl")->required();
        fit_cmd->add_option("--task", *task, "task whose train split to fit on")->capture_default_str();
        fit_cmd->add_option("--kind", *kind, "freq|markov|semimarkov|regressor")->capture_default_str();
        fit_cmd->add_option("--order", *order, "context length")->capture_default_str();
        fit_cmd->add_option("--alpha", *alpha, "additive smoothing")->capture_default_str();
        fit_cmd->add_option("--lambda", *lambda, "ridge penalty")->capture_default_str();
        fit_cmd->add_option("--bin-edges", *edges, "duration bin edges, ps")->delimiter(',');
        fit_cmd->add_option("--out", *out, "model JSON path")->required();
        fit_cmd->callback([=] {
            const evomd::Task t = evomd::task_from_name(*task);
            const std::string canonical_task{evomd::task_name(t)};
            std::vector<evomd::PredictionSample> samples;
            for (const auto& r : evomd::read_dataset(*train)) {
                if (r.task != canonical_task || r.split != "train") continue;
                evomd::PredictionSample s;
                s.task = t;
                s.trajectory_id = r.trajectory_id;
                s.split = r.split;
                for (const auto& [f, d] : r.history)
                    s.history.emplace_back(evomd::parse_formula(f, evomd::FormulaMode::lenient), d);
                for (const auto& [f, d] : r.targets)
                    s.targets.emplace_back(evomd::parse_formula(f, evomd::FormulaMode::lenient), d);
                samples.push_back(std::move(s));
            }
            evomd::BaselineHyperparams hp{*order, *alpha, *lambda, bins_from(*edges)};
            const auto model = evomd::fit(evomd::model_kind_from_name(*kind), samples, hp);
            evomd::save_model(*out, model);
            std::cout << "fit: " << samples.size() << " samples, vocabulary " << model.vocabulary.size()
                      << '\n';
        });
    }

    auto* predict_cmd = cmd->add_subcommand("predict", "emit predictions.jsonl for a dataset's test split");
    {
        auto model_path = std::make_shared<std::string>();
        auto data = std::make_shared<std::string>();
        auto task = std::make_shared<std::string>("forward_1");
        auto split = std::make_shared<std::string>("test");
        auto k = std::make_shared<int>(5);
        auto out = std::make_shared<std::string>();
        predict_cmd->add_option("--model", *model_path, "model JSON path")->required();
        predict_cmd->add_option("--data", *data, "dataset.jsonl")->required();
        predict_cmd->add_option("--task", *task, "task to predict")->capture_default_str();
        predict_cmd->add_option("--split", *split, "dataset split to predict on")->capture_default_str();
        predict_cmd->add_option("--k", *k, "candidate count for potential_k")->capture_default_str();
        predict_cmd->add_option("--out", *out, "predictions.jsonl")->required();
        predict_cmd->callback([=] {
            const auto model = evomd::load_model(*model_path);
            const std::string canonical_task{evomd::task_name(evomd::task_from_name(*task))};
            auto os = evomd::open_output(*out);
            std::int64_t n = 0;
            for (const auto& r : evomd::read_dataset(*data)) {
                if (r.task != canonical_task || r.split != *split) continue;
                os << evomd::predict_record(model, r, *k).dump() << '\n';
                ++n;
            }
            std::cout << "predict: " << n << " predictions\n";
        });
    }
}

void add_eval(CLI::App& app) {
    auto* cmd = app.add_subcommand("eval", "score predictions against a dataset's test split");
    auto task = std::make_shared<std::string>("forward_1");
    auto pred = std::make_shared<std::string>();
    auto truth = std::make_shared<std::string>();
    auto k = std::make_shared<int>(5);
    auto dur_tol = std::make_shared<std::int64_t>(50);
    auto out = std::make_shared<std::string>("report");
    cmd->add_option("--task", *task, "task to score")->capture_default_str();
    cmd->add_option("--pred", *pred, "predictions.jsonl")->required();
    cmd->add_option("--truth", *truth, "dataset.jsonl")->required();
    cmd->add_option("--k", *k, "hit@k depth for potential_k")->capture_default_str();
    cmd->add_option("--dur-tol", *dur_tol, "duration tolerance, ps")->capture_default_str();
    cmd->add_option("--out", *out, "report directory")->capture_default_str();
    cmd->callback([=] {
        const evomd::Task t = evomd::task_from_name(*task);
        const std::string canonical_task{evomd::task_name(t)};
        std::vector<evomd::DatasetRecord> records;
        for (const auto& r : evomd::read_dataset(*truth))
            if (r.task == canonical_task && r.split == "test") records.push_back(r);
        const auto entries = evomd::read_predictions(*pred);
        evomd::EvalReport report;
        report.k = *k;
        report.duration_tolerance_ps = *dur_tol;
        report.tasks.push_back(evomd::score_task(entries, records, t, *k, *dur_tol));
        std::cout << evomd::emit_report(report, *out);
    });
}

void add_templates(CLI::App& app) {
    auto* cmd = app.add_subcommand("templates", "print the pinned instruction templates and their hashes");
    cmd->callback([] {
        evomd::verify_template_hashes();
        auto entry = [](const char* text, const char* hash) {
            return json{{"text", text}, {"sha256", hash}};
        };
        json j{{"system", entry(evomd::templates::kSystem, evomd::templates::kSystemSha256)},
               {"forward_1", entry(evomd::templates::kForward1, evomd::templates::kForward1Sha256)},
               {"forward_2", entry(evomd::templates::kForward2, evomd::templates::kForward2Sha256)},
               {"backward", entry(evomd::templates::kBackward, evomd::templates::kBackwardSha256)},
               {"reasoning_system", json{{"text", evomd::templates::kReasoningSystem}}},
               {"reasoning_instruction", json{{"text", evomd::templates::kReasoningInstruction}}}};
        std::cout << j.dump(2) << '\n';
    });
}

void add_run(CLI::App& app) {
    auto* cmd = app.add_subcommand("run", "run the full pipeline from a config file");
    auto config_path = std::make_shared<std::string>();
    cmd->add_option("--config", *config_path, "pipeline config JSON")->required();
    cmd->callback([=] {
        const auto config = evomd::load_config(*config_path);
        const auto manifest = evomd::run_pipeline(config);
        std::cout << "run: complete; outputs in " << config.out_dir.string() << '\n';
        if (manifest.contains("counts")) std::cout << manifest["counts"].dump(2) << '\n';
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evomd — reactive-MD species event pipeline"};
    app.require_subcommand(1);

    add_ingest(app);
    add_extract(app);
    add_filter(app);
    add_balance(app);
    add_windows(app);
    add_split(app);
    add_format(app);
    add_mix(app);
    add_simulate(app);
    add_baseline(app);
    add_eval(app);
    add_templates(app);
    add_run(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help/usage or the parse error
        return code == 0 ? 0 : 2;
    } catch (const evomd::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const evomd::StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
