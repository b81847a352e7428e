#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"

#include "evomd/dataset.hpp"
#include "evomd/errors.hpp"
#include "evomd/eval.hpp"
#include "test_util.hpp"

using namespace evomd;
using evomd_test::TempDir;

namespace {

CanonicalFormula F(const char* text) { return parse_formula(text, FormulaMode::lenient); }

using Pairs = std::vector<std::pair<const char*, std::int64_t>>;

// Ground-truth record via the real formatter so the shape matches production.
DatasetRecord make_truth(Task task, const Pairs& targets, int anchor) {
    PredictionSample s;
    s.task = task;
    s.trajectory_id = "t0";
    s.lineage_id = 0;
    s.anchor_index = anchor;
    s.history = {{F("MoO"), 10}, {F("MoS"), 20}, {F("MoS2"), 30}};
    for (const auto& [f, d] : targets) s.targets.emplace_back(F(f), d);
    s.split = "test";
    return format_record(s);
}

PredictionEntry make_output(const std::string& sample_id, const std::string& output) {
    PredictionEntry e;
    e.sample_id = sample_id;
    e.output = output;
    return e;
}

PredictionEntry make_candidates(const std::string& sample_id, const std::vector<std::string>& cands) {
    PredictionEntry e;
    e.sample_id = sample_id;
    e.candidates = cands;
    return e;
}

}  // namespace

TEST_CASE("parse_prediction covers every failure category") {
    SUBCASE("accepted forms") {
        for (const char* good : {"(MoS3, 106)", "(MoS3,106)", "  ( MoS3 , 106 )  ", "(Mo2S7, 1)"}) {
            const auto p = parse_prediction(good);
            CHECK(p.ok);
            CHECK(p.duration_ps >= 1);
        }
        const auto p = parse_prediction("(MoS3, 106)");
        CHECK(p.formula.render() == "MoS3");
        CHECK(p.duration_ps == 106);
    }
    SUBCASE("no_tuple") {
        for (const char* bad : {"", "   ", "no parens at all", "MoS3, 106", "(MoS3 106)", ")(",
                                "(MoS3; 106)"}) {
            const auto p = parse_prediction(bad);
            CHECK(!p.ok);
            CHECK(p.failure == ParseFailureKind::no_tuple);
        }
    }
    SUBCASE("extra_text") {
        for (const char* bad : {"the answer is (MoS3, 106)", "(MoS3, 106) maybe", "x(MoS3, 106)x"}) {
            const auto p = parse_prediction(bad);
            CHECK(!p.ok);
            CHECK(p.failure == ParseFailureKind::extra_text);
        }
    }
    SUBCASE("bad_formula") {
        for (const char* bad : {"(OMo, 106)", "(MoS1, 10)", "(Xx3, 10)", "(, 10)", "(mos2, 10)"}) {
            const auto p = parse_prediction(bad);
            CHECK(!p.ok);
            CHECK(p.failure == ParseFailureKind::bad_formula);
        }
    }
    SUBCASE("bad_duration") {
        for (const char* bad : {"(MoS3, )", "(MoS3, -5)", "(MoS3, 1.5)", "(MoS3, abc)", "(MoS3, 0)",
                                "(MoS3, 1234567890123456789)", "(MoS3, +6)"}) {
            const auto p = parse_prediction(bad);
            CHECK(!p.ok);
            CHECK(p.failure == ParseFailureKind::bad_duration);
        }
        // 18 digits is the longest accepted duration
        CHECK(parse_prediction("(MoS3, 123456789012345678)").ok);
    }
}

TEST_CASE("parse_prediction_list enforces the expected tuple count") {
    const auto two = parse_prediction_list("(MoS3, 106); (MoS2, 44)", 2);
    REQUIRE(two.ok);
    REQUIRE(two.tuples.size() == 2);
    CHECK(two.tuples[0].first.render() == "MoS3");
    CHECK(two.tuples[1].second == 44);

    SUBCASE("too few tuples -> no_tuple") {
        const auto p = parse_prediction_list("(MoS3, 106)", 2);
        CHECK(!p.ok);
        CHECK(p.failure == ParseFailureKind::no_tuple);
    }
    SUBCASE("too many tuples -> extra_text") {
        const auto p = parse_prediction_list("(MoS3, 106); (MoS2, 44); (MoO, 9)", 2);
        CHECK(!p.ok);
        CHECK(p.failure == ParseFailureKind::extra_text);
    }
    SUBCASE("any broken part fails the whole list with its own category") {
        const auto p = parse_prediction_list("(MoS3, 106); (bogus, 44)", 2);
        CHECK(!p.ok);
        CHECK(p.failure == ParseFailureKind::bad_formula);
    }
    SUBCASE("single-target lists are plain predictions") {
        const auto p = parse_prediction_list("(MoS3, 106)", 1);
        CHECK(p.ok);
    }
}

TEST_CASE("classify_mismatch follows the sulfur-then-oxygen rule") {
    CHECK(classify_mismatch(F("MoS"), F("MoS2")) == MismatchClass::under_sulfidation);
    CHECK(classify_mismatch(F("MoS3"), F("MoS2")) == MismatchClass::over_sulfidation);
    CHECK(classify_mismatch(F("MoO2S2"), F("MoOS2")) == MismatchClass::oxygen_deviation);
    CHECK(classify_mismatch(F("Mo2S2"), F("MoS2")) == MismatchClass::other);
    CHECK_THROWS_AS(classify_mismatch(F("MoS2"), F("MoS2")), ValidationError);
    // sulfur dominates oxygen when both differ
    CHECK(classify_mismatch(F("MoO2S"), F("MoOS2")) == MismatchClass::under_sulfidation);
}

TEST_CASE("prediction rows are validated on read") {
    TempDir dir;
    const auto path = dir.file("pred.jsonl");
    {
        std::ofstream out(path);
        out << R"x({"sample_id":"a","output":"(MoS, 5)"})x" << '\n';
        out << R"x({"sample_id":"b","candidates":["(MoS, 5)","(MoO, 6)"]})x" << '\n';
    }
    const auto entries = read_predictions(path);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].output.value() == "(MoS, 5)");
    CHECK(entries[1].candidates.size() == 2);

    CHECK_THROWS_AS(prediction_entry_from_json(nlohmann::json{{"output", "(MoS, 5)"}}, "x"),
                    ValidationError);
    CHECK_THROWS_AS(prediction_entry_from_json(nlohmann::json{{"sample_id", "a"}}, "x"),
                    ValidationError);
    CHECK_THROWS_AS(
        prediction_entry_from_json(nlohmann::json{{"sample_id", "a"}, {"output", 7}}, "x"),
        ValidationError);
}

TEST_CASE("score_task arithmetic on a planted forward_1 set") {
    // 10 samples: 6 species-correct, 3 wrong-but-valid, 1 unparseable
    std::vector<DatasetRecord> truth;
    std::vector<PredictionEntry> entries;
    int anchor = 0;

    const std::int64_t diffs[] = {0, 10, 30, 10, 0, 150};  // MAE 200/6, 5 of 6 within 50
    for (std::int64_t d : diffs) {
        auto r = make_truth(Task::forward_1, {{"MoS2", 100}}, anchor++);
        entries.push_back(make_output(r.sample_id, "(MoS2, " + std::to_string(100 + d) + ")"));
        truth.push_back(std::move(r));
    }
    {
        auto r = make_truth(Task::forward_1, {{"MoS2", 100}}, anchor++);
        entries.push_back(make_output(r.sample_id, "(MoS, 80)"));  // under
        truth.push_back(std::move(r));
    }
    {
        auto r = make_truth(Task::forward_1, {{"MoS", 100}}, anchor++);
        entries.push_back(make_output(r.sample_id, "(MoS2, 80)"));  // over
        truth.push_back(std::move(r));
    }
    {
        auto r = make_truth(Task::forward_1, {{"MoOS2", 100}}, anchor++);
        entries.push_back(make_output(r.sample_id, "(MoO2S2, 80)"));  // oxygen deviation
        truth.push_back(std::move(r));
    }
    {
        auto r = make_truth(Task::forward_1, {{"MoS2", 100}}, anchor++);
        entries.push_back(make_output(r.sample_id, "total nonsense"));
        truth.push_back(std::move(r));
    }

    const auto s = score_task(entries, truth, Task::forward_1, 5, 50);
    CHECK(s.total == 10);
    CHECK(s.hits == 6);
    CHECK(s.wrong_valid == 3);
    CHECK(s.parse_failures == 1);
    CHECK(s.hits + s.wrong_valid + s.parse_failures == s.total);  // denominator law
    CHECK(s.accuracy_pct == doctest::Approx(60.0));
    CHECK(s.missing_rate_pct == doctest::Approx(10.0));

    CHECK(s.duration_scored == 6);
    CHECK(s.duration_mae_ps == doctest::Approx(200.0 / 6.0));
    CHECK(s.duration_within_tol_pct == doctest::Approx(100.0 * 5.0 / 6.0));

    CHECK(s.taxonomy.at("under_sulfidation") == 1);
    CHECK(s.taxonomy.at("over_sulfidation") == 1);
    CHECK(s.taxonomy.at("oxygen_deviation") == 1);
    CHECK(s.taxonomy.count("other") == 0);
    CHECK(s.failure_kinds.at("no_tuple") == 1);

    // confusion row sums match the per-species truth counts
    std::map<std::string, std::int64_t> row_sums, truth_counts;
    for (const auto& [t, row] : s.confusion)
        for (const auto& [p, n] : row) row_sums[t] += n;
    for (const auto& r : truth) truth_counts[F(r.targets.front().first.c_str()).render()]++;
    CHECK(row_sums == truth_counts);
    CHECK(s.confusion.at("MoS2").at("UNPARSEABLE") == 1);
    CHECK(s.confusion.at("MoS2").at("MoS2") == 6);
}

TEST_CASE("missing predictions score as parse failures") {
    std::vector<DatasetRecord> truth = {make_truth(Task::forward_1, {{"MoS2", 100}}, 0),
                                        make_truth(Task::forward_1, {{"MoS", 100}}, 1)};
    std::vector<PredictionEntry> entries = {make_output(truth[0].sample_id, "(MoS2, 100)")};
    const auto s = score_task(entries, truth, Task::forward_1, 5, 50);
    CHECK(s.hits == 1);
    CHECK(s.parse_failures == 1);
    CHECK(s.failure_kinds.at("no_tuple") == 1);
    CHECK(s.confusion.at("MoS").at("UNPARSEABLE") == 1);
}

TEST_CASE("score_task validates its input sets") {
    std::vector<DatasetRecord> truth = {make_truth(Task::forward_1, {{"MoS2", 100}}, 0)};
    std::vector<PredictionEntry> ok = {make_output(truth[0].sample_id, "(MoS2, 100)")};

    CHECK_THROWS_AS(score_task(ok, {}, Task::forward_1, 5, 50), ValidationError);
    CHECK_THROWS_AS(score_task(ok, truth, Task::forward_1, 0, 50), ValidationError);
    CHECK_THROWS_AS(score_task(ok, truth, Task::forward_1, 5, -1), ValidationError);
    CHECK_THROWS_AS(score_task(ok, truth, Task::backward, 5, 50), ValidationError);  // task mismatch

    auto dup = ok;
    dup.push_back(ok[0]);
    CHECK_THROWS_AS(score_task(dup, truth, Task::forward_1, 5, 50), ValidationError);

    auto unknown = ok;
    unknown.push_back(make_output("forward_1:zz:0:0", "(MoS2, 100)"));
    CHECK_THROWS_AS(score_task(unknown, truth, Task::forward_1, 5, 50), ValidationError);

    auto dup_truth = truth;
    dup_truth.push_back(truth[0]);
    CHECK_THROWS_AS(score_task(ok, dup_truth, Task::forward_1, 5, 50), ValidationError);
}

TEST_CASE("potential_k hit rates are monotone and top-1 decides the bucket") {
    std::vector<DatasetRecord> truth;
    std::vector<PredictionEntry> entries;
    int anchor = 0;
    auto add = [&](const std::vector<std::string>& cands) {
        auto r = make_truth(Task::potential_k, {{"MoS2", 100}}, anchor++);
        entries.push_back(make_candidates(r.sample_id, cands));
        truth.push_back(std::move(r));
    };
    add({"(MoS2, 90)", "(MoO, 5)", "(MoS, 5)"});     // hit at 1
    add({"(MoO, 5)", "(MoS2, 90)", "(MoS, 5)"});     // wrong top-1, hit at 2
    add({"(MoO, 5)", "(MoS, 5)", "(MoS2, 90)"});     // hit at 3
    add({"(MoO, 5)", "(MoS, 5)", "(MoO2, 5)"});      // never hits
    add({"garbage", "(MoS2, 90)", "(MoS, 5)"});      // top-1 unparseable, hit at 2

    const auto s = score_task(entries, truth, Task::potential_k, 3, 50);
    CHECK(s.total == 5);
    CHECK(s.hits == 1);
    CHECK(s.wrong_valid == 3);
    CHECK(s.parse_failures == 1);
    CHECK(s.potential_k_hit_pct.at(1) == doctest::Approx(20.0));
    CHECK(s.potential_k_hit_pct.at(2) == doctest::Approx(60.0));
    CHECK(s.potential_k_hit_pct.at(3) == doctest::Approx(80.0));
    double last = 0.0;
    for (const auto& [k, v] : s.potential_k_hit_pct) {
        CHECK(v >= last);
        last = v;
    }
    // duration scored only on the top-1 hit
    CHECK(s.duration_scored == 1);
    CHECK(s.duration_mae_ps == doctest::Approx(10.0));
}

TEST_CASE("potential_k falls back to a single output entry") {
    std::vector<DatasetRecord> truth = {make_truth(Task::potential_k, {{"MoS2", 100}}, 0)};
    std::vector<PredictionEntry> entries = {make_output(truth[0].sample_id, "(MoS2, 100)")};
    const auto s = score_task(entries, truth, Task::potential_k, 5, 50);
    CHECK(s.hits == 1);
    CHECK(s.potential_k_hit_pct.at(1) == doctest::Approx(100.0));
    CHECK(s.potential_k_hit_pct.at(5) == doctest::Approx(100.0));
}

TEST_CASE("forward_2 requires every step to match and logs the first wrong step") {
    std::vector<DatasetRecord> truth;
    std::vector<PredictionEntry> entries;
    int anchor = 0;
    auto add = [&](const std::string& output) {
        auto r = make_truth(Task::forward_2, {{"MoS2", 100}, {"MoS3", 50}}, anchor++);
        entries.push_back(make_output(r.sample_id, output));
        truth.push_back(std::move(r));
    };
    add("(MoS2, 100); (MoS3, 50)");  // full hit
    add("(MoS2, 100); (MoS5, 50)");  // step 2 wrong (over_sulfidation vs MoS3)
    add("(MoS, 100); (MoS3, 50)");   // step 1 wrong (under_sulfidation vs MoS2)
    add("(MoS2, 100)");              // count mismatch -> no_tuple
    add("(MoS2, 1); (MoS3, 1); (MoO, 1)");  // too many -> extra_text

    const auto s = score_task(entries, truth, Task::forward_2, 5, 50);
    CHECK(s.total == 5);
    CHECK(s.hits == 1);
    CHECK(s.wrong_valid == 2);
    CHECK(s.parse_failures == 2);
    CHECK(s.failure_kinds.at("no_tuple") == 1);
    CHECK(s.failure_kinds.at("extra_text") == 1);

    REQUIRE(s.per_step_accuracy_pct.size() == 2);
    CHECK(s.per_step_accuracy_pct[0] == doctest::Approx(40.0));  // steps 1 right in rows 1,2
    CHECK(s.per_step_accuracy_pct[1] == doctest::Approx(40.0));  // steps 2 right in rows 1,3
    CHECK(s.nstep_mean_accuracy_pct == doctest::Approx(40.0));

    CHECK(s.taxonomy.at("over_sulfidation") == 1);
    CHECK(s.taxonomy.at("under_sulfidation") == 1);

    // durations scored per matching step: rows 1 (both), 2 (step 1), 3 (step 2)
    CHECK(s.duration_scored == 4);
}

TEST_CASE("emit_report writes the full artifact set") {
    std::vector<DatasetRecord> truth;
    std::vector<PredictionEntry> entries;
    for (int i = 0; i < 5; ++i) {
        auto r = make_truth(Task::forward_1, {{"MoS2", 100}}, i);
        entries.push_back(
            make_output(r.sample_id, i < 3 ? "(MoS2, 100)" : (i == 3 ? "(MoS, 90)" : "junk")));
        truth.push_back(std::move(r));
    }
    EvalReport report;
    report.k = 5;
    report.duration_tolerance_ps = 50;
    report.tasks.push_back(score_task(entries, truth, Task::forward_1, 5, 50));

    TempDir dir;
    const auto summary = emit_report(report, dir.path);
    CHECK(summary.find("forward_1") != std::string::npos);
    CHECK(summary.find("60.00") != std::string::npos);  // 3/5

    const auto report_json = nlohmann::json::parse(evomd_test::read_text(dir.file("report.json")));
    CHECK(report_json.at("tasks").size() == 1);
    CHECK(report_json.at("tasks")[0].at("accuracy_pct").get<double>() == doctest::Approx(60.0));
    CHECK(report_json.at("k") == 5);

    const auto confusion = evomd_test::read_text(dir.file("confusion.csv"));
    CHECK(confusion.rfind("task,truth,predicted,count\n", 0) == 0);
    CHECK(confusion.find("forward_1,MoS2,MoS2,3") != std::string::npos);
    CHECK(confusion.find("forward_1,MoS2,UNPARSEABLE,1") != std::string::npos);

    const auto taxonomy = evomd_test::read_text(dir.file("error_taxonomy.csv"));
    CHECK(taxonomy.rfind("task,class,count,share_pct\n", 0) == 0);
    CHECK(taxonomy.find("forward_1,under_sulfidation,1,100.0000") != std::string::npos);
    CHECK(taxonomy.find("forward_1,over_sulfidation,0,0.0000") != std::string::npos);
    CHECK(taxonomy.find("forward_1,oxygen_deviation,0,0.0000") != std::string::npos);
    CHECK(taxonomy.find("forward_1,other,0,0.0000") != std::string::npos);

    const auto nstep = evomd_test::read_text(dir.file("nstep_decay.csv"));
    CHECK(nstep == "task,step,accuracy_pct\n");  // forward_1 has no multi-step rows
}
