#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "evomd/errors.hpp"
#include "evomd/events.hpp"
#include "evomd/frames.hpp"
#include "evomd/kmc.hpp"
#include "evomd/rng.hpp"
#include "test_util.hpp"

using namespace evomd;
using evomd_test::TempDir;
using evomd_test::make_markov_network;

namespace {

CanonicalFormula F(const char* text) { return parse_formula(text, FormulaMode::lenient); }

// Deterministic-duration pmf: all mass on d ps.
std::vector<double> point_pmf(int d) {
    std::vector<double> pmf(static_cast<std::size_t>(d), 0.0);
    pmf.back() = 1.0;
    return pmf;
}

// Three species, two duration bins (edge 10), bimodal durations (5 or 15 ps,
// 50/50), and per-bin transitions that disagree completely: short durations
// step forward around the cycle, long durations step backward. A
// duration-aware predictor is perfect here; a duration-agnostic one is a
// coin flip.
ReactionNetwork make_per_bin_network() {
    ReactionNetwork net;
    net.network_id = "per-bin-test";
    net.species = {F("MoO"), F("MoS"), F("MoS2")};
    net.bins.edges = {10};
    net.transition_by_bin = {
        {{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}},  // bin 0 (short): +1
        {{0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}},  // bin 1 (long): -1
    };
    std::vector<double> bimodal(15, 0.0);
    bimodal[4] = 0.5;   // d = 5  -> bin 0
    bimodal[14] = 0.5;  // d = 15 -> bin 1
    net.duration_pmf = {{bimodal}, {bimodal}, {bimodal}};
    return net;
}

}  // namespace

TEST_CASE("validate_network rejects malformed networks") {
    auto net = make_markov_network();
    CHECK_NOTHROW(validate_network(net));

    SUBCASE("too few species") {
        net.species.resize(1);
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("duplicate species") {
        net.species[1] = net.species[0];
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("both transition forms") {
        net.transition_by_bin.assign(static_cast<std::size_t>(net.bins.bin_count()), net.transition);
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("neither transition form") {
        net.transition.clear();
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("non-stochastic row") {
        net.transition[0][0] += 0.25;
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("negative probability") {
        net.transition[0][0] = -0.1;
        net.transition[0][1] += 0.1;
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("wrong per-bin matrix count") {
        net.transition_by_bin = {net.transition};  // bins say 3
        net.transition.clear();
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("missing duration pmf") {
        net.duration_pmf.pop_back();
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("pmf does not sum to one") {
        net.duration_pmf[0][0][0] += 0.5;
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("pmf count must be 1 or bin_count") {
        net.duration_pmf[0].push_back(net.duration_pmf[0][0]);  // 2 of 3 bins
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
    SUBCASE("atom map must canonicalize to the species") {
        net.atom_maps.assign(net.species.size(), {});
        net.atom_maps[0] = {"Mo", "Mo"};
        CHECK_THROWS_AS(validate_network(net), ValidationError);
    }
}

TEST_CASE("network json round-trip preserves every field") {
    auto net = make_markov_network(5);
    net.atom_maps.assign(net.species.size(), {});
    net.atom_maps[0] = formula_elements(net.species[0]);

    const auto j = network_to_json(net);
    const auto back = network_from_json(j);
    CHECK(back.network_id == net.network_id);
    REQUIRE(back.species_count() == net.species_count());
    for (int s = 0; s < net.species_count(); ++s)
        CHECK(back.species[static_cast<std::size_t>(s)].render() ==
              net.species[static_cast<std::size_t>(s)].render());
    CHECK(back.transition == net.transition);
    CHECK(back.bins.edges == net.bins.edges);
    CHECK(back.duration_pmf == net.duration_pmf);
    CHECK(back.atom_maps == net.atom_maps);

    TempDir dir;
    const auto path = dir.file("network.json");
    evomd_test::write_network(path, net);
    const auto loaded = load_network(path);
    CHECK(network_to_json(loaded) == j);
}

TEST_CASE("network_from_json validates input shape") {
    CHECK_THROWS_AS(network_from_json(nlohmann::json::array()), ValidationError);
    CHECK_THROWS_AS(network_from_json(nlohmann::json{{"species", nlohmann::json::array()}}),
                    ValidationError);
    nlohmann::json no_pmf{{"species", {"MoO", "MoS"}},
                          {"transition", {{0.0, 1.0}, {1.0, 0.0}}}};
    CHECK_THROWS_AS(network_from_json(no_pmf), ValidationError);
}

TEST_CASE("generate is seed-deterministic and respects the network") {
    const auto net = make_markov_network();
    const auto a = generate(net, "t", 500, 42);
    const auto b = generate(net, "t", 500, 42);
    const auto c = generate(net, "t", 500, 43);
    REQUIRE(a.events.size() == 500);
    CHECK(a.events.size() == b.events.size());
    bool same = true, diff = false;
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        same = same && a.events[i].formula == b.events[i].formula &&
               a.events[i].start_ps == b.events[i].start_ps &&
               a.events[i].duration_ps == b.events[i].duration_ps;
        if (i < c.events.size() &&
            !(a.events[i].formula == c.events[i].formula && a.events[i].duration_ps == c.events[i].duration_ps))
            diff = true;
    }
    CHECK(same);
    CHECK(diff);

    // contiguous timeline, positive durations within pmf support, no self-runs
    std::int64_t t = 0;
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        const auto& e = a.events[i];
        CHECK(e.lineage_id == 0);
        CHECK(e.start_ps == t);
        CHECK(e.duration_ps >= 1);
        CHECK(e.duration_ps <= 40);
        if (i > 0) CHECK(!(e.formula == a.events[i - 1].formula));
        t += e.duration_ps;
    }
}

TEST_CASE("duration context is the previous event's bin, starting at bin 0") {
    // ctx 0 forces d = 12 ps (bin 1), ctx 1 forces d = 3 ps (bin 0): the walk
    // must alternate 12, 3, 12, 3, ... proving both the context rule and the
    // first event's ctx = 0.
    ReactionNetwork net;
    net.network_id = "ctx-test";
    net.species = {F("MoO"), F("MoS")};
    net.bins.edges = {10};
    net.transition = {{0.0, 1.0}, {1.0, 0.0}};
    net.duration_pmf = {{point_pmf(12), point_pmf(3)}, {point_pmf(12), point_pmf(3)}};

    const auto traj = generate(net, "t", 50, 7);
    for (std::size_t i = 0; i < traj.events.size(); ++i)
        CHECK(traj.events[i].duration_ps == (i % 2 == 0 ? 12 : 3));
}

TEST_CASE("generate_corpus derives independent seeded walks") {
    const auto net = make_markov_network();
    const auto corpus = generate_corpus(net, 3, 100, 11);
    REQUIRE(corpus.size() == 3);
    CHECK(corpus[0].events.front().trajectory_id == "traj-000");
    CHECK(corpus[1].events.front().trajectory_id == "traj-001");
    CHECK(corpus[2].events.front().trajectory_id == "traj-002");
    // distinct derived seeds: the walks differ
    bool differ = false;
    for (std::size_t i = 0; i < 100; ++i)
        if (!(corpus[0].events[i].formula == corpus[1].events[i].formula)) differ = true;
    CHECK(differ);
    // rerun is identical
    const auto again = generate_corpus(net, 3, 100, 11);
    for (int k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < 100; ++i)
            CHECK(corpus[static_cast<std::size_t>(k)].events[i].formula ==
                  again[static_cast<std::size_t>(k)].events[i].formula);
}

TEST_CASE("stationary_distribution matches closed forms") {
    SUBCASE("asymmetric 2-state chain") {
        const auto pi = stationary_distribution({{0.0, 1.0}, {0.5, 0.5}});
        CHECK(pi[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
        CHECK(pi[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    }
    SUBCASE("periodic chain converges via the lazy iterate") {
        const auto pi = stationary_distribution({{0.0, 1.0}, {1.0, 0.0}});
        CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(pi[1] == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("doubly stochastic is uniform") {
        const auto net = make_markov_network(4);
        const auto pi = stationary_distribution(net.transition);
        for (double p : pi) CHECK(p == doctest::Approx(0.25).epsilon(1e-9));
    }
    SUBCASE("non-ergodic matrices are rejected") {
        CHECK_THROWS_AS(stationary_distribution({{1.0, 0.0}, {0.0, 1.0}}), ValidationError);
        CHECK_THROWS_AS(stationary_distribution({{1.0, 0.0}, {0.5, 0.5}}), ValidationError);
    }
    SUBCASE("shape and stochasticity are validated") {
        CHECK_THROWS_AS(stationary_distribution({}), ValidationError);
        CHECK_THROWS_AS(stationary_distribution({{1.0}, {0.5, 0.5}}), ValidationError);
        CHECK_THROWS_AS(stationary_distribution({{0.4, 0.4}, {0.5, 0.5}}), ValidationError);
    }
}

TEST_CASE("bayes ceilings match hand computations") {
    SUBCASE("cyclic dominant chain") {
        const auto net = make_markov_network(4, 0.7);
        // uniform stationary, every row max 0.7
        CHECK(bayes_optimal_accuracy(net, Task::forward_1) == doctest::Approx(0.7).epsilon(1e-9));
        CHECK(bayes_optimal_accuracy(net, Task::potential_k) == doctest::Approx(0.7).epsilon(1e-9));
        // doubly stochastic: the reversed chain is the transpose
        CHECK(bayes_optimal_accuracy(net, Task::backward) == doctest::Approx(0.7).epsilon(1e-9));
    }
    SUBCASE("irreversible 4-state chain separates forward from backward") {
        // Doubly stochastic (pi uniform), zero diagonal, with two row maxima
        // colliding in column 0 so the row-max and column-max sums differ.
        ReactionNetwork net;
        net.species = {F("MoO"), F("MoS"), F("MoOS2"), F("MoS3")};
        net.transition = {{0.0, 0.27, 0.18, 0.55},
                          {0.5, 0.0, 0.3, 0.2},
                          {0.45, 0.3, 0.0, 0.25},
                          {0.05, 0.43, 0.52, 0.0}};
        const std::vector<double> d4 = {0.25, 0.25, 0.25, 0.25};
        net.duration_pmf = {{d4}, {d4}, {d4}, {d4}};
        // forward: row maxima (0.55 + 0.5 + 0.45 + 0.52) / 4
        CHECK(bayes_optimal_accuracy(net, Task::forward_1) == doctest::Approx(0.505).epsilon(1e-9));
        // backward: column maxima (0.5 + 0.43 + 0.52 + 0.55) / 4
        CHECK(bayes_optimal_accuracy(net, Task::backward) == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("per-bin networks have no single-matrix ceiling") {
        CHECK_THROWS_AS(bayes_optimal_accuracy(make_per_bin_network(), Task::forward_1),
                        ValidationError);
    }
}

TEST_CASE("empirical argmax accuracy approaches the forward ceiling") {
    const auto net = make_markov_network(4, 0.7);
    const double ceiling = bayes_optimal_accuracy(net, Task::forward_1);

    const auto traj = generate(net, "t", 100000, 2024);
    std::map<std::string, int> index;
    for (int s = 0; s < net.species_count(); ++s)
        index[net.species[static_cast<std::size_t>(s)].render()] = s;

    std::int64_t hits = 0, total = 0;
    for (std::size_t i = 0; i + 1 < traj.events.size(); ++i) {
        const int s = index.at(traj.events[i].formula.render());
        const auto& row = net.transition[static_cast<std::size_t>(s)];
        const int best =
            static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        if (index.at(traj.events[i + 1].formula.render()) == best) ++hits;
        ++total;
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(total);
    CHECK(acc == doctest::Approx(ceiling).epsilon(0.02));
}

TEST_CASE("duration-aware ceiling dominates the agnostic one") {
    const auto net = make_per_bin_network();
    const double aware = bayes_forward_duration_aware(net);
    const double agnostic = bayes_forward_duration_agnostic(net);
    CHECK(aware == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(agnostic == doctest::Approx(0.5).epsilon(1e-9));

    // Monte Carlo: the bin-aware argmax predictor actually achieves its ceiling.
    const auto traj = generate(net, "t", 20000, 5);
    std::map<std::string, int> index{{"MoO", 0}, {"MoS", 1}, {"MoS2", 2}};
    std::int64_t hits = 0, total = 0;
    for (std::size_t i = 0; i + 1 < traj.events.size(); ++i) {
        const int s = index.at(traj.events[i].formula.render());
        const auto& row =
            net.transition_for_bin(duration_bin(net.bins, traj.events[i].duration_ps))[static_cast<std::size_t>(s)];
        const int best =
            static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        if (index.at(traj.events[i + 1].formula.render()) == best) ++hits;
        ++total;
    }
    CHECK(static_cast<double>(hits) / static_cast<double>(total) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("joint stationary drops duration bins a species never realizes") {
    // Three bins, but every duration lands in bins 0/1: the bin-2 joint states
    // are transient and the ceilings must still be well defined.
    auto net = make_per_bin_network();
    net.bins.edges = {10, 20};
    // bin 2: never entered (durations are 5 or 15 ps, both below the 20 edge)
    net.transition_by_bin.push_back({{0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}, {0.5, 0.5, 0.0}});
    CHECK(bayes_forward_duration_aware(net) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(bayes_forward_duration_agnostic(net) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("single-matrix ceilings agree across the aware/agnostic split") {
    const auto net = make_markov_network(5, 0.6);
    const double forward = bayes_optimal_accuracy(net, Task::forward_1);
    CHECK(bayes_forward_duration_aware(net) == doctest::Approx(forward).epsilon(1e-9));
    CHECK(bayes_forward_duration_agnostic(net) == doctest::Approx(forward).epsilon(1e-9));
}

TEST_CASE("expand_to_frames writes star graphs that extract back exactly") {
    ReactionNetwork net;
    net.network_id = "frames-test";
    net.species = {F("MoO2"), F("MoS3"), F("MoOS2")};
    net.transition = {{0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}, {0.5, 0.5, 0.0}};
    const std::vector<double> d4 = {0.25, 0.25, 0.25, 0.25};
    net.duration_pmf = {{d4}, {d4}, {d4}};
    net.atom_maps = {{}, {}, {"S", "Mo", "O", "S"}};  // exercise the override path

    const auto traj = generate(net, "rt", 60, 99);
    TempDir dir;
    const auto path = dir.file("frames.jsonl");
    std::int64_t frames = 0;
    {
        std::ofstream out(path);
        frames = expand_to_frames(traj, net, out);
    }
    std::int64_t want_frames = 0;
    for (const auto& e : traj.events) want_frames += e.duration_ps;
    CHECK(frames == want_frames);

    // every frame is a star on atom 0, the hub is the Mo, time steps by 1 ps
    const auto parsed = read_frames(path, BondThreshold{0.5});
    REQUIRE(static_cast<std::int64_t>(parsed.size()) == frames);
    std::int64_t t = 0;
    for (const auto& f : parsed) {
        CHECK(f.trajectory_id == "rt");
        CHECK(f.time_ps == t++);
        CHECK(f.elements[0] == "Mo");
        for (const auto& b : f.bonds) CHECK(b.i == 0);
        CHECK(f.bonds.size() == f.elements.size() - 1);
    }

    // extraction reproduces the generated events exactly
    const auto events = extract_events(path, BondThreshold{0.5});
    REQUIRE(events.size() == traj.events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(events[i].trajectory_id == traj.events[i].trajectory_id);
        CHECK(events[i].lineage_id == 0);
        CHECK(events[i].formula == traj.events[i].formula);
        CHECK(events[i].start_ps == traj.events[i].start_ps);
        CHECK(events[i].duration_ps == traj.events[i].duration_ps);
    }
}
