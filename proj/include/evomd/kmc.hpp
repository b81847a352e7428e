#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "evomd/dataset.hpp"
#include "evomd/events.hpp"
#include "evomd/formula.hpp"
#include "evomd/task.hpp"

namespace evomd {

// Semi-Markov reaction network. The walk alternates duration and species
// draws:
//   d_i    ~ duration_pmf[s_i][ctx]      ctx = bin(d_{i-1}), 0 for the first event
//   s_i+1  ~ P_b[s_i][.]                 b = bin(d_i)
// With a single transition matrix and context-free durations this degenerates
// to an ordinary Markov chain over species. Per-bin transition matrices make
// the next species genuinely depend on the current duration bin, which is
// what separates a duration-aware predictor from a duration-agnostic one.
struct ReactionNetwork {
    std::string network_id;
    std::vector<CanonicalFormula> species;

    // Exactly one of the two is populated. transition_by_bin has one
    // row-stochastic matrix per duration bin.
    std::vector<std::vector<double>> transition;
    std::vector<std::vector<std::vector<double>>> transition_by_bin;

    DurationBins bins;  // context/duration binning

    // Per species: one pmf (context-free) or bins.bin_count() pmfs. pmf[d-1]
    // is the probability of an integer duration of d ps; support [1, size()].
    std::vector<std::vector<std::vector<double>>> duration_pmf;

    // Per species: atom multiset realized in frames. Empty entries default to
    // the species formula's own atoms; overrides must canonicalize back to
    // the species formula.
    std::vector<std::vector<std::string>> atom_maps;

    bool per_bin_transitions() const { return !transition_by_bin.empty(); }
    int species_count() const { return static_cast<int>(species.size()); }
    const std::vector<std::vector<double>>& transition_for_bin(int bin) const;
    const std::vector<double>& duration_pmf_for(int species_index, int context_bin) const;
    std::vector<std::string> atom_map_for(int species_index) const;
};

void validate_network(const ReactionNetwork& net);

ReactionNetwork network_from_json(const nlohmann::json& j);
nlohmann::json network_to_json(const ReactionNetwork& net);
ReactionNetwork load_network(const std::filesystem::path& path);

struct SyntheticTrajectory {
    std::vector<MolecularEvent> events;
    std::uint64_t generator_seed = 0;
    std::string network_id;
};

// Seeded semi-Markov walk of n_events events, all on lineage 0, starting at
// t = 0 ps. The initial species is drawn uniformly.
SyntheticTrajectory generate(const ReactionNetwork& net, const std::string& trajectory_id,
                             std::int64_t n_events, std::uint64_t seed);

// n_trajectories independent walks under derived seeds; ids "traj-000", ...
std::vector<SyntheticTrajectory> generate_corpus(const ReactionNetwork& net, int n_trajectories,
                                                 std::int64_t events_per, std::uint64_t seed);

// Frame stream at 1 ps interval realizing each event as its species' star
// graph (hub = heaviest atom, bond order 1.0). Extraction of this stream
// (threshold < 1, pre-filter) reproduces the generator's events exactly: the
// hub keeps atom index 0 across events, so the whole walk stays one lineage,
// and adjacent events always differ in formula. Returns the frame count.
std::int64_t expand_to_frames(const SyntheticTrajectory& trajectory, const ReactionNetwork& net,
                              std::ostream& out);

// Stationary distribution of a row-stochastic matrix, by power iteration on
// the lazy chain (P+I)/2 to an L1 residual of 1e-12. Throws on non-ergodic
// (not strongly connected) matrices.
std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& transition);

// Analytic top-1 ceiling for forward_1/potential_k (and backward via the
// time-reversed chain) on single-matrix networks.
double bayes_optimal_accuracy(const ReactionNetwork& net, Task task);

// Ceilings for per-bin networks, over the stationary joint (species, bin)
// chain: the aware predictor conditions on the current duration bin, the
// agnostic one sees only the species. aware >= agnostic always.
double bayes_forward_duration_aware(const ReactionNetwork& net);
double bayes_forward_duration_agnostic(const ReactionNetwork& net);

}  // namespace evomd
