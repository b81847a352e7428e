#include "evomd/kmc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "evomd/elements.hpp"
#include "evomd/errors.hpp"
#include "evomd/jsonl.hpp"
#include "evomd/rng.hpp"

namespace evomd {

using nlohmann::json;

const std::vector<std::vector<double>>& ReactionNetwork::transition_for_bin(int bin) const {
    if (!per_bin_transitions()) return transition;
    return transition_by_bin.at(static_cast<std::size_t>(bin));
}

const std::vector<double>& ReactionNetwork::duration_pmf_for(int species_index, int context_bin) const {
    const auto& per_species = duration_pmf.at(static_cast<std::size_t>(species_index));
    if (per_species.size() == 1) return per_species[0];
    return per_species.at(static_cast<std::size_t>(context_bin));
}

std::vector<std::string> ReactionNetwork::atom_map_for(int species_index) const {
    const auto idx = static_cast<std::size_t>(species_index);
    if (idx < atom_maps.size() && !atom_maps[idx].empty()) return atom_maps[idx];
    return formula_elements(species.at(idx));
}

namespace {

void validate_row_stochastic(const std::vector<std::vector<double>>& m, int n, const std::string& name) {
    if (static_cast<int>(m.size()) != n)
        throw ValidationError(name + " must have " + std::to_string(n) + " rows");
    for (int r = 0; r < n; ++r) {
        if (static_cast<int>(m[r].size()) != n)
            throw ValidationError(name + " row " + std::to_string(r) + " must have " + std::to_string(n) +
                                  " entries");
        double sum = 0.0;
        for (int c = 0; c < n; ++c) {
            const double p = m[r][c];
            if (!(p >= 0.0) || !std::isfinite(p))
                throw ValidationError(name + "[" + std::to_string(r) + "][" + std::to_string(c) +
                                      "] must be a finite non-negative probability");
            sum += p;
        }
        if (m[r][r] != 0.0)
            throw ValidationError(name + " diagonal must be zero (adjacent events must differ); row " +
                                  std::to_string(r) + " has self-probability " + std::to_string(m[r][r]));
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError(name + " row " + std::to_string(r) + " sums to " + std::to_string(sum) +
                                  ", expected 1");
    }
}

void validate_pmf(const std::vector<double>& pmf, const std::string& name) {
    if (pmf.empty()) throw ValidationError(name + " must be nonempty");
    double sum = 0.0;
    for (double p : pmf) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw ValidationError(name + " entries must be finite non-negative probabilities");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError(name + " sums to " + std::to_string(sum) + ", expected 1");
}

// Inverse-CDF draw; pmf need not be exactly normalized thanks to the final fallback.
std::size_t sample_index(std::mt19937_64& rng, const std::vector<double>& pmf) {
    const double u = uniform_unit(rng);
    double cum = 0.0;
    std::size_t last_positive = 0;
    bool any = false;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        if (pmf[k] > 0.0) {
            last_positive = k;
            any = true;
        }
        cum += pmf[k];
        if (u < cum) return k;
    }
    if (!any) throw ValidationError("cannot sample from an all-zero distribution");
    return last_positive;
}

}  // namespace

void validate_network(const ReactionNetwork& net) {
    const int n = net.species_count();
    if (n < 2) throw ValidationError("network needs at least 2 species");
    std::set<std::string> names;
    for (const auto& s : net.species) {
        if (s.terms.empty()) throw ValidationError("empty species formula");
        if (!names.insert(s.render()).second)
            throw ValidationError("duplicate species " + s.render());
    }
    validate_bins(net.bins);

    const bool single = !net.transition.empty();
    const bool per_bin = !net.transition_by_bin.empty();
    if (single == per_bin)
        throw ValidationError("exactly one of transition / transition_by_bin must be given");
    if (single) {
        validate_row_stochastic(net.transition, n, "transition");
    } else {
        if (static_cast<int>(net.transition_by_bin.size()) != net.bins.bin_count())
            throw ValidationError("transition_by_bin must hold one matrix per duration bin (" +
                                  std::to_string(net.bins.bin_count()) + ")");
        for (std::size_t b = 0; b < net.transition_by_bin.size(); ++b)
            validate_row_stochastic(net.transition_by_bin[b], n,
                                    "transition_by_bin[" + std::to_string(b) + "]");
    }

    if (static_cast<int>(net.duration_pmf.size()) != n)
        throw ValidationError("duration_pmf must have one entry per species");
    for (int s = 0; s < n; ++s) {
        const auto& per_species = net.duration_pmf[static_cast<std::size_t>(s)];
        if (per_species.size() != 1 && static_cast<int>(per_species.size()) != net.bins.bin_count())
            throw ValidationError("duration_pmf for " + net.species[static_cast<std::size_t>(s)].render() +
                                  " must hold 1 or " + std::to_string(net.bins.bin_count()) +
                                  " distributions");
        for (std::size_t b = 0; b < per_species.size(); ++b)
            validate_pmf(per_species[b], "duration_pmf for " +
                                             net.species[static_cast<std::size_t>(s)].render() + " (bin " +
                                             std::to_string(b) + ")");
    }

    if (!net.atom_maps.empty()) {
        if (static_cast<int>(net.atom_maps.size()) != n)
            throw ValidationError("atom_maps must have one entry per species (empty entries use the formula)");
        for (int s = 0; s < n; ++s) {
            if (net.atom_maps[static_cast<std::size_t>(s)].empty()) continue;
            const auto got = canonicalize(net.atom_maps[static_cast<std::size_t>(s)]);
            if (!(got == net.species[static_cast<std::size_t>(s)]))
                throw ValidationError("atom map for " + net.species[static_cast<std::size_t>(s)].render() +
                                      " canonicalizes to " + got.render());
        }
    }
}

ReactionNetwork network_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("network config must be a JSON object");
    ReactionNetwork net;
    net.network_id = j.value("network_id", std::string("network"));

    if (!j.contains("species") || !j["species"].is_array() || j["species"].empty())
        throw ValidationError("network config needs a nonempty \"species\" array");
    for (const auto& s : j["species"]) {
        if (!s.is_string()) throw ValidationError("species entries must be strings");
        net.species.push_back(parse_formula(s.get<std::string>(), FormulaMode::lenient));
    }

    auto matrix = [](const json& m, const char* name) {
        if (!m.is_array()) throw ValidationError(std::string(name) + " must be an array of rows");
        std::vector<std::vector<double>> out;
        for (const auto& row : m) {
            if (!row.is_array()) throw ValidationError(std::string(name) + " rows must be arrays");
            std::vector<double> r;
            for (const auto& p : row) {
                if (!p.is_number()) throw ValidationError(std::string(name) + " entries must be numbers");
                r.push_back(p.get<double>());
            }
            out.push_back(std::move(r));
        }
        return out;
    };

    if (j.contains("transition")) net.transition = matrix(j["transition"], "transition");
    if (j.contains("transition_by_bin")) {
        if (!j["transition_by_bin"].is_array())
            throw ValidationError("transition_by_bin must be an array of matrices");
        for (const auto& m : j["transition_by_bin"])
            net.transition_by_bin.push_back(matrix(m, "transition_by_bin"));
    }

    if (j.contains("duration_bin_edges")) {
        net.bins.edges.clear();
        for (const auto& e : j["duration_bin_edges"]) {
            if (!e.is_number_integer()) throw ValidationError("duration_bin_edges must be integers");
            net.bins.edges.push_back(e.get<std::int64_t>());
        }
    }

    if (!j.contains("duration_pmf") || !j["duration_pmf"].is_array())
        throw ValidationError("network config needs a \"duration_pmf\" array (one entry per species)");
    for (const auto& entry : j["duration_pmf"]) {
        if (!entry.is_array() || entry.empty())
            throw ValidationError("duration_pmf entries must be nonempty arrays");
        std::vector<std::vector<double>> per_species;
        if (entry[0].is_array()) {
            for (const auto& pmf : entry) {
                std::vector<double> p;
                for (const auto& v : pmf) p.push_back(v.get<double>());
                per_species.push_back(std::move(p));
            }
        } else {
            std::vector<double> p;
            for (const auto& v : entry) p.push_back(v.get<double>());
            per_species.push_back(std::move(p));
        }
        net.duration_pmf.push_back(std::move(per_species));
    }

    if (j.contains("atom_maps")) {
        for (const auto& m : j["atom_maps"]) {
            std::vector<std::string> atoms;
            for (const auto& a : m) atoms.push_back(a.get<std::string>());
            net.atom_maps.push_back(std::move(atoms));
        }
    }

    validate_network(net);
    return net;
}

json network_to_json(const ReactionNetwork& net) {
    json j;
    j["network_id"] = net.network_id;
    json species = json::array();
    for (const auto& s : net.species) species.push_back(s.render());
    j["species"] = species;
    if (!net.transition.empty()) j["transition"] = net.transition;
    if (!net.transition_by_bin.empty()) j["transition_by_bin"] = net.transition_by_bin;
    j["duration_bin_edges"] = net.bins.edges;
    j["duration_pmf"] = net.duration_pmf;
    if (!net.atom_maps.empty()) j["atom_maps"] = net.atom_maps;
    return j;
}

ReactionNetwork load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed JSON: " + e.what());
    }
    return network_from_json(j);
}

SyntheticTrajectory generate(const ReactionNetwork& net, const std::string& trajectory_id,
                             std::int64_t n_events, std::uint64_t seed) {
    validate_network(net);
    if (n_events <= 0) throw ValidationError("n_events must be positive");

    std::mt19937_64 rng(seed);
    SyntheticTrajectory traj;
    traj.generator_seed = seed;
    traj.network_id = net.network_id;
    traj.events.reserve(static_cast<std::size_t>(n_events));

    auto s = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(net.species_count())));
    int ctx = 0;  // duration-bin context; the first event has no predecessor
    std::int64_t t = 0;
    for (std::int64_t i = 0; i < n_events; ++i) {
        const auto& pmf = net.duration_pmf_for(s, ctx);
        const auto d = static_cast<std::int64_t>(sample_index(rng, pmf)) + 1;
        traj.events.push_back(
            MolecularEvent{trajectory_id, 0, net.species[static_cast<std::size_t>(s)], t, d});
        t += d;
        const int b = duration_bin(net.bins, d);
        s = static_cast<int>(sample_index(rng, net.transition_for_bin(b)[static_cast<std::size_t>(s)]));
        ctx = b;
    }
    return traj;
}

std::vector<SyntheticTrajectory> generate_corpus(const ReactionNetwork& net, int n_trajectories,
                                                 std::int64_t events_per, std::uint64_t seed) {
    if (n_trajectories <= 0) throw ValidationError("n_trajectories must be positive");
    std::vector<SyntheticTrajectory> out;
    out.reserve(static_cast<std::size_t>(n_trajectories));
    for (int k = 0; k < n_trajectories; ++k) {
        std::string num = std::to_string(k);
        while (num.size() < 3) num.insert(num.begin(), '0');
        out.push_back(generate(net, "traj-" + num, events_per, derive_seed(seed, static_cast<std::uint64_t>(k))));
    }
    return out;
}

std::int64_t expand_to_frames(const SyntheticTrajectory& trajectory, const ReactionNetwork& net,
                              std::ostream& out) {
    validate_network(net);
    std::map<std::string, int> species_index;
    for (int s = 0; s < net.species_count(); ++s)
        species_index[net.species[static_cast<std::size_t>(s)].render()] = s;

    // Pre-render each species' frame line around the time field.
    struct Parts {
        std::string before_time;
        std::string after_time;
    };
    std::vector<Parts> parts(static_cast<std::size_t>(net.species_count()));
    const std::string traj_suffix =
        "," + json("trajectory_id").dump() + ":" +
        (trajectory.events.empty() ? json("") : json(trajectory.events.front().trajectory_id)).dump() + "}";
    for (int s = 0; s < net.species_count(); ++s) {
        auto atoms = net.atom_map_for(s);
        // Hub = first atom of maximal atomic number; it takes index 0 so that
        // consecutive events always overlap in at least the hub.
        std::size_t hub = 0;
        for (std::size_t k = 1; k < atoms.size(); ++k)
            if (atomic_number(atoms[k]) > atomic_number(atoms[hub])) hub = k;
        std::swap(atoms[0], atoms[hub]);
        json bonds = json::array();
        for (std::size_t k = 1; k < atoms.size(); ++k)
            bonds.push_back(json::array({0, static_cast<int>(k), 1.0}));
        parts[static_cast<std::size_t>(s)] = Parts{
            "{\"bonds\":" + bonds.dump() + ",\"elements\":" + json(atoms).dump() + ",\"time_ps\":",
            traj_suffix};
    }

    std::int64_t frames = 0;
    for (const auto& e : trajectory.events) {
        auto it = species_index.find(e.formula.render());
        if (it == species_index.end())
            throw ValidationError("event species " + e.formula.render() + " is not in network " +
                                  net.network_id);
        const auto& p = parts[static_cast<std::size_t>(it->second)];
        for (std::int64_t f = 0; f < e.duration_ps; ++f) {
            out << p.before_time << (e.start_ps + f) << p.after_time << '\n';
            ++frames;
        }
    }
    return frames;
}

namespace {

// Directed adjacency of positive transition probability.
std::vector<std::vector<int>> positive_graph(const std::vector<std::vector<double>>& m) {
    const int n = static_cast<int>(m.size());
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] > 0.0)
                adj[static_cast<std::size_t>(i)].push_back(j);
    return adj;
}

std::vector<bool> reachable_from(const std::vector<std::vector<int>>& adj, int start) {
    std::vector<bool> seen(adj.size(), false);
    std::deque<int> queue{start};
    seen[static_cast<std::size_t>(start)] = true;
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (int w : adj[static_cast<std::size_t>(v)])
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = true;
                queue.push_back(w);
            }
    }
    return seen;
}

bool strongly_connected(const std::vector<std::vector<double>>& m) {
    const int n = static_cast<int>(m.size());
    auto fwd = positive_graph(m);
    std::vector<std::vector<int>> bwd(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j : fwd[static_cast<std::size_t>(i)]) bwd[static_cast<std::size_t>(j)].push_back(i);
    auto a = reachable_from(fwd, 0);
    auto b = reachable_from(bwd, 0);
    for (int v = 0; v < n; ++v)
        if (!a[static_cast<std::size_t>(v)] || !b[static_cast<std::size_t>(v)]) return false;
    return true;
}

// Power iteration on the lazy chain (P+I)/2: same stationary vector, but
// aperiodic, so it converges even for periodic P (e.g. 2-cycles).
std::vector<double> power_iterate(const std::vector<std::vector<double>>& m) {
    const std::size_t n = m.size();
    std::vector<double> pi(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
    for (int iter = 0; iter < 1000000; ++iter) {
        for (std::size_t j = 0; j < n; ++j) next[j] = 0.5 * pi[j];
        for (std::size_t i = 0; i < n; ++i) {
            if (pi[i] == 0.0) continue;
            const auto& row = m[i];
            for (std::size_t j = 0; j < n; ++j) next[j] += 0.5 * pi[i] * row[j];
        }
        double norm = 0.0;
        for (double v : next) norm += v;
        for (auto& v : next) v /= norm;
        double residual = 0.0;
        for (std::size_t j = 0; j < n; ++j) residual += std::abs(next[j] - pi[j]);
        pi.swap(next);
        if (residual <= 1e-12) return pi;
    }
    throw StageError("stationary", "power iteration did not reach 1e-12 residual");
}

// Unique closed communicating class of a row-stochastic matrix; error if the
// chain has two or more. Mutual-reachability construction (state spaces here
// are tiny).
std::vector<int> terminal_class(const std::vector<std::vector<double>>& m) {
    const int n = static_cast<int>(m.size());
    auto adj = positive_graph(m);
    std::vector<std::vector<bool>> reach;
    reach.reserve(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) reach.push_back(reachable_from(adj, v));

    std::vector<int> cls(static_cast<std::size_t>(n), -1);
    int n_classes = 0;
    for (int v = 0; v < n; ++v) {
        if (cls[static_cast<std::size_t>(v)] != -1) continue;
        const int id = n_classes++;
        for (int w = v; w < n; ++w)
            if (reach[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)] &&
                reach[static_cast<std::size_t>(w)][static_cast<std::size_t>(v)])
                cls[static_cast<std::size_t>(w)] = id;
    }

    std::vector<bool> closed(static_cast<std::size_t>(n_classes), true);
    for (int v = 0; v < n; ++v)
        for (int w : adj[static_cast<std::size_t>(v)])
            if (cls[static_cast<std::size_t>(v)] != cls[static_cast<std::size_t>(w)])
                closed[static_cast<std::size_t>(cls[static_cast<std::size_t>(v)])] = false;

    int terminal = -1;
    for (int c = 0; c < n_classes; ++c) {
        if (!closed[static_cast<std::size_t>(c)]) continue;
        if (terminal != -1)
            throw ValidationError("chain has multiple closed classes; stationary distribution not unique");
        terminal = c;
    }
    std::vector<int> states;
    for (int v = 0; v < n; ++v)
        if (cls[static_cast<std::size_t>(v)] == terminal) states.push_back(v);
    return states;
}

}  // namespace

std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& transition) {
    const int n = static_cast<int>(transition.size());
    if (n == 0) throw ValidationError("empty transition matrix");
    for (int r = 0; r < n; ++r) {
        if (static_cast<int>(transition[static_cast<std::size_t>(r)].size()) != n)
            throw ValidationError("transition matrix must be square");
        double sum = 0.0;
        for (double p : transition[static_cast<std::size_t>(r)]) {
            if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("transition entries must be probabilities");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError("transition row " + std::to_string(r) + " is not stochastic");
    }
    if (!strongly_connected(transition))
        throw ValidationError("transition matrix is not ergodic (not strongly connected)");
    return power_iterate(transition);
}

double bayes_optimal_accuracy(const ReactionNetwork& net, Task task) {
    validate_network(net);
    if (net.per_bin_transitions())
        throw ValidationError(
            "per-bin network: use bayes_forward_duration_aware / bayes_forward_duration_agnostic");
    const auto pi = stationary_distribution(net.transition);
    const std::size_t n = net.transition.size();

    if (task == Task::forward_1 || task == Task::potential_k) {
        double acc = 0.0;
        for (std::size_t s = 0; s < n; ++s)
            acc += pi[s] * *std::max_element(net.transition[s].begin(), net.transition[s].end());
        return acc;
    }
    if (task == Task::backward) {
        // Sum_t max_s pi(s) P[s][t]: the reversed chain's one-step ceiling.
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            double best = 0.0;
            for (std::size_t s = 0; s < n; ++s) best = std::max(best, pi[s] * net.transition[s][t]);
            acc += best;
        }
        return acc;
    }
    throw ValidationError("no closed-form ceiling for task " + std::string(task_name(task)));
}

namespace {

// Joint chain over (species, current-duration-bin). Returns the stationary
// distribution restricted to the unique closed class (transient joint states
// such as bins a species never realizes carry zero mass).
std::vector<double> joint_stationary(const ReactionNetwork& net) {
    const int n = net.species_count();
    const int nbins = net.bins.bin_count();
    const int states = n * nbins;

    // bin_prob[t][ctx][b'] = P(bin(duration) = b' | species t, context ctx)
    std::vector<std::vector<std::vector<double>>> bin_prob(
        static_cast<std::size_t>(n),
        std::vector<std::vector<double>>(static_cast<std::size_t>(nbins),
                                         std::vector<double>(static_cast<std::size_t>(nbins), 0.0)));
    for (int t = 0; t < n; ++t)
        for (int ctx = 0; ctx < nbins; ++ctx) {
            const auto& pmf = net.duration_pmf_for(t, ctx);
            for (std::size_t d = 0; d < pmf.size(); ++d)
                bin_prob[static_cast<std::size_t>(t)][static_cast<std::size_t>(ctx)][static_cast<std::size_t>(
                    duration_bin(net.bins, static_cast<std::int64_t>(d) + 1))] += pmf[d];
        }

    auto idx = [nbins](int s, int b) { return static_cast<std::size_t>(s * nbins + b); };
    std::vector<std::vector<double>> q(static_cast<std::size_t>(states),
                                       std::vector<double>(static_cast<std::size_t>(states), 0.0));
    for (int s = 0; s < n; ++s)
        for (int b = 0; b < nbins; ++b) {
            const auto& row = net.transition_for_bin(b)[static_cast<std::size_t>(s)];
            for (int t = 0; t < n; ++t) {
                if (row[static_cast<std::size_t>(t)] == 0.0) continue;
                for (int b2 = 0; b2 < nbins; ++b2) {
                    const double p = row[static_cast<std::size_t>(t)] *
                                     bin_prob[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)]
                                             [static_cast<std::size_t>(b2)];
                    if (p > 0.0) q[idx(s, b)][idx(t, b2)] += p;
                }
            }
        }

    const auto closed = terminal_class(q);
    const std::size_t m = closed.size();
    std::vector<std::vector<double>> sub(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            sub[i][j] = q[static_cast<std::size_t>(closed[i])][static_cast<std::size_t>(closed[j])];
    const auto sub_pi = power_iterate(sub);

    std::vector<double> pi(static_cast<std::size_t>(states), 0.0);
    for (std::size_t i = 0; i < m; ++i) pi[static_cast<std::size_t>(closed[i])] = sub_pi[i];
    return pi;
}

}  // namespace

double bayes_forward_duration_aware(const ReactionNetwork& net) {
    validate_network(net);
    const int n = net.species_count();
    const int nbins = net.bins.bin_count();
    const auto pi = joint_stationary(net);
    double acc = 0.0;
    for (int s = 0; s < n; ++s)
        for (int b = 0; b < nbins; ++b) {
            const double mass = pi[static_cast<std::size_t>(s * nbins + b)];
            if (mass == 0.0) continue;
            const auto& row = net.transition_for_bin(b)[static_cast<std::size_t>(s)];
            acc += mass * *std::max_element(row.begin(), row.end());
        }
    return acc;
}

double bayes_forward_duration_agnostic(const ReactionNetwork& net) {
    validate_network(net);
    const int n = net.species_count();
    const int nbins = net.bins.bin_count();
    const auto pi = joint_stationary(net);
    double acc = 0.0;
    for (int s = 0; s < n; ++s) {
        double best = 0.0;
        for (int t = 0; t < n; ++t) {
            double mass = 0.0;  // joint probability of (current = s, next = t)
            for (int b = 0; b < nbins; ++b)
                mass += pi[static_cast<std::size_t>(s * nbins + b)] *
                        net.transition_for_bin(b)[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)];
            best = std::max(best, mass);
        }
        acc += best;
    }
    return acc;
}

}  // namespace evomd
