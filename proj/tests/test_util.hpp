#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "evomd/kmc.hpp"

namespace evomd_test {

// Unique scratch directory, removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<std::uint64_t> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("evomd-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path file(const std::string& name) const { return path / name; }
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Small single-matrix network over MoS-like species. Rows are biased toward
// one successor so top-1 prediction is well above chance.
inline evomd::ReactionNetwork make_markov_network(int n_species = 4, double dominant = 0.7) {
    static const char* const kSpecies[] = {"MoO",   "MoS",    "MoOS2", "MoS3",  "MoO2",
                                           "MoOS4", "MoS5",   "Mo2S7", "MoO3",  "MoS2"};
    evomd::ReactionNetwork net;
    net.network_id = "test-markov";
    for (int i = 0; i < n_species; ++i)
        net.species.push_back(evomd::parse_formula(kSpecies[i], evomd::FormulaMode::strict));

    // dominant mass on the next species (cyclically), remainder spread evenly
    const double rest = (1.0 - dominant) / static_cast<double>(n_species - 2);
    net.transition.assign(n_species, std::vector<double>(n_species, 0.0));
    for (int i = 0; i < n_species; ++i) {
        for (int j = 0; j < n_species; ++j) {
            if (j == i) continue;
            net.transition[i][j] = j == (i + 1) % n_species ? dominant : rest;
        }
    }

    // duration pmf over 1..40 ps, species-shifted so durations look diverse
    net.duration_pmf.resize(n_species);
    for (int i = 0; i < n_species; ++i) {
        std::vector<double> pmf(40, 0.0);
        double total = 0.0;
        for (int d = 0; d < 40; ++d) {
            pmf[d] = 1.0 / (1.0 + std::abs(d - 5 * (i + 1)));
            total += pmf[d];
        }
        for (auto& p : pmf) p /= total;
        net.duration_pmf[i] = {pmf};
    }
    net.atom_maps.resize(n_species);
    evomd::validate_network(net);
    return net;
}

inline void write_network(const std::filesystem::path& path, const evomd::ReactionNetwork& net) {
    std::ofstream out(path, std::ios::binary);
    out << evomd::network_to_json(net).dump(2) << '\n';
}

}  // namespace evomd_test
