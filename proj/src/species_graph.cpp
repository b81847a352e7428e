#include "evomd/species_graph.hpp"

#include <algorithm>

namespace evomd {

std::vector<Component> connected_components(const Frame& frame) {
    const int n = static_cast<int>(frame.elements.size());
    std::vector<std::vector<int>> adj(n);
    for (const auto& b : frame.bonds) {
        adj[b.i].push_back(b.j);
        adj[b.j].push_back(b.i);
    }

    std::vector<Component> out;
    std::vector<bool> visited(n, false);
    std::vector<int> stack;
    // Scanning atoms in index order makes the result ordered by smallest member.
    for (int start = 0; start < n; ++start) {
        if (visited[start]) continue;
        Component comp;
        stack.push_back(start);
        visited[start] = true;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            comp.atom_indices.push_back(v);
            for (int w : adj[v]) {
                if (!visited[w]) {
                    visited[w] = true;
                    stack.push_back(w);
                }
            }
        }
        std::sort(comp.atom_indices.begin(), comp.atom_indices.end());
        std::vector<std::string> symbols;
        symbols.reserve(comp.atom_indices.size());
        for (int idx : comp.atom_indices) symbols.push_back(frame.elements[idx]);
        comp.formula = canonicalize(symbols);
        out.push_back(std::move(comp));
    }
    return out;
}

}  // namespace evomd
