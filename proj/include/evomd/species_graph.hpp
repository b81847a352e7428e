#pragma once

#include <vector>

#include "evomd/formula.hpp"
#include "evomd/frames.hpp"

namespace evomd {

// One maximal connected set of atoms under a frame's post-threshold bonds.
struct Component {
    std::vector<int> atom_indices;  // sorted ascending
    CanonicalFormula formula;

    bool operator==(const Component&) const = default;
};

// Partition of the frame's atoms into connected components, ordered by each
// component's smallest atom index. Isolated atoms form singleton components.
std::vector<Component> connected_components(const Frame& frame);

}  // namespace evomd
