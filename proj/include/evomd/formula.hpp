#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace evomd {

// Molecular formula with element symbols in strict lexicographic order
// (the ordering that reproduces species names like MoOS2: Mo < O < S).
// Rendering omits a count of 1.
struct CanonicalFormula {
    std::vector<std::pair<std::string, std::int64_t>> terms;

    std::string render() const;
    std::int64_t count_of(std::string_view element) const;  // 0 when absent
    std::int64_t atom_count() const;

    auto operator<=>(const CanonicalFormula&) const = default;
};

// [A-Z][a-z]* and present in the periodic table.
bool is_element_symbol(std::string_view s);

// strict: input must be the exact canonical rendering (used to score model
// outputs for syntactic validity). lenient: element groups may appear in any
// order and counts of 1 may be written out; used for operator-supplied text.
// Duplicate elements are rejected in both modes.
enum class FormulaMode { strict, lenient };

CanonicalFormula parse_formula(std::string_view text, FormulaMode mode = FormulaMode::strict);

// Multiset of element symbols -> canonical formula.
CanonicalFormula canonicalize(const std::vector<std::string>& elements);

// Inverse of canonicalize: formula expanded to its atom multiset, in term order.
std::vector<std::string> formula_elements(const CanonicalFormula& formula);

// Per-element atom counts over a fixed ordered universe.
std::vector<std::int64_t> composition_vector(const CanonicalFormula& formula,
                                             const std::vector<std::string>& universe);

// Vocabulary formula whose composition vector is nearest to `vec` in L2.
// Ties go to the lexicographically smaller formula string.
std::string nearest_formula(const std::vector<double>& vec,
                            const std::vector<std::string>& vocabulary,
                            const std::vector<std::string>& universe);

}  // namespace evomd
