#include "evomd/formula.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "evomd/elements.hpp"
#include "evomd/errors.hpp"

namespace evomd {

std::string CanonicalFormula::render() const {
    std::string out;
    for (const auto& [symbol, count] : terms) {
        out += symbol;
        if (count != 1) out += std::to_string(count);
    }
    return out;
}

std::int64_t CanonicalFormula::count_of(std::string_view element) const {
    for (const auto& [symbol, count] : terms)
        if (symbol == element) return count;
    return 0;
}

std::int64_t CanonicalFormula::atom_count() const {
    std::int64_t n = 0;
    for (const auto& [symbol, count] : terms) n += count;
    return n;
}

bool is_element_symbol(std::string_view s) {
    if (s.empty() || s[0] < 'A' || s[0] > 'Z') return false;
    if (!std::all_of(s.begin() + 1, s.end(), [](char c) { return c >= 'a' && c <= 'z'; })) return false;
    return is_known_element(s);
}

CanonicalFormula parse_formula(std::string_view text, FormulaMode mode) {
    if (text.empty()) throw ValidationError("formula: empty string");

    std::vector<std::pair<std::string, std::int64_t>> groups;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c < 'A' || c > 'Z')
            throw ValidationError("formula '" + std::string(text) + "': expected element symbol at position " +
                                  std::to_string(i));
        std::string symbol(1, c);
        ++i;
        while (i < text.size() && text[i] >= 'a' && text[i] <= 'z') symbol += text[i++];
        if (!is_known_element(symbol))
            throw ValidationError("formula '" + std::string(text) + "': unknown element symbol " + symbol);

        std::int64_t count = 1;
        bool explicit_count = false;
        if (i < text.size() && text[i] >= '0' && text[i] <= '9') {
            explicit_count = true;
            if (text[i] == '0')
                throw ValidationError("formula '" + std::string(text) + "': count with leading zero for element " +
                                      symbol);
            count = 0;
            while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
                if (count > (std::numeric_limits<std::int64_t>::max() - 9) / 10)
                    throw ValidationError("formula '" + std::string(text) + "': count overflow for element " + symbol);
                count = count * 10 + (text[i++] - '0');
            }
        }
        if (mode == FormulaMode::strict && explicit_count && count == 1)
            throw ValidationError("formula '" + std::string(text) + "': explicit count 1 for element " + symbol +
                                  " is not canonical");
        groups.emplace_back(std::move(symbol), count);
    }

    if (mode == FormulaMode::strict) {
        for (std::size_t g = 0; g + 1 < groups.size(); ++g)
            if (groups[g].first > groups[g + 1].first)
                throw ValidationError("formula '" + std::string(text) + "': element " + groups[g + 1].first +
                                      " out of canonical order");
    } else {
        std::sort(groups.begin(), groups.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
    }
    for (std::size_t g = 0; g + 1 < groups.size(); ++g)
        if (groups[g].first == groups[g + 1].first)
            throw ValidationError("formula '" + std::string(text) + "': duplicate element " + groups[g].first);

    return CanonicalFormula{std::move(groups)};
}

CanonicalFormula canonicalize(const std::vector<std::string>& elements) {
    if (elements.empty()) throw ValidationError("canonicalize: empty element multiset");
    std::map<std::string, std::int64_t> counts;
    for (const auto& e : elements) {
        if (!is_element_symbol(e)) throw ValidationError("canonicalize: invalid element symbol '" + e + "'");
        ++counts[e];
    }
    CanonicalFormula f;
    f.terms.assign(counts.begin(), counts.end());
    return f;
}

std::vector<std::string> formula_elements(const CanonicalFormula& formula) {
    std::vector<std::string> out;
    for (const auto& [symbol, count] : formula.terms)
        for (std::int64_t k = 0; k < count; ++k) out.push_back(symbol);
    return out;
}

std::vector<std::int64_t> composition_vector(const CanonicalFormula& formula,
                                             const std::vector<std::string>& universe) {
    std::vector<std::int64_t> vec(universe.size(), 0);
    for (const auto& [symbol, count] : formula.terms) {
        const auto it = std::find(universe.begin(), universe.end(), symbol);
        if (it == universe.end())
            throw ValidationError("composition_vector: element " + symbol + " not in universe");
        vec[static_cast<std::size_t>(it - universe.begin())] = count;
    }
    return vec;
}

std::string nearest_formula(const std::vector<double>& vec,
                            const std::vector<std::string>& vocabulary,
                            const std::vector<std::string>& universe) {
    if (vocabulary.empty()) throw ValidationError("nearest_formula: empty vocabulary");
    if (vec.size() != universe.size())
        throw ValidationError("nearest_formula: vector length does not match universe");

    std::vector<std::string> vocab_sorted(vocabulary);
    std::sort(vocab_sorted.begin(), vocab_sorted.end());

    std::string best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (const auto& name : vocab_sorted) {
        const auto counts = composition_vector(parse_formula(name), universe);
        double d2 = 0;
        for (std::size_t i = 0; i < vec.size(); ++i) {
            const double d = vec[i] - static_cast<double>(counts[i]);
            d2 += d * d;
        }
        if (d2 < best_d2) {  // ties keep the earlier (lexicographically smaller) name
            best_d2 = d2;
            best = name;
        }
    }
    return best;
}

}  // namespace evomd
