#pragma once

// Seeded formula generation for corpus runs.

#include <string>
#include <vector>

#include "rhd/formula.hpp"
#include "rhd/kripke.hpp"

namespace rhd {

inline Formula randomFormula(detail::Prng& rng, int depth,
                             const std::vector<std::string>& vars) {
    auto leaf = [&]() -> Formula {
        size_t c = rng.nextIndex(vars.size() + 2);
        if (c == 0) return Formula::bottom();
        if (c == 1) return Formula::top();
        return Formula::var(vars[c - 2]);
    };
    if (depth <= 0 || rng.nextIndex(4) == 0) return leaf();
    switch (rng.nextIndex(5)) {
        case 0: return Formula::negation(randomFormula(rng, depth - 1, vars));
        case 1: return Formula::implies(randomFormula(rng, depth - 1, vars),
                                        randomFormula(rng, depth - 1, vars));
        case 2: return Formula::conj(randomFormula(rng, depth - 1, vars),
                                     randomFormula(rng, depth - 1, vars));
        case 3: return Formula::disj(randomFormula(rng, depth - 1, vars),
                                     randomFormula(rng, depth - 1, vars));
        default: return Formula::rhd(randomFormula(rng, depth - 1, vars),
                                     randomFormula(rng, depth - 1, vars));
    }
}

// distinct formulas, reproducible for a given seed
inline std::vector<Formula> formulaCorpus(size_t count, uint64_t seed,
                                          int depth,
                                          const std::vector<std::string>& vars) {
    detail::Prng rng(seed);
    std::vector<Formula> out;
    std::set<Formula> seen;
    size_t attempts = 0;
    while (out.size() < count && attempts < count * 200) {
        ++attempts;
        Formula f = randomFormula(rng, depth, vars);
        if (seen.insert(f).second) out.push_back(f);
    }
    if (out.size() < count)
        throw std::runtime_error("not enough distinct formulas at this depth");
    return out;
}

}  // namespace rhd
