#pragma once

// Finite Kripke models with a ternary computability relation: a triple
// (source, program, target) states that running the program world on the
// source world may yield the target world.  Forcing follows the usual
// clauses; a modality phi |> psi holds at w when every source that forces
// phi and has a nonempty image under w reaches some target forcing psi.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rhd/formula.hpp"

namespace rhd {

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Triple {
    std::string source, program, target;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct KripkeModel {
    std::vector<std::string> worlds;                       // nonempty, unique
    std::set<Triple> triples;
    std::map<std::string, std::set<std::string>> valuation;  // absent -> false

    bool hasWorld(const std::string& w) const {
        for (const auto& x : worlds)
            if (x == w) return true;
        return false;
    }

    size_t worldIndex(const std::string& w) const {
        for (size_t i = 0; i < worlds.size(); ++i)
            if (worlds[i] == w) return i;
        throw ModelError("unknown world identifier: " + w);
    }

    // structural well-formedness; throws on dangling identifiers
    void validate() const {
        if (worlds.empty()) throw ModelError("model has no worlds");
        std::set<std::string> seen(worlds.begin(), worlds.end());
        if (seen.size() != worlds.size())
            throw ModelError("duplicate world identifier");
        for (const auto& t : triples)
            if (!seen.count(t.source) || !seen.count(t.program) ||
                !seen.count(t.target))
                throw ModelError("triple references unknown world");
        for (const auto& [var, ws] : valuation)
            for (const auto& w : ws)
                if (!seen.count(w))
                    throw ModelError("valuation of '" + var +
                                     "' references unknown world: " + w);
    }

    friend bool operator==(const KripkeModel& a, const KripkeModel& b) {
        std::set<std::string> wa(a.worlds.begin(), a.worlds.end());
        std::set<std::string> wb(b.worlds.begin(), b.worlds.end());
        return wa == wb && a.triples == b.triples && a.valuation == b.valuation;
    }
};

inline bool isDeterministic(const KripkeModel& m) {
    std::set<std::pair<std::string, std::string>> seen;  // (program, source)
    for (const auto& t : m.triples)
        if (!seen.insert({t.program, t.source}).second) return false;
    return true;
}

// Memoizing forcing evaluator for one model.  Entries are keyed by
// (world index, position in the root formula's subformula list), so a table
// answers queries for any subformula of its root.
class ForcingTable {
    const KripkeModel& m_;
    std::vector<Formula> subfs_;
    std::unordered_map<Formula, size_t, FormulaHash> subIndex_;
    std::vector<std::vector<int8_t>> memo_;  // [world][formula] -1 unknown
    // program index -> source index -> target indices
    std::vector<std::map<size_t, std::vector<size_t>>> image_;
    std::vector<std::vector<char>> varTable_;  // [world] x [var id]
    std::map<std::string, size_t> varIds_;

public:
    ForcingTable(const KripkeModel& m, const Formula& root) : m_(m) {
        m.validate();
        auto subs = subformulas(root);
        subfs_.assign(subs.begin(), subs.end());
        for (size_t i = 0; i < subfs_.size(); ++i) subIndex_[subfs_[i]] = i;
        memo_.assign(m.worlds.size(),
                     std::vector<int8_t>(subfs_.size(), -1));

        image_.resize(m.worlds.size());
        for (const auto& t : m.triples)
            image_[m.worldIndex(t.program)][m.worldIndex(t.source)].push_back(
                m.worldIndex(t.target));

        for (const auto& [var, ws] : m.valuation) {
            size_t id = varIds_.emplace(var, varIds_.size()).first->second;
            (void)id;
        }
        varTable_.assign(m.worlds.size(),
                         std::vector<char>(varIds_.size(), 0));
        for (const auto& [var, ws] : m.valuation)
            for (const auto& w : ws)
                varTable_[m.worldIndex(w)][varIds_.at(var)] = 1;
    }

    const KripkeModel& model() const { return m_; }

    bool forces(const std::string& world, const Formula& phi) {
        return forcesAt(m_.worldIndex(world), phi);
    }

    bool forcesAt(size_t w, const Formula& phi) {
        auto it = subIndex_.find(phi);
        if (it == subIndex_.end())
            throw std::invalid_argument(
                "formula is not a subformula of this table's root");
        return eval(w, phi, it->second);
    }

    // memo snapshot for transparency checks
    std::optional<bool> cached(size_t w, const Formula& phi) const {
        auto it = subIndex_.find(phi);
        if (it == subIndex_.end()) return std::nullopt;
        int8_t v = memo_[w][it->second];
        if (v < 0) return std::nullopt;
        return v == 1;
    }

private:
    bool eval(size_t w, const Formula& phi, size_t idx) {
        int8_t& slot = memo_[w][idx];
        if (slot >= 0) return slot == 1;
        bool r = false;
        switch (phi.kind()) {
            case Formula::Kind::Bottom:
                r = false;
                break;
            case Formula::Kind::Var: {
                auto it = varIds_.find(phi.varName());
                r = it != varIds_.end() && varTable_[w][it->second];
                break;
            }
            case Formula::Kind::Implies:
                r = !forcesAt(w, phi.lhs()) || forcesAt(w, phi.rhs());
                break;
            case Formula::Kind::Rhd: {
                r = true;
                for (const auto& [src, targets] : image_[w]) {
                    if (targets.empty() || !forcesAt(src, phi.lhs())) continue;
                    bool hit = false;
                    for (size_t v : targets)
                        if (forcesAt(v, phi.rhs())) { hit = true; break; }
                    if (!hit) { r = false; break; }
                }
                break;
            }
        }
        slot = r ? 1 : 0;
        return r;
    }
};

inline bool forces(const KripkeModel& m, const std::string& world,
                   const Formula& phi) {
    ForcingTable t(m, phi);
    return t.forces(world, phi);
}

inline bool validInModel(const KripkeModel& m, const Formula& phi) {
    ForcingTable t(m, phi);
    for (size_t w = 0; w < m.worlds.size(); ++w)
        if (!t.forcesAt(w, phi)) return false;
    return true;
}

namespace detail {

// self-contained generator so seeded outputs are identical across platforms
struct Prng {
    uint64_t s[4];
    explicit Prng(uint64_t seed) {
        // splitmix64 expansion
        for (auto& x : s) {
            seed += 0x9e3779b97f4a7c15ULL;
            uint64_t z = seed;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            x = z ^ (z >> 31);
        }
    }
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t next() {  // xoshiro256**
        uint64_t result = rotl(s[1] * 5, 7) * 9;
        uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }
    double nextDouble() { return (next() >> 11) * 0x1.0p-53; }
    size_t nextIndex(size_t n) { return static_cast<size_t>(next() % n); }
};

}  // namespace detail

// Reproducible pseudo-random model.  With the deterministic flag, each
// (program, source) pair keeps at most one target, chosen uniformly among
// the drawn candidates.
inline KripkeModel randomModel(size_t nWorlds, double density,
                               const std::vector<std::string>& vars,
                               uint64_t seed, bool deterministic) {
    if (nWorlds < 1) throw std::invalid_argument("nWorlds must be >= 1");
    if (density < 0.0 || density > 1.0)
        throw std::invalid_argument("density must be in [0, 1]");
    detail::Prng rng(seed);
    KripkeModel m;
    for (size_t i = 0; i < nWorlds; ++i)
        m.worlds.push_back("w" + std::to_string(i));
    for (size_t p = 0; p < nWorlds; ++p)
        for (size_t u = 0; u < nWorlds; ++u) {
            std::vector<size_t> candidates;
            for (size_t v = 0; v < nWorlds; ++v)
                if (rng.nextDouble() < density) candidates.push_back(v);
            if (deterministic && candidates.size() > 1)
                candidates = {candidates[rng.nextIndex(candidates.size())]};
            for (size_t v : candidates)
                m.triples.insert({m.worlds[u], m.worlds[p], m.worlds[v]});
        }
    for (const auto& var : vars) {
        auto& ws = m.valuation[var];
        for (size_t i = 0; i < nWorlds; ++i)
            if (rng.nextDouble() < 0.5) ws.insert(m.worlds[i]);
    }
    return m;
}

}  // namespace rhd
