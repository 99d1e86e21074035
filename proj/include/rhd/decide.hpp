#pragma once

// Validity decision for the logics of nondeterministic (R) and deterministic
// (Rd) partial computable functions, by Hintikka-type elimination over the
// closure of the input formula.  A type is a propositionally coherent subset
// of the closure; elimination removes types whose failed modalities cannot
// be witnessed by surviving types; a surviving type containing the
// sim-negation of the input yields an explicit countermodel, which is always
// re-checked against the forcing semantics before being returned.
//
// The rforall mode is the universal reading of the modality for
// nondeterministic functions; it is decided with the deterministic
// machinery, whose axioms it validates.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rhd/formula.hpp"
#include "rhd/kripke.hpp"

namespace rhd {

enum class LogicMode { R, Rd, RForall };

inline LogicMode effectiveMode(LogicMode m) {
    return m == LogicMode::RForall ? LogicMode::Rd : m;
}

inline std::string modeName(LogicMode m) {
    switch (m) {
        case LogicMode::R: return "r";
        case LogicMode::Rd: return "rd";
        case LogicMode::RForall: return "rforall";
    }
    return "?";
}

namespace detail {

class Bitset {
    std::vector<uint64_t> w_;
    size_t n_ = 0;

public:
    Bitset() = default;
    explicit Bitset(size_t n) : w_((n + 63) / 64, 0), n_(n) {}
    size_t size() const { return n_; }
    bool test(size_t i) const { return (w_[i >> 6] >> (i & 63)) & 1; }
    void set(size_t i, bool v = true) {
        if (v)
            w_[i >> 6] |= uint64_t{1} << (i & 63);
        else
            w_[i >> 6] &= ~(uint64_t{1} << (i & 63));
    }
    size_t count() const {
        size_t c = 0;
        for (uint64_t x : w_) c += static_cast<size_t>(__builtin_popcountll(x));
        return c;
    }
    friend bool operator==(const Bitset&, const Bitset&) = default;
};

}  // namespace detail

// Candidate world description: membership bits over the closure positions.
struct WorldType {
    detail::Bitset members;

    bool contains(size_t closureIdx) const { return members.test(closureIdx); }
    friend bool operator==(const WorldType&, const WorldType&) = default;
};

namespace detail {

struct RhdPos {
    size_t self, lhs, rhs;
};

inline std::vector<RhdPos> rhdPositions(const ClosureSet& c) {
    std::vector<RhdPos> out;
    for (size_t i = 0; i < c.size(); ++i) {
        const Formula& f = c.at(i);
        if (f.kind() == Formula::Kind::Rhd)
            out.push_back({i, c.indexOf(f.lhs()).value(),
                           c.indexOf(f.rhs()).value()});
    }
    return out;
}

inline std::vector<size_t> atomPositions(const ClosureSet& c) {
    std::vector<size_t> out;
    for (size_t i = 0; i < c.size(); ++i) {
        auto k = c.at(i).kind();
        if (k == Formula::Kind::Var || k == Formula::Kind::Rhd)
            out.push_back(i);
    }
    return out;
}

}  // namespace detail

// All coherent types: membership of compound members is determined by the
// free choice of variable and modality bits.  Enumeration order (descending
// atom mask) is the canonical order used for every tie-break downstream.
inline std::vector<WorldType> hintikkaTypes(const ClosureSet& c) {
    const auto atoms = detail::atomPositions(c);
    if (atoms.size() > 16)
        throw std::invalid_argument(
            "type enumeration limited to 16 free atoms, formula has " +
            std::to_string(atoms.size()));
    std::vector<WorldType> out;
    const uint64_t total = uint64_t{1} << atoms.size();
    for (uint64_t down = 0; down < total; ++down) {
        const uint64_t mask = total - 1 - down;
        WorldType t{detail::Bitset(c.size())};
        std::vector<int8_t> memo(c.size(), -1);
        std::map<size_t, bool> atomBit;
        for (size_t j = 0; j < atoms.size(); ++j)
            atomBit[atoms[j]] = (mask >> j) & 1;
        // membership, recursively through implications
        std::function<bool(size_t)> member = [&](size_t i) -> bool {
            if (memo[i] >= 0) return memo[i] == 1;
            const Formula& f = c.at(i);
            bool r = false;
            switch (f.kind()) {
                case Formula::Kind::Bottom: r = false; break;
                case Formula::Kind::Var:
                case Formula::Kind::Rhd: r = atomBit.at(i); break;
                case Formula::Kind::Implies:
                    r = !member(c.indexOf(f.lhs()).value()) ||
                        member(c.indexOf(f.rhs()).value());
                    break;
            }
            memo[i] = r ? 1 : 0;
            return r;
        };
        for (size_t i = 0; i < c.size(); ++i) t.members.set(i, member(i));
        out.push_back(std::move(t));
    }
    return out;
}

// invariant checks for a candidate type (used by tests and preconditions)
inline bool validWorldType(const ClosureSet& c, const WorldType& t) {
    for (size_t i = 0; i < c.size(); ++i) {
        const Formula& f = c.at(i);
        if (f.kind() == Formula::Kind::Bottom && t.contains(i)) return false;
        if (f.kind() == Formula::Kind::Implies) {
            bool want = !t.contains(c.indexOf(f.lhs()).value()) ||
                        t.contains(c.indexOf(f.rhs()).value());
            if (t.contains(i) != want) return false;
        }
        size_t neg = c.indexOf(simNeg(f)).value();
        if (t.contains(i) == t.contains(neg)) return false;
    }
    return true;
}

namespace detail {

// Witness for one failed modality of t: a source type containing the left
// operand and a target set that misses the right operand everywhere while
// serving every modality of t applicable to that source.  Deterministic
// modes need a single target.
struct DemandWitness {
    size_t sourceType;           // index into S
    std::vector<size_t> targets; // indices into S, nonempty
};

inline std::optional<DemandWitness> demandWitness(
    const ClosureSet& c, const WorldType& t, const std::vector<WorldType>& S,
    LogicMode mode, const RhdPos& demand, const std::vector<RhdPos>& rhds) {
    const bool det = effectiveMode(mode) == LogicMode::Rd;
    for (size_t ui = 0; ui < S.size(); ++ui) {
        const WorldType& u = S[ui];
        if (!u.contains(demand.lhs)) continue;
        // right operands of t's modalities whose left operand holds at u
        std::vector<size_t> constraints;
        for (const auto& rp : rhds)
            if (t.contains(rp.self) && u.contains(rp.lhs))
                constraints.push_back(rp.rhs);
        if (det) {
            bool ok = false;
            size_t pick = 0;
            for (size_t vi = 0; vi < S.size() && !ok; ++vi) {
                if (S[vi].contains(demand.rhs)) continue;
                bool all = true;
                for (size_t psi : constraints)
                    if (!S[vi].contains(psi)) { all = false; break; }
                if (all) { ok = true; pick = vi; }
            }
            if (ok) return DemandWitness{ui, {pick}};
            continue;
        }
        std::vector<size_t> targets;
        bool ok = true;
        for (size_t psi : constraints) {
            bool found = false;
            for (size_t vi = 0; vi < S.size(); ++vi) {
                if (S[vi].contains(demand.rhs)) continue;
                if (!S[vi].contains(psi)) continue;
                found = true;
                if (std::find(targets.begin(), targets.end(), vi) ==
                    targets.end())
                    targets.push_back(vi);
                break;
            }
            if (!found) { ok = false; break; }
        }
        if (!ok) continue;
        if (targets.empty()) {
            bool found = false;
            for (size_t vi = 0; vi < S.size(); ++vi)
                if (!S[vi].contains(demand.rhs)) {
                    targets.push_back(vi);
                    found = true;
                    break;
                }
            if (!found) continue;
        }
        return DemandWitness{ui, std::move(targets)};
    }
    return std::nullopt;
}

}  // namespace detail

inline bool demandsRealizable(const ClosureSet& c, const WorldType& t,
                              const std::vector<WorldType>& S,
                              LogicMode mode) {
    const auto rhds = detail::rhdPositions(c);
    for (const auto& rp : rhds) {
        if (t.contains(rp.self)) continue;
        if (!detail::demandWitness(c, t, S, mode, rp, rhds)) return false;
    }
    return true;
}

// greatest subset of the given types on which every type's demands are
// realizable; iterated removal, at most |types| rounds
inline std::vector<WorldType> eliminate(const ClosureSet& c,
                                        std::vector<WorldType> types,
                                        LogicMode mode) {
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<WorldType> kept;
        kept.reserve(types.size());
        for (const auto& t : types)
            if (demandsRealizable(c, t, types, mode))
                kept.push_back(t);
            else
                changed = true;
        types = std::move(kept);
    }
    return types;
}

struct Countermodel {
    KripkeModel model;
    std::string world;
    std::vector<size_t> worldTypes;  // survivor index per world, model order
};

// Explicit model over the surviving types.  Each needed type gets one main
// world; each (type, failed modality) gets a fresh source world wired to the
// witness targets under every world of that type.  Every other source has an
// empty image, so membership in a type and forcing at its worlds coincide.
inline Countermodel buildCountermodel(const ClosureSet& c,
                                      const std::vector<WorldType>& survivors,
                                      const WorldType& witness,
                                      LogicMode mode) {
    const auto rhds = detail::rhdPositions(c);
    size_t witnessIdx = survivors.size();
    for (size_t i = 0; i < survivors.size(); ++i)
        if (survivors[i] == witness) { witnessIdx = i; break; }
    if (witnessIdx == survivors.size())
        throw std::invalid_argument("witness type is not among the survivors");

    // failed modalities per survivor, with chosen witnesses (computed lazily)
    std::vector<std::optional<std::vector<
        std::pair<detail::RhdPos, detail::DemandWitness>>>>
        choices(survivors.size());
    auto demandsOf = [&](size_t ti) -> const std::vector<
                          std::pair<detail::RhdPos, detail::DemandWitness>>& {
        if (!choices[ti]) {
            std::vector<std::pair<detail::RhdPos, detail::DemandWitness>> ds;
            for (const auto& rp : rhds) {
                if (survivors[ti].contains(rp.self)) continue;
                auto w = detail::demandWitness(c, survivors[ti], survivors,
                                               mode, rp, rhds);
                if (!w)
                    throw std::logic_error(
                        "unrealizable demand in a surviving type");
                ds.emplace_back(rp, std::move(*w));
            }
            choices[ti] = std::move(ds);
        }
        return *choices[ti];
    };

    struct WorldRec {
        std::string id;
        size_t typeIdx;
    };
    std::vector<WorldRec> worldList;
    std::map<size_t, std::string> mainOf;                    // type -> world id
    std::map<std::pair<size_t, size_t>, std::string> srcOf;  // (type, demand)
    std::set<size_t> instantiated;

    std::function<void(size_t)> instantiate = [&](size_t ti) {
        if (!instantiated.insert(ti).second) return;
        const auto& ds = demandsOf(ti);
        for (size_t k = 0; k < ds.size(); ++k) {
            const auto& wit = ds[k].second;
            std::string id =
                "t" + std::to_string(ti) + "_d" + std::to_string(k);
            srcOf[{ti, k}] = id;
            worldList.push_back({id, wit.sourceType});
            instantiate(wit.sourceType);
            for (size_t v : wit.targets) {
                if (!mainOf.count(v)) {
                    mainOf[v] = "t" + std::to_string(v);
                    worldList.push_back({mainOf[v], v});
                    instantiate(v);
                }
            }
        }
    };

    mainOf[witnessIdx] = "t" + std::to_string(witnessIdx);
    worldList.push_back({mainOf[witnessIdx], witnessIdx});
    instantiate(witnessIdx);

    KripkeModel m;
    for (const auto& w : worldList) m.worlds.push_back(w.id);
    for (const auto& w : worldList) {
        const auto& ds = demandsOf(w.typeIdx);
        for (size_t k = 0; k < ds.size(); ++k) {
            const std::string& src = srcOf.at({w.typeIdx, k});
            for (size_t v : ds[k].second.targets)
                m.triples.insert({src, w.id, mainOf.at(v)});
        }
    }
    for (size_t i = 0; i < c.size(); ++i) {
        if (c.at(i).kind() != Formula::Kind::Var) continue;
        auto& ws = m.valuation[c.at(i).varName()];
        for (const auto& w : worldList)
            if (survivors[w.typeIdx].contains(i)) ws.insert(w.id);
    }
    m.validate();
    std::vector<size_t> worldTypes;
    for (const auto& w : worldList) worldTypes.push_back(w.typeIdx);
    return {std::move(m), mainOf.at(witnessIdx), std::move(worldTypes)};
}

struct Valid {};
struct Refuted {
    KripkeModel model;
    std::string world;
};
using Verdict = std::variant<Valid, Refuted>;

inline bool isValid(const Verdict& v) {
    return std::holds_alternative<Valid>(v);
}

inline Verdict decide(const Formula& phi0, LogicMode mode) {
    const ClosureSet c = closure(phi0);
    const LogicMode eff = effectiveMode(mode);
    const auto survivors = eliminate(c, hintikkaTypes(c), eff);
    const size_t negIdx = c.indexOf(simNeg(phi0)).value();
    for (const auto& t : survivors) {
        if (!t.contains(negIdx)) continue;
        Countermodel cm = buildCountermodel(c, survivors, t, eff);
        // never hand out an unchecked refutation
        if (forces(cm.model, cm.world, phi0))
            throw std::logic_error("countermodel failed verification");
        if (eff == LogicMode::Rd && !isDeterministic(cm.model))
            throw std::logic_error("expected a deterministic countermodel");
        return Refuted{std::move(cm.model), std::move(cm.world)};
    }
    return Valid{};
}

// ---------------------------------------------------------------------------
// Independent brute-force refuter: exhaustively covers every model with at
// most maxWorlds worlds over the variables of the input.  The search space is
// factored as (valuation bits) x (claimed modality bits per world) x (one
// relation per program world); a claimed profile is a model iff every
// program world has a relation realizing its modality bits, which is looked
// up in precomputed clause tables.  Every model corresponds to exactly one
// profile, so an empty scan is exhaustive evidence up to the bound.
// ---------------------------------------------------------------------------

// empty optional = unknown at this bound
using OracleVerdict = std::optional<Refuted>;

namespace detail {

struct OracleTables {
    size_t n = 0;
    size_t relCount = 0;
    size_t words = 0;
    // sat[a][b]: bitset over relations R of "clause holds for columns (a,b)"
    std::vector<std::vector<std::vector<uint64_t>>> sat;
    std::vector<uint64_t> det;  // deterministic relations
    std::vector<uint64_t> all;  // all relations

    explicit OracleTables(size_t n_) : n(n_) {
        relCount = size_t{1} << (n * n);
        words = (relCount + 63) / 64;
        const uint32_t colMax = uint32_t{1} << n;
        all.assign(words, ~uint64_t{0});
        if (relCount % 64)
            all.back() = (uint64_t{1} << (relCount % 64)) - 1;
        det.assign(words, 0);
        sat.assign(colMax, std::vector<std::vector<uint64_t>>(
                               colMax, std::vector<uint64_t>(words, 0)));
        const uint32_t rowMask = colMax - 1;
        for (size_t R = 0; R < relCount; ++R) {
            bool isDet = true;
            for (size_t u = 0; u < n; ++u) {
                uint32_t row = (R >> (u * n)) & rowMask;
                if (__builtin_popcount(row) > 1) { isDet = false; break; }
            }
            if (isDet) det[R >> 6] |= uint64_t{1} << (R & 63);
            for (uint32_t a = 0; a < colMax; ++a)
                for (uint32_t b = 0; b < colMax; ++b) {
                    bool ok = true;
                    for (size_t u = 0; u < n && ok; ++u) {
                        if (!((a >> u) & 1)) continue;
                        uint32_t row = (R >> (u * n)) & rowMask;
                        if (row && !(row & b)) ok = false;
                    }
                    if (ok)
                        sat[a][b][R >> 6] |= uint64_t{1} << (R & 63);
                }
        }
    }
};

inline const OracleTables& oracleTables(size_t n) {
    static std::mutex mu;
    static std::array<std::unique_ptr<OracleTables>, 5> cache;
    std::lock_guard<std::mutex> lock(mu);
    if (!cache[n]) cache[n] = std::make_unique<OracleTables>(n);
    return *cache[n];
}

}  // namespace detail

inline OracleVerdict bruteForceOracle(const Formula& phi0, LogicMode mode,
                                      size_t maxWorlds) {
    if (maxWorlds < 1 || maxWorlds > 4)
        throw std::invalid_argument("oracle world bound must be in 1..4");
    const bool det = effectiveMode(mode) == LogicMode::Rd;

    std::vector<Formula> subfs;
    {
        auto s = subformulas(phi0);
        subfs.assign(s.begin(), s.end());
        std::stable_sort(subfs.begin(), subfs.end(),
                         [](const Formula& a, const Formula& b) {
                             return a.size() < b.size();
                         });
    }
    std::unordered_map<Formula, size_t, FormulaHash> subIdx;
    for (size_t i = 0; i < subfs.size(); ++i) subIdx[subfs[i]] = i;
    std::vector<size_t> rhdIdx;
    for (size_t i = 0; i < subfs.size(); ++i)
        if (subfs[i].kind() == Formula::Kind::Rhd) rhdIdx.push_back(i);
    const auto vars = collectVars(phi0);
    const size_t phi0Pos = subIdx.at(phi0);

    for (size_t n = 1; n <= maxWorlds; ++n) {
        if (n * vars.size() > 20 || n * rhdIdx.size() > 20)
            throw std::invalid_argument("oracle search space too large");
        const auto& tab = detail::oracleTables(n);
        const uint32_t colMask = (uint32_t{1} << n) - 1;
        const uint64_t valTotal = uint64_t{1} << (n * vars.size());
        const uint64_t rhdTotal = uint64_t{1} << (n * rhdIdx.size());
        std::vector<uint32_t> col(subfs.size(), 0);
        std::vector<uint64_t> cand(tab.words);

        for (uint64_t valBits = 0; valBits < valTotal; ++valBits) {
            for (uint64_t rhdBits = 0; rhdBits < rhdTotal; ++rhdBits) {
                // forcing columns, operands before compounds
                for (size_t i = 0; i < subfs.size(); ++i) {
                    const Formula& f = subfs[i];
                    switch (f.kind()) {
                        case Formula::Kind::Bottom: col[i] = 0; break;
                        case Formula::Kind::Var: {
                            size_t j = 0;
                            while (vars[j] != f.varName()) ++j;
                            col[i] = (valBits >> (j * n)) & colMask;
                            break;
                        }
                        case Formula::Kind::Implies:
                            col[i] = (~col[subIdx.at(f.lhs())] |
                                      col[subIdx.at(f.rhs())]) &
                                     colMask;
                            break;
                        case Formula::Kind::Rhd: {
                            size_t j = 0;
                            while (rhdIdx[j] != i) ++j;
                            col[i] = (rhdBits >> (j * n)) & colMask;
                            break;
                        }
                    }
                }
                if (col[phi0Pos] == colMask) continue;  // nothing refuted

                // one realizing relation per program world
                std::vector<size_t> chosen(n, 0);
                bool feasible = true;
                for (size_t w = 0; w < n && feasible; ++w) {
                    cand = det ? tab.det : tab.all;
                    for (size_t j = 0; j < rhdIdx.size(); ++j) {
                        const Formula& f = subfs[rhdIdx[j]];
                        const auto& s = tab.sat[col[subIdx.at(f.lhs())]]
                                                [col[subIdx.at(f.rhs())]];
                        const bool want = (col[rhdIdx[j]] >> w) & 1;
                        for (size_t t = 0; t < tab.words; ++t)
                            cand[t] &= want ? s[t] : (~s[t] & tab.all[t]);
                    }
                    feasible = false;
                    for (size_t t = 0; t < tab.words; ++t)
                        if (cand[t]) {
                            chosen[w] = t * 64 +
                                        static_cast<size_t>(
                                            __builtin_ctzll(cand[t]));
                            feasible = true;
                            break;
                        }
                }
                if (!feasible) continue;

                KripkeModel m;
                for (size_t i = 0; i < n; ++i)
                    m.worlds.push_back("w" + std::to_string(i));
                for (size_t w = 0; w < n; ++w)
                    for (size_t u = 0; u < n; ++u)
                        for (size_t v = 0; v < n; ++v)
                            if ((chosen[w] >> (u * n + v)) & 1)
                                m.triples.insert(
                                    {m.worlds[u], m.worlds[w], m.worlds[v]});
                for (size_t j = 0; j < vars.size(); ++j) {
                    auto& ws = m.valuation[vars[j]];
                    for (size_t i = 0; i < n; ++i)
                        if ((valBits >> (j * n + i)) & 1)
                            ws.insert(m.worlds[i]);
                }
                size_t witness = 0;
                while ((col[phi0Pos] >> witness) & 1) ++witness;

                if (forces(m, m.worlds[witness], phi0))
                    throw std::logic_error(
                        "oracle reconstruction failed verification");
                if (det && !isDeterministic(m))
                    throw std::logic_error(
                        "oracle produced a nondeterministic model");
                return Refuted{std::move(m), "w" + std::to_string(witness)};
            }
        }
    }
    return std::nullopt;
}

}  // namespace rhd
