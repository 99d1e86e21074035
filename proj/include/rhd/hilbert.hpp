#pragma once

// Proof objects and a checker for the Hilbert systems R and Rd: classical
// tautologies admitted schematically, the axioms
//
//   ax1:  a |> b -> (c |> b -> (a | c) |> b)
//   ax2:  false |> a
//   ax3:  a |> true
//   ax4:  a |> b -> (a |> c -> a |> (b & c))     (rd only)
//
// modus ponens, and the monotonicity rule
//
//   m:    from a1 -> a2 and b1 -> b2 infer a2 |> b1 -> a1 |> b2.
//
// Proofs may assume hypotheses, but only modus ponens may consume
// hypothesis-derived lines: the monotonicity rule applies to theorems, so
// both of its premises must be hypothesis-free.  Each line carries a derived
// theorem flag recording exactly that.

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rhd/formula.hpp"

namespace rhd {

enum class Logic { R, Rd };

inline std::string logicName(Logic l) { return l == Logic::R ? "r" : "rd"; }

enum class AxiomId { Ax1, Ax2, Ax3, Ax4 };

using Bindings = std::map<std::string, Formula>;

inline Formula instantiateAxiom(AxiomId id, const Bindings& b) {
    auto get = [&](const char* name) -> const Formula& {
        auto it = b.find(name);
        if (it == b.end())
            throw std::invalid_argument(std::string("missing binding for '") +
                                        name + "'");
        return it->second;
    };
    switch (id) {
        case AxiomId::Ax1: {
            const Formula &a = get("phi"), &bb = get("psi"), &c = get("chi");
            return Formula::implies(
                Formula::rhd(a, bb),
                Formula::implies(Formula::rhd(c, bb),
                                 Formula::rhd(Formula::disj(a, c), bb)));
        }
        case AxiomId::Ax2:
            return Formula::rhd(Formula::bottom(), get("phi"));
        case AxiomId::Ax3:
            return Formula::rhd(get("phi"), Formula::top());
        case AxiomId::Ax4: {
            const Formula &a = get("phi"), &bb = get("psi"), &c = get("chi");
            return Formula::implies(
                Formula::rhd(a, bb),
                Formula::implies(Formula::rhd(a, c),
                                 Formula::rhd(a, Formula::conj(bb, c))));
        }
    }
    throw std::invalid_argument("unknown axiom");
}

struct Hypothesis { size_t index; };
struct Classical {};
struct AxiomInst {
    AxiomId id;
    Bindings bindings;
};
struct ModusPonens { size_t antecedent, implication; };
struct RuleM { size_t left, right; };

using Justification =
    std::variant<Hypothesis, Classical, AxiomInst, ModusPonens, RuleM>;

struct ProofLine {
    Formula formula;
    Justification justification;
};

struct Proof {
    Logic logic = Logic::R;
    std::vector<Formula> hypotheses;
    std::vector<ProofLine> lines;
};

struct LineError {
    size_t line;  // 0-based
    std::string reason;
};

struct CheckReport {
    bool ok = false;
    std::vector<LineError> errors;
    std::vector<bool> theoremFlags;  // per line: derivation uses no hypothesis

    std::optional<Formula> conclusion;  // last line when the proof is ok
};

inline CheckReport checkProof(const Proof& p) {
    CheckReport report;
    report.theoremFlags.assign(p.lines.size(), false);
    auto fail = [&](size_t i, std::string why) {
        report.errors.push_back({i, std::move(why)});
    };
    if (p.lines.empty()) {
        fail(0, "proof has no lines");
        return report;
    }

    for (size_t i = 0; i < p.lines.size(); ++i) {
        const ProofLine& line = p.lines[i];
        const Formula& f = line.formula;
        bool flag = false;

        auto refOk = [&](size_t r, const char* what) {
            if (r >= i) {
                fail(i, std::string(what) + " must reference an earlier line");
                return false;
            }
            return true;
        };

        if (const auto* h = std::get_if<Hypothesis>(&line.justification)) {
            if (h->index >= p.hypotheses.size())
                fail(i, "hypothesis index out of range");
            else if (f != p.hypotheses[h->index])
                fail(i, "line differs from hypothesis " +
                            std::to_string(h->index + 1));
            flag = false;
        } else if (std::get_if<Classical>(&line.justification)) {
            bool taut = false;
            try {
                taut = isPropTautology(f);
            } catch (const std::invalid_argument& e) {
                fail(i, e.what());
            }
            if (!taut) fail(i, "not a propositional tautology");
            flag = true;
        } else if (const auto* ax = std::get_if<AxiomInst>(&line.justification)) {
            if (ax->id == AxiomId::Ax4 && p.logic == Logic::R)
                fail(i, "ax4 is only available in logic rd");
            try {
                if (instantiateAxiom(ax->id, ax->bindings) != f)
                    fail(i, "formula does not match the axiom instance");
            } catch (const std::invalid_argument& e) {
                fail(i, e.what());
            }
            flag = true;
        } else if (const auto* mp =
                       std::get_if<ModusPonens>(&line.justification)) {
            if (refOk(mp->antecedent, "modus ponens premise") &&
                refOk(mp->implication, "modus ponens premise")) {
                const Formula& ant = p.lines[mp->antecedent].formula;
                const Formula& imp = p.lines[mp->implication].formula;
                if (imp.kind() != Formula::Kind::Implies ||
                    imp.lhs() != ant || imp.rhs() != f)
                    fail(i, "modus ponens premises do not yield this line");
                flag = report.theoremFlags[mp->antecedent] &&
                       report.theoremFlags[mp->implication];
            }
        } else if (const auto* rm = std::get_if<RuleM>(&line.justification)) {
            if (refOk(rm->left, "rule m premise") &&
                refOk(rm->right, "rule m premise")) {
                const Formula& l = p.lines[rm->left].formula;
                const Formula& r = p.lines[rm->right].formula;
                if (l.kind() != Formula::Kind::Implies ||
                    r.kind() != Formula::Kind::Implies) {
                    fail(i, "rule m premises must be implications");
                } else {
                    Formula want = Formula::implies(
                        Formula::rhd(l.rhs(), r.lhs()),
                        Formula::rhd(l.lhs(), r.rhs()));
                    if (f != want)
                        fail(i, "rule m conclusion must be " + want.str());
                }
                if (!report.theoremFlags[rm->left] ||
                    !report.theoremFlags[rm->right])
                    fail(i, "rule m premises must be hypothesis-free");
                flag = true;
            }
        }
        report.theoremFlags[i] = flag;
    }

    report.ok = report.errors.empty();
    if (report.ok) report.conclusion = p.lines.back().formula;
    return report;
}

}  // namespace rhd
