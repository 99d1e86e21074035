#pragma once

// JSON file formats.
//
// Model:   {"worlds": ["a", ...],
//           "triples": [["source", "program", "target"], ...],
//           "valuation": {"p": ["a", ...], ...}}
//
// Proof:   {"logic": "r" | "rd",
//           "hypotheses": ["formula", ...],
//           "lines": [{"formula": "...",
//                      "rule": "hyp|classical|ax1|ax2|ax3|ax4|mp|m",
//                      "refs": [...],          // 1-based lines, or hypothesis
//                      "bindings": {"phi": "...", ...}}, ...]}
//
// Verdict: {"verdict": "valid"} |
//          {"verdict": "refuted", "model": ..., "world": "..."}
//
// Bundle:  {"model": ..., "codes": {"world": "sexpr", ...},
//           "valuation": {"p": ["sexpr", ...]}, "budget": n}

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "rhd/decide.hpp"
#include "rhd/formula.hpp"
#include "rhd/hilbert.hpp"
#include "rhd/kripke.hpp"
#include "rhd/recfun.hpp"

namespace rhd {

struct ProofError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ----- models --------------------------------------------------------------

inline nlohmann::json modelToJson(const KripkeModel& m) {
    nlohmann::json j;
    j["worlds"] = m.worlds;
    auto triples = nlohmann::json::array();
    for (const auto& t : m.triples)
        triples.push_back({t.source, t.program, t.target});
    j["triples"] = std::move(triples);
    auto val = nlohmann::json::object();
    for (const auto& [var, ws] : m.valuation) val[var] = ws;
    j["valuation"] = std::move(val);
    return j;
}

inline KripkeModel modelFromJson(const nlohmann::json& j) {
    try {
        KripkeModel m;
        m.worlds = j.at("worlds").get<std::vector<std::string>>();
        for (const auto& t : j.at("triples")) {
            if (!t.is_array() || t.size() != 3)
                throw ModelError("triple must be a [source, program, target]");
            m.triples.insert({t[0].get<std::string>(), t[1].get<std::string>(),
                              t[2].get<std::string>()});
        }
        for (const auto& [var, ws] : j.at("valuation").items())
            m.valuation[var] = ws.get<std::set<std::string>>();
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed model: ") + e.what());
    }
}

inline void saveModel(const KripkeModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path);
    out << modelToJson(m).dump(2) << "\n";
}

inline KripkeModel loadModel(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed model file: ") + e.what());
    }
    return modelFromJson(j);
}

// ----- verdicts -------------------------------------------------------------

inline nlohmann::json verdictToJson(const Verdict& v) {
    if (isValid(v)) return {{"verdict", "valid"}};
    const auto& r = std::get<Refuted>(v);
    return {{"verdict", "refuted"},
            {"model", modelToJson(r.model)},
            {"world", r.world}};
}

// ----- proofs ---------------------------------------------------------------

inline nlohmann::json proofToJson(const Proof& p) {
    nlohmann::json j;
    j["logic"] = logicName(p.logic);
    auto hyps = nlohmann::json::array();
    for (const auto& h : p.hypotheses) hyps.push_back(h.str());
    j["hypotheses"] = std::move(hyps);
    auto lines = nlohmann::json::array();
    for (const auto& line : p.lines) {
        nlohmann::json l;
        l["formula"] = line.formula.str();
        if (const auto* h = std::get_if<Hypothesis>(&line.justification)) {
            l["rule"] = "hyp";
            l["refs"] = {h->index + 1};
        } else if (std::get_if<Classical>(&line.justification)) {
            l["rule"] = "classical";
        } else if (const auto* ax = std::get_if<AxiomInst>(&line.justification)) {
            switch (ax->id) {
                case AxiomId::Ax1: l["rule"] = "ax1"; break;
                case AxiomId::Ax2: l["rule"] = "ax2"; break;
                case AxiomId::Ax3: l["rule"] = "ax3"; break;
                case AxiomId::Ax4: l["rule"] = "ax4"; break;
            }
            auto b = nlohmann::json::object();
            for (const auto& [k, f] : ax->bindings) b[k] = f.str();
            l["bindings"] = std::move(b);
        } else if (const auto* mp =
                       std::get_if<ModusPonens>(&line.justification)) {
            l["rule"] = "mp";
            l["refs"] = {mp->antecedent + 1, mp->implication + 1};
        } else if (const auto* rm = std::get_if<RuleM>(&line.justification)) {
            l["rule"] = "m";
            l["refs"] = {rm->left + 1, rm->right + 1};
        }
        lines.push_back(std::move(l));
    }
    j["lines"] = std::move(lines);
    return j;
}

inline Proof proofFromJson(const nlohmann::json& j) {
    try {
        Proof p;
        const std::string logic = j.at("logic").get<std::string>();
        if (logic == "r") p.logic = Logic::R;
        else if (logic == "rd") p.logic = Logic::Rd;
        else throw ProofError("unknown logic '" + logic + "'");

        for (const auto& h : j.at("hypotheses"))
            p.hypotheses.push_back(Formula::parse(h.get<std::string>()));

        for (const auto& l : j.at("lines")) {
            ProofLine line{Formula::parse(l.at("formula").get<std::string>()),
                           Classical{}};
            const std::string rule = l.at("rule").get<std::string>();
            auto ref = [&](size_t i) -> size_t {
                const auto& refs = l.at("refs");
                if (!refs.is_array() || refs.size() <= i)
                    throw ProofError("rule '" + rule + "' needs references");
                long long r = refs[i].get<long long>();
                if (r < 1) throw ProofError("references are 1-based");
                return static_cast<size_t>(r - 1);
            };
            if (rule == "hyp") {
                line.justification = Hypothesis{ref(0)};
            } else if (rule == "classical") {
                line.justification = Classical{};
            } else if (rule == "ax1" || rule == "ax2" || rule == "ax3" ||
                       rule == "ax4") {
                AxiomInst ax;
                ax.id = rule == "ax1"   ? AxiomId::Ax1
                        : rule == "ax2" ? AxiomId::Ax2
                        : rule == "ax3" ? AxiomId::Ax3
                                        : AxiomId::Ax4;
                if (l.contains("bindings"))
                    for (const auto& [k, f] : l.at("bindings").items())
                        ax.bindings.emplace(
                            k, Formula::parse(f.get<std::string>()));
                line.justification = std::move(ax);
            } else if (rule == "mp") {
                line.justification = ModusPonens{ref(0), ref(1)};
            } else if (rule == "m") {
                line.justification = RuleM{ref(0), ref(1)};
            } else {
                throw ProofError("unknown rule '" + rule + "'");
            }
            p.lines.push_back(std::move(line));
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ProofError(std::string("malformed proof: ") + e.what());
    } catch (const ParseError& e) {
        throw ProofError(std::string("bad formula in proof: ") + e.what());
    }
}

inline void saveProof(const Proof& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ProofError("cannot write " + path);
    out << proofToJson(p).dump(2) << "\n";
}

inline Proof loadProof(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ProofError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ProofError(std::string("malformed proof file: ") + e.what());
    }
    return proofFromJson(j);
}

// ----- realization bundles ---------------------------------------------------

inline nlohmann::json bundleToJson(const RealizationBundle& b) {
    nlohmann::json j;
    j["model"] = modelToJson(b.model);
    auto codes = nlohmann::json::object();
    for (size_t i = 0; i < b.model.worlds.size(); ++i)
        codes[b.model.worlds[i]] = b.codes[i].str();
    j["codes"] = std::move(codes);
    auto val = nlohmann::json::object();
    for (const auto& [var, idxs] : b.valuation) {
        auto arr = nlohmann::json::array();
        for (size_t i : idxs) arr.push_back(b.codes[i].str());
        val[var] = std::move(arr);
    }
    j["valuation"] = std::move(val);
    j["budget"] = b.budget;
    return j;
}

inline RealizationBundle bundleFromJson(const nlohmann::json& j) {
    try {
        RealizationBundle b;
        b.model = modelFromJson(j.at("model"));
        b.budget = j.at("budget").get<long>();
        b.deterministic = isDeterministic(b.model);
        const auto& codes = j.at("codes");
        for (const auto& w : b.model.worlds) {
            if (!codes.contains(w))
                throw RealizationError("bundle misses the code of world " + w);
            b.codes.push_back(Expr::parse(codes.at(w).get<std::string>()));
        }
        if (codes.size() != b.model.worlds.size())
            throw RealizationError("bundle has codes for unknown worlds");
        for (const auto& [var, arr] : j.at("valuation").items()) {
            auto& idxs = b.valuation[var];
            for (const auto& text : arr) {
                Expr code = Expr::parse(text.get<std::string>());
                auto idx = b.codeIndex(code);
                if (!idx)
                    throw RealizationError(
                        "valuation element of '" + var + "' is not a code");
                idxs.insert(*idx);
            }
        }
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw RealizationError(std::string("malformed bundle: ") + e.what());
    } catch (const SexprParseError& e) {
        throw RealizationError(std::string("bad code in bundle: ") + e.what());
    }
}

inline void saveBundle(const RealizationBundle& b, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw RealizationError("cannot write " + path);
    out << bundleToJson(b).dump(2) << "\n";
}

inline RealizationBundle loadBundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw RealizationError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw RealizationError(std::string("malformed bundle file: ") +
                               e.what());
    }
    return bundleFromJson(j);
}

// ----- evaluation results -----------------------------------------------------

inline nlohmann::json evalResultToJson(const EvalResult& r) {
    nlohmann::json j;
    auto values = nlohmann::json::array();
    for (const auto& v : r.values) values.push_back(v.str());
    j["values"] = std::move(values);
    j["budgetExhausted"] = r.budgetExhausted;
    j["branchOverflow"] = r.branchOverflow;
    j["definitelyDivergent"] = r.definitelyDivergent;
    j["divergedBranches"] = r.divergedCount;
    j["stuckBranches"] = r.stuckCount;
    if (r.stuckCount > 0) j["firstStuck"] = r.firstStuck;
    return j;
}

}  // namespace rhd
