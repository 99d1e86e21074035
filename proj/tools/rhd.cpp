// Command-line front end.
//
// Subcommands: decide, check-model, check-proof, realize,
// verify-realization, eval, corpus.  Exit codes: 0 affirmative result
// (valid / ok / agreement), 1 negative result (refuted / proof error /
// mismatch), 2 usage or internal error.  Structured results go to stdout,
// one human summary line followed by one JSON line; diagnostics go to
// stderr.  RHD_BUDGET overrides the default evaluation budget.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rhd/decide.hpp"
#include "rhd/formula.hpp"
#include "rhd/generate.hpp"
#include "rhd/hilbert.hpp"
#include "rhd/json_io.hpp"
#include "rhd/kripke.hpp"
#include "rhd/recfun.hpp"

namespace {

using nlohmann::json;
using rhd::Formula;
using rhd::LogicMode;

long defaultBudget() {
    if (const char* env = std::getenv("RHD_BUDGET")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v > 0) return v;
        std::cerr << "ignoring invalid RHD_BUDGET value '" << env << "'\n";
    }
    return rhd::kDefaultBudget;
}

LogicMode parseMode(const std::string& s) {
    if (s == "r") return LogicMode::R;
    if (s == "rd") return LogicMode::Rd;
    if (s == "rforall") return LogicMode::RForall;
    throw CLI::ValidationError("--logic must be r, rd or rforall");
}

std::string readFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string trim(std::string s) {
    const char* ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    s.erase(s.find_last_not_of(ws) + 1);
    return s;
}

Formula formulaArg(const std::string& inlineText, const std::string& filePath) {
    if (!inlineText.empty() && !filePath.empty())
        throw CLI::ValidationError("give a formula either inline or via --file");
    if (!inlineText.empty()) return Formula::parse(inlineText);
    if (!filePath.empty()) return Formula::parse(trim(readFile(filePath)));
    throw CLI::ValidationError("missing formula");
}

void emit(const std::string& summary, const json& payload) {
    std::cout << summary << "\n" << payload.dump() << "\n";
}

// ----- decide ---------------------------------------------------------------

int runDecide(const Formula& f, LogicMode mode, const std::string& modelOut) {
    auto verdict = rhd::decide(f, mode);
    if (rhd::isValid(verdict)) {
        emit("valid in " + rhd::modeName(mode) + ": " + f.str(),
             rhd::verdictToJson(verdict));
        return 0;
    }
    const auto& r = std::get<rhd::Refuted>(verdict);
    rhd::saveModel(r.model, modelOut);
    emit("refuted in " + rhd::modeName(mode) + ": " + f.str() +
             "  (countermodel at world " + r.world + ", written to " +
             modelOut + ")",
         rhd::verdictToJson(verdict));
    return 1;
}

// ----- check-model ----------------------------------------------------------

int runCheckModel(const std::string& modelPath, const std::string& text,
                  const std::string& file, const std::string& world,
                  bool refutes, bool requireDeterministic) {
    rhd::KripkeModel m = rhd::loadModel(modelPath);
    json payload;
    payload["deterministic"] = rhd::isDeterministic(m);
    bool affirmative = true;
    std::string summary;
    if (requireDeterministic && !rhd::isDeterministic(m)) affirmative = false;
    if (!text.empty() || !file.empty()) {
        Formula f = formulaArg(text, file);
        payload["formula"] = f.str();
        if (!world.empty()) {
            bool forced = rhd::forces(m, world, f);
            payload["world"] = world;
            payload["forces"] = forced;
            if (forced == refutes) affirmative = false;
            summary = "world " + world + (forced ? " forces " : " rejects ") +
                      f.str();
        } else {
            bool valid = rhd::validInModel(m, f);
            payload["valid"] = valid;
            if (valid == refutes) affirmative = false;
            summary = f.str() +
                      (valid ? " holds at every world" : " fails somewhere");
        }
    } else {
        summary = "model is well-formed (" + std::to_string(m.worlds.size()) +
                  " worlds)";
    }
    emit(summary, payload);
    return affirmative ? 0 : 1;
}

// ----- check-proof ----------------------------------------------------------

int runCheckProof(const std::string& path) {
    rhd::Proof p = rhd::loadProof(path);
    rhd::CheckReport r = rhd::checkProof(p);
    json payload;
    payload["ok"] = r.ok;
    auto errors = json::array();
    for (const auto& e : r.errors)
        errors.push_back({{"line", e.line + 1}, {"reason", e.reason}});
    payload["errors"] = std::move(errors);
    if (r.ok) payload["conclusion"] = r.conclusion->str();
    if (r.ok) {
        emit("proof ok in " + rhd::logicName(p.logic) + ": " +
                 (p.hypotheses.empty() ? std::string("|- ")
                                       : std::string("... |- ")) +
                 r.conclusion->str(),
             payload);
        return 0;
    }
    emit("proof rejected (" + std::to_string(r.errors.size()) + " errors)",
         payload);
    for (const auto& e : r.errors)
        std::cerr << "line " << e.line + 1 << ": " << e.reason << "\n";
    return 1;
}

// ----- realize ----------------------------------------------------------------

int runRealize(const std::string& modelPath, const std::string& outPath,
               long budget, bool claimDet) {
    rhd::KripkeModel m = rhd::loadModel(modelPath);
    auto bundle = rhd::realize(
        m, budget, claimDet ? std::optional<bool>(true) : std::nullopt);
    rhd::saveBundle(bundle, outPath);
    json payload;
    payload["worlds"] = m.worlds.size();
    payload["deterministic"] = bundle.deterministic;
    payload["budget"] = bundle.budget;
    payload["out"] = outPath;
    emit("realized " + std::to_string(m.worlds.size()) + " worlds into codes (" +
             outPath + ")",
         payload);
    return 0;
}

// ----- verify-realization -----------------------------------------------------

int runVerifyRealization(const std::string& bundlePath, const std::string& text,
                         const std::string& file, bool universal) {
    auto bundle = rhd::loadBundle(bundlePath);
    Formula f = formulaArg(text, file);
    auto c = rhd::closure(f);
    auto report = rhd::verifyRealization(
        bundle, c,
        universal ? rhd::Reading::Universal : rhd::Reading::Existential);
    json payload;
    payload["ok"] = report.ok;
    payload["worlds"] = bundle.model.worlds.size();
    payload["formulas"] = c.size();
    auto mismatches = json::array();
    for (size_t i : report.mismatches) {
        const auto& cell = report.matrix[i];
        mismatches.push_back({{"world", bundle.model.worlds[cell.world]},
                              {"formula", cell.formula.str()},
                              {"membership", cell.inSet},
                              {"forces", cell.forced}});
    }
    payload["mismatches"] = std::move(mismatches);
    emit(report.ok
             ? "agreement on " + std::to_string(c.size()) + " formulas x " +
                   std::to_string(bundle.model.worlds.size()) + " worlds"
             : "MISMATCH in " + std::to_string(report.mismatches.size()) +
                   " cells",
         payload);
    return report.ok ? 0 : 1;
}

// ----- eval --------------------------------------------------------------------

int runEval(const std::string& codeText, const std::string& codeFile,
            const std::string& inputText, const std::string& inputFile,
            long budget, bool det) {
    rhd::Expr code = rhd::Expr::parse(
        !codeText.empty() ? codeText : trim(readFile(codeFile)));
    rhd::Expr input =
        inputText.empty() && inputFile.empty()
            ? rhd::Expr::nil()
            : rhd::Expr::parse(!inputText.empty() ? inputText
                                                  : trim(readFile(inputFile)));
    auto r = rhd::evalProgram(code, input, budget,
                              det ? rhd::EvalMode::Det : rhd::EvalMode::Nondet);
    std::string summary;
    if (!r.values.empty())
        summary = std::to_string(r.values.size()) + " value(s)";
    else if (r.definitelyDivergent)
        summary = "divergent";
    else
        summary = "no value";
    if (!r.complete()) summary += " (inconclusive)";
    emit(summary, rhd::evalResultToJson(r));
    return r.complete() ? 0 : 1;
}

// ----- corpus -------------------------------------------------------------------

struct CorpusRow {
    Formula formula;
    bool decideValid = false;
    bool oracleRefuted = false;
    std::string realization = "skipped";
    bool consistent = true;
};

int runCorpus(size_t count, uint64_t seed, int depth, size_t nVars,
              LogicMode mode, size_t oracleBound, size_t realizeLimit,
              long budget, const std::string& listFile) {
    std::vector<Formula> formulas;
    if (!listFile.empty()) {
        std::ifstream in(listFile);
        if (!in) throw std::runtime_error("cannot read " + listFile);
        std::string line;
        while (std::getline(in, line)) {
            line = trim(line);
            if (!line.empty()) formulas.push_back(Formula::parse(line));
        }
    } else {
        std::vector<std::string> vars;
        for (size_t i = 0; i < nVars; ++i)
            vars.push_back(std::string(1, static_cast<char>('p' + i)));
        formulas = rhd::formulaCorpus(count, seed, depth, vars);
    }

    size_t valid = 0, refuted = 0, inconsistent = 0;
    for (const auto& f : formulas) {
        CorpusRow row{f};
        auto verdict = rhd::decide(f, mode);
        row.decideValid = rhd::isValid(verdict);
        auto oracle = rhd::bruteForceOracle(f, mode, oracleBound);
        row.oracleRefuted = oracle.has_value();
        if (row.oracleRefuted && row.decideValid) row.consistent = false;

        // realization leg of the equivalence triangle
        const rhd::Refuted* source = nullptr;
        if (oracle && oracle->model.worlds.size() <= realizeLimit)
            source = &*oracle;
        else if (!row.decideValid) {
            const auto& r = std::get<rhd::Refuted>(verdict);
            if (r.model.worlds.size() <= realizeLimit) source = &r;
        }
        if (source) {
            auto bundle = rhd::realize(source->model, budget);
            auto rep = rhd::verifyRealization(bundle, rhd::closure(f));
            bool outside = !rhd::membership(
                bundle, f, bundle.model.worldIndex(source->world));
            row.realization = rep.ok && outside ? "ok" : "mismatch";
            if (row.realization != "ok") row.consistent = false;
        } else if (row.decideValid) {
            // valid formulas must hold on sampled models, realized included
            auto m = rhd::randomModel(2, 0.5, rhd::collectVars(f), seed ^ 17,
                                      rhd::effectiveMode(mode) == LogicMode::Rd);
            bool ok = rhd::validInModel(m, f);
            auto bundle = rhd::realize(m, budget);
            for (size_t i = 0; ok && i < m.worlds.size(); ++i)
                ok = rhd::membership(bundle, f, i);
            row.realization = ok ? "ok" : "mismatch";
            if (!ok) row.consistent = false;
        }

        row.decideValid ? ++valid : ++refuted;
        if (!row.consistent) ++inconsistent;
        json rowJson = {{"formula", f.str()},
                        {"decide", row.decideValid ? "valid" : "refuted"},
                        {"oracle", row.oracleRefuted ? "refuted" : "unknown"},
                        {"realization", row.realization},
                        {"consistent", row.consistent}};
        std::cout << rowJson.dump() << "\n";
    }
    json summary = {{"formulas", formulas.size()},
                    {"valid", valid},
                    {"refuted", refuted},
                    {"inconsistent", inconsistent},
                    {"logic", rhd::modeName(mode)}};
    emit("corpus: " + std::to_string(formulas.size()) + " formulas, " +
             std::to_string(valid) + " valid, " + std::to_string(refuted) +
             " refuted, " + std::to_string(inconsistent) + " inconsistencies",
         summary);
    return inconsistent == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "rhd: decision toolkit for the modal logics of partial computable "
        "functions"};
    app.require_subcommand(1);
    long budget = defaultBudget();
    int exitCode = 2;

    // decide
    std::string decFormula, decFile, decLogic = "r",
                decModelOut = "countermodel.json";
    auto* dec = app.add_subcommand("decide", "decide validity of a formula");
    dec->add_option("formula", decFormula, "formula text");
    dec->add_option("--file", decFile, "read the formula from a file");
    dec->add_option("--logic", decLogic, "r, rd or rforall");
    dec->add_option("--model-out", decModelOut, "countermodel output path");
    dec->callback([&]() {
        exitCode = runDecide(formulaArg(decFormula, decFile),
                             parseMode(decLogic), decModelOut);
    });

    // check-model
    std::string cmModel, cmFormula, cmFile, cmWorld;
    bool cmRefutes = false, cmDet = false;
    auto* cm = app.add_subcommand("check-model",
                                  "validate a model file and evaluate forcing");
    cm->add_option("--model", cmModel, "model file")->required();
    cm->add_option("formula", cmFormula, "formula text");
    cm->add_option("--file", cmFile, "read the formula from a file");
    cm->add_option("--world", cmWorld, "evaluate at this world only");
    cm->add_flag("--refutes", cmRefutes,
                 "affirmative when the formula is NOT forced");
    cm->add_flag("--require-deterministic", cmDet,
                 "fail unless the model is deterministic");
    cm->callback([&]() {
        exitCode = runCheckModel(cmModel, cmFormula, cmFile, cmWorld,
                                 cmRefutes, cmDet);
    });

    // check-proof
    std::string cpPath;
    auto* cp = app.add_subcommand("check-proof", "check a proof file");
    cp->add_option("proof", cpPath, "proof file")->required();
    cp->callback([&]() { exitCode = runCheckProof(cpPath); });

    // realize
    std::string rlModel, rlOut = "bundle.json";
    bool rlDet = false;
    auto* rl = app.add_subcommand("realize",
                                  "turn a model into codes via fixed points");
    rl->add_option("--model", rlModel, "model file")->required();
    rl->add_option("--out", rlOut, "bundle output path");
    rl->add_option("--budget", budget, "evaluation budget per branch");
    rl->add_flag("--deterministic", rlDet,
                 "require a deterministic realization");
    rl->callback([&]() { exitCode = runRealize(rlModel, rlOut, budget, rlDet); });

    // verify-realization
    std::string vrBundle, vrFormula, vrFile;
    bool vrUniversal = false;
    auto* vr = app.add_subcommand(
        "verify-realization",
        "check code membership against forcing over a formula's closure");
    vr->add_option("--bundle", vrBundle, "bundle file")->required();
    vr->add_option("formula", vrFormula, "formula text");
    vr->add_option("--file", vrFile, "read the formula from a file");
    vr->add_flag("--universal", vrUniversal,
                 "use the all-values reading of the modality");
    vr->callback([&]() {
        exitCode = runVerifyRealization(vrBundle, vrFormula, vrFile,
                                        vrUniversal);
    });

    // eval
    std::string evCode, evCodeFile, evInput, evInputFile;
    bool evDet = false;
    auto* ev = app.add_subcommand("eval", "run a program on an input");
    ev->add_option("--code", evCode, "program text");
    ev->add_option("--code-file", evCodeFile, "program file");
    ev->add_option("--input", evInput, "input s-expression");
    ev->add_option("--input-file", evInputFile, "input file");
    ev->add_option("--budget", budget, "evaluation budget per branch");
    ev->add_flag("--det", evDet, "deterministic evaluation mode");
    ev->callback([&]() {
        exitCode = runEval(evCode, evCodeFile, evInput, evInputFile, budget,
                           evDet);
    });

    // corpus
    size_t coCount = 200, coVars = 2, coBound = 3, coLimit = 6;
    uint64_t coSeed = 1;
    int coDepth = 2;
    std::string coLogic = "r", coList;
    auto* co = app.add_subcommand(
        "corpus", "run a formula corpus through every route and compare");
    co->add_option("--count", coCount, "number of generated formulas");
    co->add_option("--seed", coSeed, "generator seed");
    co->add_option("--depth", coDepth, "maximum formula depth");
    co->add_option("--vars", coVars, "number of variables");
    co->add_option("--logic", coLogic, "r, rd or rforall");
    co->add_option("--oracle-bound", coBound, "world bound for the refuter");
    co->add_option("--realize-limit", coLimit,
                   "realize countermodels up to this many worlds");
    co->add_option("--budget", budget, "evaluation budget per branch");
    co->add_option("--file", coList, "read formulas from a file, one per line");
    co->callback([&]() {
        exitCode = runCorpus(coCount, coSeed, coDepth, coVars,
                             parseMode(coLogic), coBound, coLimit, budget,
                             coList);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exitCode;
}
