#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rhd/formula.hpp"
#include "rhd/kripke.hpp"

using rhd::Formula;
using rhd::KripkeModel;

namespace {

// reference evaluator: direct recursion over the triple set, no memo,
// no derived indexes
bool naiveForces(const KripkeModel& m, const std::string& w,
                 const Formula& phi) {
    switch (phi.kind()) {
        case Formula::Kind::Bottom:
            return false;
        case Formula::Kind::Var: {
            auto it = m.valuation.find(phi.varName());
            return it != m.valuation.end() && it->second.count(w);
        }
        case Formula::Kind::Implies:
            return !naiveForces(m, w, phi.lhs()) ||
                   naiveForces(m, w, phi.rhs());
        case Formula::Kind::Rhd: {
            for (const auto& t1 : m.triples) {
                if (t1.program != w) continue;
                if (!naiveForces(m, t1.source, phi.lhs())) continue;
                bool hit = false;
                for (const auto& t2 : m.triples)
                    if (t2.program == w && t2.source == t1.source &&
                        naiveForces(m, t2.target, phi.rhs())) {
                        hit = true;
                        break;
                    }
                if (!hit) return false;
            }
            return true;
        }
    }
    return false;
}

// deterministic-model reading of the modal clause: every image of a source
// forcing the left operand forces the right operand
bool detClauseForces(const KripkeModel& m, const std::string& w,
                     const Formula& rhdFormula) {
    for (const auto& t : m.triples) {
        if (t.program != w) continue;
        if (naiveForces(m, t.source, rhdFormula.lhs()) &&
            !naiveForces(m, t.target, rhdFormula.rhs()))
            return false;
    }
    return true;
}

Formula randomFormula(std::mt19937_64& rng, int depth) {
    static const std::vector<std::string> names = {"p", "q"};
    auto pick = [&](int n) { return static_cast<int>(rng() % n); };
    if (depth == 0 || pick(3) == 0) {
        int c = pick(4);
        if (c == 0) return Formula::bottom();
        return Formula::var(names[pick(2)]);
    }
    switch (pick(4)) {
        case 0: return Formula::negation(randomFormula(rng, depth - 1));
        case 1: return Formula::implies(randomFormula(rng, depth - 1),
                                        randomFormula(rng, depth - 1));
        case 2: return Formula::disj(randomFormula(rng, depth - 1),
                                     randomFormula(rng, depth - 1));
        default: return Formula::rhd(randomFormula(rng, depth - 1),
                                     randomFormula(rng, depth - 1));
    }
}

KripkeModel threeWorldExample() {
    KripkeModel m;
    m.worlds = {"w", "a", "b"};
    m.triples = {{"a", "w", "b"}};
    m.valuation["p"] = {"a"};
    m.valuation["q"] = {};
    return m;
}

}  // namespace

TEST_CASE("isDeterministic") {
    KripkeModel empty;
    empty.worlds = {"a"};
    CHECK(rhd::isDeterministic(empty));

    KripkeModel two;
    two.worlds = {"a", "b", "c", "w"};
    two.triples = {{"a", "w", "b"}, {"a", "w", "c"}};
    CHECK_FALSE(rhd::isDeterministic(two));

    // the per-program relations are independent
    KripkeModel perProgram;
    perProgram.worlds = {"a", "b", "c", "w", "x"};
    perProgram.triples = {{"a", "w", "b"}, {"a", "x", "c"}};
    CHECK(rhd::isDeterministic(perProgram));
}

TEST_CASE("forcing basics") {
    KripkeModel m = threeWorldExample();

    CHECK(rhd::forces(m, "w", Formula::top()));
    CHECK(rhd::forces(m, "a", Formula::var("p")));
    CHECK_FALSE(rhd::forces(m, "b", Formula::var("p")));
    // unassigned variables hold nowhere
    CHECK_FALSE(rhd::forces(m, "a", Formula::var("zz")));

    // only source a forces p under program w, and its image {b} misses q
    CHECK_FALSE(
        rhd::forces(m, "w", Formula::rhd(Formula::var("p"), Formula::var("q"))));

    // no triples at all: every modality holds vacuously
    KripkeModel empty;
    empty.worlds = {"u"};
    CHECK(rhd::forces(empty, "u",
                      Formula::rhd(Formula::var("p"), Formula::bottom())));

    CHECK_THROWS_AS(rhd::forces(m, "nope", Formula::var("p")), rhd::ModelError);
}

TEST_CASE("axiom shapes hold in sampled models") {
    auto a2 = Formula::parse("false |> p");
    auto a3 = Formula::parse("p |> true");
    auto a1 = Formula::parse("p |> q -> (r |> q -> (p | r) |> q)");
    auto a4 = Formula::parse("p |> q -> (p |> r -> p |> (q & r))");
    std::vector<std::string> vars = {"p", "q", "r"};
    for (uint64_t seed = 0; seed < 25; ++seed) {
        KripkeModel m = rhd::randomModel(1 + seed % 5, 0.4, vars, seed, false);
        CHECK(rhd::validInModel(m, a2));
        CHECK(rhd::validInModel(m, a3));
        CHECK(rhd::validInModel(m, a1));
        KripkeModel d = rhd::randomModel(1 + seed % 5, 0.5, vars, seed, true);
        CHECK(rhd::validInModel(d, a4));
        CHECK(rhd::validInModel(d, a1));
    }
}

TEST_CASE("memoized forcing agrees with the naive recursion") {
    std::mt19937_64 rng(5);
    for (uint64_t seed = 0; seed < 30; ++seed) {
        KripkeModel m =
            rhd::randomModel(1 + seed % 4, 0.45, {"p", "q"}, seed * 13 + 1,
                             seed % 2 == 0);
        Formula f = randomFormula(rng, 3);
        rhd::ForcingTable table(m, f);
        for (const auto& w : m.worlds)
            for (const Formula& sub : rhd::subformulas(f))
                CHECK(table.forces(w, sub) == naiveForces(m, w, sub));
    }
}

TEST_CASE("deterministic models collapse the modal clause") {
    std::mt19937_64 rng(17);
    for (uint64_t seed = 0; seed < 30; ++seed) {
        KripkeModel m =
            rhd::randomModel(1 + seed % 4, 0.6, {"p", "q"}, seed * 7 + 3, true);
        REQUIRE(rhd::isDeterministic(m));
        Formula f = Formula::rhd(randomFormula(rng, 2), randomFormula(rng, 2));
        for (const auto& w : m.worlds)
            CHECK(naiveForces(m, w, f) == detClauseForces(m, w, f));
    }
}

TEST_CASE("modal monotonicity at the semantic level") {
    // a & b implies a pointwise, c implies c | d pointwise; so
    // a |> c implies (a & b) |> (c | d) at every world
    auto strong = Formula::parse("a |> c");
    auto weak = Formula::parse("(a & b) |> (c | d)");
    for (uint64_t seed = 0; seed < 40; ++seed) {
        KripkeModel m = rhd::randomModel(1 + seed % 4, 0.5,
                                         {"a", "b", "c", "d"}, seed, seed % 2);
        for (const auto& w : m.worlds)
            if (rhd::forces(m, w, strong)) CHECK(rhd::forces(m, w, weak));
    }
}

TEST_CASE("random model generation is reproducible") {
    auto a = rhd::randomModel(5, 0.3, {"p"}, 99, false);
    auto b = rhd::randomModel(5, 0.3, {"p"}, 99, false);
    CHECK(a == b);
    auto c = rhd::randomModel(5, 0.3, {"p"}, 100, false);
    CHECK_FALSE(a == c);

    auto single = rhd::randomModel(1, 0.0, {"p"}, 7, false);
    CHECK(single.worlds.size() == 1);
    CHECK(single.triples.empty());

    auto det = rhd::randomModel(5, 1.0, {}, 3, true);
    CHECK(rhd::isDeterministic(det));
    // full density nondeterministic model is complete
    auto full = rhd::randomModel(3, 1.0, {}, 3, false);
    CHECK(full.triples.size() == 27);
}

TEST_CASE("model validation") {
    KripkeModel m;
    CHECK_THROWS_AS(m.validate(), rhd::ModelError);
    m.worlds = {"a", "a"};
    CHECK_THROWS_AS(m.validate(), rhd::ModelError);
    m.worlds = {"a"};
    m.triples = {{"a", "a", "zz"}};
    CHECK_THROWS_AS(m.validate(), rhd::ModelError);
    m.triples.clear();
    m.valuation["p"] = {"ghost"};
    CHECK_THROWS_AS(m.validate(), rhd::ModelError);
    m.valuation["p"] = {"a"};
    CHECK_NOTHROW(m.validate());
}
