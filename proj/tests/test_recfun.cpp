#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rhd/decide.hpp"
#include "rhd/json_io.hpp"
#include "rhd/recfun.hpp"

using rhd::EvalMode;
using rhd::EvalResult;
using rhd::Expr;
using rhd::Formula;
using rhd::KripkeModel;
namespace prog = rhd::prog;

namespace {

bool mentionsAmb(const Expr& e) {
    if (e.isAtom()) return e.atomName() == "amb";
    return mentionsAmb(e.head()) || mentionsAmb(e.tail());
}

Expr randomSexpr(std::mt19937_64& rng, int depth) {
    static const std::vector<std::string> names = {"a", "b", "zz", "nil"};
    if (depth == 0 || rng() % 3 == 0)
        return Expr::atom(names[rng() % names.size()]);
    return Expr::pair(randomSexpr(rng, depth - 1), randomSexpr(rng, depth - 1));
}

// object transformer returning the literal code `c` whatever the input is
Expr constantTransformer(const Expr& c) { return prog::quote(c); }

// object transformer mapping the tuple (x1 ... xn) to the code (quote xj):
// its fixed point reproduces code j on every input
Expr quoteNthTransformer(size_t j) {
    Expr sel = prog::input();
    for (size_t k = 0; k < j; ++k) sel = prog::tail(sel);
    sel = prog::head(sel);
    return prog::cons(prog::quote(Expr::atom("quote")),
                      prog::cons(sel, prog::quote(Expr::nil())));
}

}  // namespace

TEST_CASE("s-expressions parse and print") {
    CHECK(Expr::parse("a").str() == "a");
    CHECK(Expr::parse("(a b c)").str() == "(a b c)");
    CHECK(Expr::parse("(a . b)").str() == "(a . b)");
    CHECK(Expr::parse("(a (b c) . d)").str() == "(a (b c) . d)");
    CHECK(Expr::parse("()") == Expr::nil());
    CHECK_THROWS_AS(Expr::parse("(a"), rhd::SexprParseError);
    CHECK_THROWS_AS(Expr::parse("a)"), rhd::SexprParseError);
    CHECK_THROWS_AS(Expr::parse("(a . b c)"), rhd::SexprParseError);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 300; ++i) {
        Expr e = randomSexpr(rng, 5);
        CHECK(Expr::parse(e.str()) == e);
    }
}

TEST_CASE("evaluator basics") {
    Expr x = Expr::parse("(hello world)");

    EvalResult id = rhd::evalProgram(prog::input(), x);
    CHECK(id.values == std::set<Expr>{x});
    CHECK(id.complete());

    EvalResult div = rhd::evalProgram(prog::diverge(), x);
    CHECK(div.values.empty());
    CHECK(div.definitelyDivergent);

    EvalResult both = rhd::evalProgram(
        prog::amb(prog::quote(Expr::atom("a")), prog::quote(Expr::atom("b"))),
        x);
    CHECK(both.values == std::set<Expr>{Expr::atom("a"), Expr::atom("b")});

    EvalResult pair = rhd::evalProgram(
        prog::cons(prog::quote(Expr::atom("a")), prog::input()), x);
    CHECK(pair.values == std::set<Expr>{Expr::pair(Expr::atom("a"), x)});

    EvalResult h = rhd::evalProgram(prog::head(prog::input()), x);
    CHECK(h.values == std::set<Expr>{Expr::atom("hello")});

    EvalResult eq = rhd::evalProgram(
        prog::ite(prog::eq(prog::input(), prog::quote(x)),
                  prog::quote(Expr::atom("yes")), prog::diverge()),
        x);
    CHECK(eq.values == std::set<Expr>{Expr::atom("yes")});

    // universal application runs data as code
    EvalResult app = rhd::evalProgram(
        prog::apply(prog::quote(prog::head(prog::input())), prog::input()), x);
    CHECK(app.values == std::set<Expr>{Expr::atom("hello")});
}

TEST_CASE("evaluator reports stuck, exhaustion and overflow distinctly") {
    Expr x = Expr::atom("x");

    EvalResult stuck = rhd::evalProgram(prog::head(prog::input()), x);
    CHECK(stuck.values.empty());
    CHECK(stuck.stuckCount == 1);
    CHECK_FALSE(stuck.definitelyDivergent);

    EvalResult unknown = rhd::evalProgram(Expr::atom("mystery"), x);
    CHECK(unknown.stuckCount == 1);

    // self-application loops forever and must exhaust, not diverge
    Expr omega = prog::apply(prog::input(), prog::input());
    EvalResult loop = rhd::evalProgram(omega, omega, 500);
    CHECK(loop.values.empty());
    CHECK(loop.budgetExhausted);
    CHECK_FALSE(loop.definitelyDivergent);

    // forks are capped
    Expr fork = prog::amb(prog::input(), prog::apply(prog::input(), prog::input()));
    EvalResult many = rhd::evalProgram(fork, fork, 100000);
    CHECK(many.branchOverflow);
    CHECK_FALSE(many.complete());
}

TEST_CASE("deterministic mode") {
    Expr x = Expr::atom("x");
    EvalResult one = rhd::evalProgram(prog::quote(Expr::atom("k")), x,
                                      rhd::kDefaultBudget, EvalMode::Det);
    CHECK(one.values.size() == 1);

    EvalResult bad = rhd::evalProgram(
        prog::amb(prog::input(), prog::input()), x, rhd::kDefaultBudget,
        EvalMode::Det);
    CHECK(bad.stuckCount == 1);
    CHECK(bad.values.empty());
}

TEST_CASE("value sets do not depend on branch order") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 50; ++i) {
        Expr a = prog::quote(randomSexpr(rng, 2));
        Expr b = prog::amb(prog::quote(randomSexpr(rng, 2)),
                           prog::quote(randomSexpr(rng, 2)));
        EvalResult l = rhd::evalProgram(prog::amb(a, b), Expr::nil());
        EvalResult r = rhd::evalProgram(prog::amb(b, a), Expr::nil());
        CHECK(l.values == r.values);
    }
}

TEST_CASE("fixed points: constant transformer reproduces its own code") {
    // transformer output is (quote u), so the fixed point returns itself
    auto us = rhd::fixedPoints({quoteNthTransformer(0)});
    REQUIRE(us.size() == 1);
    EvalResult r = rhd::evalProgram(us[0], Expr::atom("anything"));
    CHECK(r.complete());
    CHECK(r.values == std::set<Expr>{us[0]});
}

TEST_CASE("fixed points: fixed literal code") {
    Expr echo = Expr::atom("input");
    auto us = rhd::fixedPoints({constantTransformer(echo)});
    Expr x = Expr::parse("(some data)");
    EvalResult r = rhd::evalProgram(us[0], x);
    CHECK(r.values == std::set<Expr>{x});
}

TEST_CASE("fixed points: swapping pair agrees observationally") {
    auto us = rhd::fixedPoints(
        {quoteNthTransformer(1), quoteNthTransformer(0)});
    REQUIRE(us.size() == 2);
    // each code reproduces the other
    for (const Expr& x : {Expr::atom("a"), Expr::parse("(x y)")}) {
        EvalResult r0 = rhd::evalProgram(us[0], x);
        EvalResult r1 = rhd::evalProgram(us[1], x);
        CHECK(r0.values == std::set<Expr>{us[1]});
        CHECK(r1.values == std::set<Expr>{us[0]});
    }
}

TEST_CASE("fixed points: self-referential transformers exhaust both routes") {
    // f1 returns the second code, f2 the first: running either fixed point
    // unwinds forever, on both sides of the equation
    Expr pick2 = prog::head(prog::tail(prog::input()));
    Expr pick1 = prog::head(prog::input());
    auto us = rhd::fixedPoints({pick2, pick1});
    EvalResult r = rhd::evalProgram(us[0], Expr::atom("x"));
    CHECK(r.values.empty());
    CHECK(r.budgetExhausted);
}

TEST_CASE("fixed points: non-total transformer is rejected") {
    CHECK_THROWS_AS(rhd::fixedPoints({prog::diverge()}),
                    rhd::RealizationError);
    CHECK_THROWS_AS(
        rhd::fixedPoints({prog::amb(prog::quote(Expr::atom("a")),
                                    prog::quote(Expr::atom("b")))}),
        rhd::RealizationError);
}

TEST_CASE("realize: empty relation gives everywhere-divergent codes") {
    KripkeModel m;
    m.worlds = {"w0"};
    auto b = rhd::realize(m);
    REQUIRE(b.codes.size() == 1);
    for (const Expr& x :
         {b.codes[0], Expr::atom("a"), Expr::parse("(p q)")}) {
        EvalResult r = rhd::evalProgram(b.codes[0], x, b.budget);
        CHECK(r.definitelyDivergent);
    }
}

TEST_CASE("realize: self-loop code maps itself to itself") {
    KripkeModel m;
    m.worlds = {"w0"};
    m.triples = {{"w0", "w0", "w0"}};
    auto b = rhd::realize(m);
    EvalResult r = rhd::evalProgram(b.codes[0], b.codes[0], b.budget,
                                    EvalMode::Det);
    CHECK(r.values == std::set<Expr>{b.codes[0]});
}

TEST_CASE("realize: deterministic models give amb-free, det-evaluable codes") {
    KripkeModel m = rhd::randomModel(4, 0.5, {"p", "q"}, 8, true);
    auto b = rhd::realize(m);
    CHECK(b.deterministic);
    for (size_t i = 0; i < b.codes.size(); ++i) {
        CHECK_FALSE(mentionsAmb(b.codes[i]));
        for (size_t j = 0; j < b.codes.size(); ++j) {
            EvalResult r = rhd::evalProgram(b.codes[i], b.codes[j], b.budget,
                                            EvalMode::Det);
            CHECK(r.complete());
            CHECK(r.values.size() <= 1);
        }
    }
}

TEST_CASE("realize: deterministic claim is checked") {
    KripkeModel m;
    m.worlds = {"a", "b", "c"};
    m.triples = {{"a", "a", "b"}, {"a", "a", "c"}};
    CHECK_THROWS_AS(rhd::realize(m, rhd::kDefaultBudget, true),
                    std::invalid_argument);
    CHECK_NOTHROW(rhd::realize(m));
}

TEST_CASE("membership basics") {
    KripkeModel m = rhd::randomModel(3, 0.4, {"p"}, 21, false);
    auto b = rhd::realize(m);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(rhd::membership(b, Formula::top(), i));
        CHECK_FALSE(rhd::membership(b, Formula::bottom(), i));
        CHECK(rhd::membership(b, Formula::parse("false |> p"), i));
        CHECK(rhd::membership(b, Formula::var("p"), i) ==
              (m.valuation.count("p") &&
               m.valuation.at("p").count(m.worlds[i]) > 0));
    }
}

TEST_CASE("membership refuses hand-crafted bundles") {
    KripkeModel m;
    m.worlds = {"w0"};
    rhd::RealizationBundle fake;
    fake.model = m;
    fake.codes = {prog::input()};  // not a lookup shape
    CHECK_THROWS_AS(rhd::membership(fake, Formula::top(), 0),
                    rhd::RealizationError);
}

TEST_CASE("realized codes diverge outside the code set") {
    KripkeModel m = rhd::randomModel(3, 0.6, {"p"}, 5, false);
    auto b = rhd::realize(m);
    std::mt19937_64 rng(40);
    for (int k = 0; k < 20; ++k) {
        Expr junk = randomSexpr(rng, 3);
        if (b.codeIndex(junk)) continue;
        for (const Expr& code : b.codes)
            CHECK(rhd::evalProgram(code, junk, b.budget).definitelyDivergent);
    }
}

TEST_CASE("realization matrix agrees with forcing") {
    // single world, variable false there
    KripkeModel m;
    m.worlds = {"w0"};
    m.valuation["p"] = {};
    auto b = rhd::realize(m);
    auto c = rhd::closure(Formula::var("p"));
    auto report = rhd::verifyRealization(b, c);
    CHECK(report.ok);
    CHECK(report.matrix.size() == c.size());

    // the extracted countermodel of the iterated-modality non-theorem
    Formula f = Formula::parse("(true |> p) |> p");
    auto verdict = rhd::decide(f, rhd::LogicMode::R);
    REQUIRE_FALSE(rhd::isValid(verdict));
    const auto& ref = std::get<rhd::Refuted>(verdict);
    auto bundle = rhd::realize(ref.model);
    auto cf = rhd::closure(f);
    auto rep = rhd::verifyRealization(bundle, cf);
    for (size_t bad : rep.mismatches) {
        UNSCOPED_INFO("mismatch at world " << rep.matrix[bad].world << " on "
                                           << rep.matrix[bad].formula.str());
    }
    REQUIRE(rep.ok);
    CHECK_FALSE(
        rhd::membership(bundle, f, bundle.model.worldIndex(ref.world)));
}

TEST_CASE("nondeterministic refutation of the intersection axiom realizes") {
    Formula a4 = Formula::parse("p |> q -> (p |> r -> p |> (q & r))");
    auto verdict = rhd::decide(a4, rhd::LogicMode::R);
    REQUIRE_FALSE(rhd::isValid(verdict));
    const auto& ref = std::get<rhd::Refuted>(verdict);
    REQUIRE_FALSE(rhd::isDeterministic(ref.model));

    CHECK_THROWS_AS(rhd::realize(ref.model, rhd::kDefaultBudget, true),
                    std::invalid_argument);

    auto bundle = rhd::realize(ref.model);
    auto rep = rhd::verifyRealization(bundle, rhd::closure(a4));
    REQUIRE(rep.ok);
    CHECK_FALSE(
        rhd::membership(bundle, a4, bundle.model.worldIndex(ref.world)));

    // under the universal reading the intersection axiom holds even here
    for (size_t i = 0; i < bundle.model.worlds.size(); ++i)
        CHECK(rhd::membership(bundle, a4, i, rhd::Reading::Universal));
}

TEST_CASE("bundles round-trip through files") {
    KripkeModel m = rhd::randomModel(3, 0.5, {"p", "q"}, 77, false);
    auto b = rhd::realize(m);
    auto j = rhd::bundleToJson(b);
    auto b2 = rhd::bundleFromJson(j);
    CHECK(b2.model == b.model);
    CHECK(b2.codes == b.codes);
    CHECK(b2.valuation == b.valuation);
    CHECK(b2.budget == b.budget);
    // a loaded bundle still passes the shape inspection
    CHECK(rhd::membership(b2, Formula::top(), 0));

    auto broken = j;
    broken["codes"].erase(broken["codes"].begin().key());
    CHECK_THROWS_AS(rhd::bundleFromJson(broken), rhd::RealizationError);
}
