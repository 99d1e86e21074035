#pragma once

// A concrete enumeration of partial computable functions over a toy quoting
// language.  The universe is the set of s-expressions; code is data.  A
// program is an s-expression evaluated against one input:
//
//   input                 the argument
//   diverge               no value
//   nil, t                self-evaluating constants
//   (quote x)             the literal x
//   (if c a b)            a if c is not nil, else b
//   (eq a b)              t / nil by structural equality
//   (cons a b) (head x) (tail x)
//   (amb a b)             both branches (nondeterministic mode only)
//   (apply c a)           run the value of c as a program on the value of a
//
// Evaluation is budgeted per branch; divergence is only ever reported when a
// branch actually reached diverge, never inferred from an expired budget.
//
// On top of the evaluator: the n-ary recursion theorem (fixed points of total
// code transformers, built by the double-application construction), and the
// realization of a finite Kripke model as actual codes whose application
// behavior mirrors the model's ternary relation.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rhd/formula.hpp"
#include "rhd/kripke.hpp"

namespace rhd {

struct SexprParseError : std::runtime_error {
    size_t position;
    SexprParseError(const std::string& what, size_t pos)
        : std::runtime_error(what + " (at offset " + std::to_string(pos) + ")"),
          position(pos) {}
};

// inconclusive evaluation where a definite answer was required
struct EvalBudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RealizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Expr {
    struct Node {
        bool atom;
        std::string name;
        std::shared_ptr<const Node> head, tail;
        size_t hash = 0;
        size_t size = 1;
    };
    std::shared_ptr<const Node> n_;
    explicit Expr(std::shared_ptr<const Node> n) : n_(std::move(n)) {}

    static size_t combine(size_t seed, size_t v) {
        return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    }

public:
    static Expr atom(const std::string& name) {
        auto n = std::make_shared<Node>();
        n->atom = true;
        n->name = name;
        n->hash = combine(0x9e21, std::hash<std::string>{}(name));
        return Expr(std::move(n));
    }
    static Expr pair(const Expr& a, const Expr& b) {
        auto n = std::make_shared<Node>();
        n->atom = false;
        n->head = a.n_;
        n->tail = b.n_;
        n->hash = combine(combine(0x517c, a.n_->hash), b.n_->hash);
        n->size = 1 + a.n_->size + b.n_->size;
        return Expr(std::move(n));
    }
    static Expr nil() { return atom("nil"); }
    static Expr truth() { return atom("t"); }
    static Expr list(const std::vector<Expr>& elems) {
        Expr acc = nil();
        for (size_t i = elems.size(); i-- > 0;) acc = pair(elems[i], acc);
        return acc;
    }

    bool isAtom() const { return n_->atom; }
    bool isPair() const { return !n_->atom; }
    const std::string& atomName() const {
        if (!n_->atom) throw std::logic_error("atomName on a pair");
        return n_->name;
    }
    Expr head() const {
        if (n_->atom) throw std::logic_error("head of an atom");
        return Expr(n_->head);
    }
    Expr tail() const {
        if (n_->atom) throw std::logic_error("tail of an atom");
        return Expr(n_->tail);
    }
    size_t size() const { return n_->size; }
    size_t hash() const { return n_->hash; }

    bool isNil() const { return n_->atom && n_->name == "nil"; }

    static int compare(const Expr& a, const Expr& b) {
        if (a.n_ == b.n_) return 0;
        if (a.n_->atom != b.n_->atom) return a.n_->atom ? -1 : 1;
        if (a.n_->atom) return a.n_->name.compare(b.n_->name);
        int c = compare(a.head(), b.head());
        if (c != 0) return c;
        return compare(a.tail(), b.tail());
    }
    friend bool operator==(const Expr& a, const Expr& b) {
        if (a.n_ == b.n_) return true;
        if (a.n_->hash != b.n_->hash) return false;
        return compare(a, b) == 0;
    }
    friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }
    friend bool operator<(const Expr& a, const Expr& b) {
        return compare(a, b) < 0;
    }

    // proper lists print as (a b c); improper tails use a dot
    std::string str() const {
        std::string out;
        print(out);
        return out;
    }

    static Expr parse(const std::string& text);

private:
    void print(std::string& out) const {
        if (n_->atom) {
            out += n_->name;
            return;
        }
        out += '(';
        const Node* cur = n_.get();
        bool first = true;
        while (true) {
            if (!first) out += ' ';
            first = false;
            Expr(cur->head).print(out);
            if (cur->tail->atom) {
                if (cur->tail->name != "nil") {
                    out += " . ";
                    out += cur->tail->name;
                }
                break;
            }
            cur = cur->tail.get();
        }
        out += ')';
    }
};

struct ExprHash {
    size_t operator()(const Expr& e) const { return e.hash(); }
};

inline std::ostream& operator<<(std::ostream& os, const Expr& e) {
    return os << e.str();
}

namespace detail {

inline bool sexprAtomChar(char c) {
    return c != '(' && c != ')' && c != ' ' && c != '\t' && c != '\n' &&
           c != '\r';
}

struct SexprParser {
    const std::string& s;
    size_t i = 0;

    void skipWs() {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' ||
                                s[i] == '\r'))
            ++i;
    }

    Expr parseOne() {
        skipWs();
        if (i >= s.size()) throw SexprParseError("unexpected end of input", i);
        if (s[i] == '(') {
            ++i;
            return parseListRest();
        }
        if (s[i] == ')') throw SexprParseError("unbalanced ')'", i);
        size_t start = i;
        while (i < s.size() && sexprAtomChar(s[i])) ++i;
        std::string name = s.substr(start, i - start);
        if (name == ".") throw SexprParseError("unexpected '.'", start);
        return Expr::atom(name);
    }

    Expr parseListRest() {
        skipWs();
        if (i >= s.size()) throw SexprParseError("missing ')'", i);
        if (s[i] == ')') {
            ++i;
            return Expr::nil();
        }
        if (s[i] == '.' && i + 1 < s.size() && !sexprAtomChar(s[i + 1])) {
            throw SexprParseError("unexpected '.'", i);
        }
        if (s[i] == '.' &&
            (i + 1 >= s.size() || s[i + 1] == ' ' || s[i + 1] == '(')) {
            throw SexprParseError("unexpected '.'", i);
        }
        Expr head = parseOne();
        skipWs();
        if (i < s.size() && s[i] == '.' &&
            (i + 1 >= s.size() || !sexprAtomChar(s[i + 1]))) {
            ++i;
            Expr tail = parseOne();
            skipWs();
            if (i >= s.size() || s[i] != ')')
                throw SexprParseError("expected ')' after dotted tail", i);
            ++i;
            return Expr::pair(head, tail);
        }
        return Expr::pair(head, parseListRest());
    }
};

}  // namespace detail

inline Expr Expr::parse(const std::string& text) {
    detail::SexprParser p{text};
    Expr e = p.parseOne();
    p.skipWs();
    if (p.i != text.size())
        throw SexprParseError("unexpected trailing input", p.i);
    return e;
}

// program form constructors
namespace prog {

inline Expr input() { return Expr::atom("input"); }
inline Expr diverge() { return Expr::atom("diverge"); }
inline Expr quote(const Expr& x) { return Expr::list({Expr::atom("quote"), x}); }
inline Expr ite(const Expr& c, const Expr& a, const Expr& b) {
    return Expr::list({Expr::atom("if"), c, a, b});
}
inline Expr eq(const Expr& a, const Expr& b) {
    return Expr::list({Expr::atom("eq"), a, b});
}
inline Expr cons(const Expr& a, const Expr& b) {
    return Expr::list({Expr::atom("cons"), a, b});
}
inline Expr head(const Expr& x) { return Expr::list({Expr::atom("head"), x}); }
inline Expr tail(const Expr& x) { return Expr::list({Expr::atom("tail"), x}); }
inline Expr amb(const Expr& a, const Expr& b) {
    return Expr::list({Expr::atom("amb"), a, b});
}
inline Expr apply(const Expr& code, const Expr& arg) {
    return Expr::list({Expr::atom("apply"), code, arg});
}

}  // namespace prog

enum class EvalMode { Det, Nondet };

inline constexpr long kDefaultBudget = 10000;
inline constexpr int kBranchCap = 256;

struct EvalResult {
    std::set<Expr> values;
    bool budgetExhausted = false;
    bool branchOverflow = false;
    bool definitelyDivergent = false;
    int divergedCount = 0;
    int stuckCount = 0;
    std::string firstStuck;

    bool complete() const {
        return !budgetExhausted && !branchOverflow && stuckCount == 0;
    }
};

namespace detail {

struct BranchEnd {
    enum class Kind { Value, Diverged, Stuck, Exhausted, Overflow } kind;
    Expr value = Expr::nil();
    long fuel = 0;
    std::string note;
};

struct EvalCtx {
    EvalMode mode;
    int forks = 0;
};

inline void evalExpr(const Expr& e, const Expr& input, long fuel, EvalCtx& ctx,
                     std::vector<BranchEnd>& out);

// evaluate items left to right, threading fuel through each value branch
inline void evalSeq(const std::vector<Expr>& items, size_t at,
                    const Expr& input, long fuel, EvalCtx& ctx,
                    std::vector<Expr>& acc,
                    const std::function<void(const std::vector<Expr>&, long)>&
                        done,
                    std::vector<BranchEnd>& out) {
    if (at == items.size()) {
        done(acc, fuel);
        return;
    }
    std::vector<BranchEnd> ends;
    evalExpr(items[at], input, fuel, ctx, ends);
    for (auto& end : ends) {
        if (end.kind != BranchEnd::Kind::Value) {
            out.push_back(std::move(end));
            continue;
        }
        acc.push_back(end.value);
        evalSeq(items, at + 1, input, end.fuel, ctx, acc, done, out);
        acc.pop_back();
    }
}

// tail as a proper list of exactly n elements, or nothing
inline std::optional<std::vector<Expr>> properList(Expr e, size_t n) {
    std::vector<Expr> out;
    while (e.isPair()) {
        out.push_back(e.head());
        e = e.tail();
    }
    if (!e.isNil() || out.size() != n) return std::nullopt;
    return out;
}

inline void evalExpr(const Expr& e, const Expr& input, long fuel, EvalCtx& ctx,
                     std::vector<BranchEnd>& out) {
    if (fuel <= 0) {
        out.push_back({BranchEnd::Kind::Exhausted});
        return;
    }
    --fuel;

    if (e.isAtom()) {
        const std::string& a = e.atomName();
        if (a == "input") {
            out.push_back({BranchEnd::Kind::Value, input, fuel});
        } else if (a == "diverge") {
            out.push_back({BranchEnd::Kind::Diverged});
        } else if (a == "nil" || a == "t") {
            out.push_back({BranchEnd::Kind::Value, e, fuel});
        } else {
            out.push_back({BranchEnd::Kind::Stuck, Expr::nil(), 0,
                           "unknown atom '" + a + "'"});
        }
        return;
    }

    if (!e.head().isAtom()) {
        out.push_back(
            {BranchEnd::Kind::Stuck, Expr::nil(), 0, "non-atom operator"});
        return;
    }
    const std::string& op = e.head().atomName();
    auto stuck = [&](const std::string& why) {
        out.push_back({BranchEnd::Kind::Stuck, Expr::nil(), 0, why});
    };

    if (op == "quote") {
        auto args = properList(e.tail(), 1);
        if (!args) return stuck("quote expects one operand");
        out.push_back({BranchEnd::Kind::Value, (*args)[0], fuel});
        return;
    }
    if (op == "if") {
        auto args = properList(e.tail(), 3);
        if (!args) return stuck("if expects three operands");
        std::vector<BranchEnd> ends;
        evalExpr((*args)[0], input, fuel, ctx, ends);
        for (auto& end : ends) {
            if (end.kind != BranchEnd::Kind::Value) {
                out.push_back(std::move(end));
                continue;
            }
            evalExpr(end.value.isNil() ? (*args)[2] : (*args)[1], input,
                     end.fuel, ctx, out);
        }
        return;
    }
    if (op == "amb") {
        auto args = properList(e.tail(), 2);
        if (!args) return stuck("amb expects two operands");
        if (ctx.mode == EvalMode::Det)
            return stuck("amb in deterministic mode");
        if (++ctx.forks > kBranchCap) {
            out.push_back({BranchEnd::Kind::Overflow});
            return;
        }
        evalExpr((*args)[0], input, fuel, ctx, out);
        evalExpr((*args)[1], input, fuel, ctx, out);
        return;
    }
    if (op == "eq" || op == "cons" || op == "apply") {
        auto args = properList(e.tail(), 2);
        if (!args) return stuck(op + " expects two operands");
        std::vector<Expr> acc;
        evalSeq(*args, 0, input, fuel, ctx, acc,
                [&](const std::vector<Expr>& vs, long f) {
                    if (op == "eq") {
                        out.push_back({BranchEnd::Kind::Value,
                                       vs[0] == vs[1] ? Expr::truth()
                                                      : Expr::nil(),
                                       f});
                    } else if (op == "cons") {
                        out.push_back({BranchEnd::Kind::Value,
                                       Expr::pair(vs[0], vs[1]), f});
                    } else {
                        evalExpr(vs[0], vs[1], f, ctx, out);  // universal app
                    }
                },
                out);
        return;
    }
    if (op == "head" || op == "tail") {
        auto args = properList(e.tail(), 1);
        if (!args) return stuck(op + " expects one operand");
        std::vector<BranchEnd> ends;
        evalExpr((*args)[0], input, fuel, ctx, ends);
        for (auto& end : ends) {
            if (end.kind != BranchEnd::Kind::Value) {
                out.push_back(std::move(end));
                continue;
            }
            if (!end.value.isPair()) {
                out.push_back({BranchEnd::Kind::Stuck, Expr::nil(), 0,
                               op + " of a non-pair"});
                continue;
            }
            out.push_back({BranchEnd::Kind::Value,
                           op == "head" ? end.value.head() : end.value.tail(),
                           end.fuel});
        }
        return;
    }
    stuck("unknown operator '" + op + "'");
}

}  // namespace detail

inline EvalResult evalProgram(const Expr& code, const Expr& input,
                              long budget = kDefaultBudget,
                              EvalMode mode = EvalMode::Nondet) {
    detail::EvalCtx ctx{mode};
    std::vector<detail::BranchEnd> ends;
    detail::evalExpr(code, input, budget, ctx, ends);
    EvalResult r;
    for (const auto& end : ends) {
        switch (end.kind) {
            case detail::BranchEnd::Kind::Value:
                r.values.insert(end.value);
                break;
            case detail::BranchEnd::Kind::Diverged:
                ++r.divergedCount;
                break;
            case detail::BranchEnd::Kind::Stuck:
                if (r.stuckCount++ == 0) r.firstStuck = end.note;
                break;
            case detail::BranchEnd::Kind::Exhausted:
                r.budgetExhausted = true;
                break;
            case detail::BranchEnd::Kind::Overflow:
                r.branchOverflow = true;
                break;
        }
    }
    r.definitelyDivergent = r.values.empty() && r.complete() &&
                            r.divergedCount > 0;
    return r;
}

// ---------------------------------------------------------------------------
// recursion theorem
// ---------------------------------------------------------------------------

namespace detail {

// object expression that evaluates to the atom `name`
inline Expr quotedAtom(const std::string& name) {
    return prog::quote(Expr::atom(name));
}

// object expression building the data list whose elements are the values of
// the given object expressions
inline Expr consList(const std::vector<Expr>& elemExprs) {
    Expr acc = prog::quote(Expr::nil());
    for (size_t i = elemExprs.size(); i-- > 0;)
        acc = prog::cons(elemExprs[i], acc);
    return acc;
}

// object expression selecting element j of the input list
inline Expr nthOfInput(size_t j) {
    Expr e = prog::input();
    for (size_t k = 0; k < j; ++k) e = prog::tail(e);
    return prog::head(e);
}

// object expression that rebuilds, from the input tuple X, the code
//   (apply (apply (quote X_j) (quote X)) input)
inline Expr selfApplicationBuilder(size_t j) {
    return consList(
        {quotedAtom("apply"),
         consList({quotedAtom("apply"),
                   consList({quotedAtom("quote"), nthOfInput(j)}),
                   consList({quotedAtom("quote"), prog::input()})}),
         quotedAtom("input")});
}

}  // namespace detail

// Fixed points of n total deterministic code transformers.  Each transformer
// is an object program mapping a list of n codes to a code.  The returned
// codes are pairwise distinct (an inert tag indexes each intermediate code)
// and satisfy, observationally on sampled inputs, that running code i equals
// running the transformer's output on the fixed points.
inline std::vector<Expr> fixedPoints(const std::vector<Expr>& transformers,
                                     long budget = kDefaultBudget) {
    const size_t n = transformers.size();
    if (n < 1) throw std::invalid_argument("need at least one transformer");

    std::vector<Expr> gBuilders;
    for (size_t j = 0; j < n; ++j)
        gBuilders.push_back(detail::selfApplicationBuilder(j));

    std::vector<Expr> ws;
    for (size_t i = 0; i < n; ++i) {
        Expr body =
            prog::apply(prog::quote(transformers[i]), detail::consList(gBuilders));
        // distinct inert tag: the enumeration has room to pick distinct codes
        // for one function, and distinctness is what indexes the valuation
        ws.push_back(prog::head(
            prog::cons(body, prog::quote(Expr::atom("ix" + std::to_string(i))))));
    }
    Expr tuple = Expr::list(ws);

    std::vector<Expr> us;
    for (size_t i = 0; i < n; ++i)
        us.push_back(prog::apply(
            prog::apply(prog::quote(ws[i]), prog::quote(tuple)), prog::input()));

    // the transformers must be total deterministic programs on the fixed points
    Expr uTuple = Expr::list(us);
    std::vector<Expr> outputs;
    for (size_t i = 0; i < n; ++i) {
        EvalResult r = evalProgram(transformers[i], uTuple, budget, EvalMode::Det);
        if (!r.complete() || r.values.size() != 1)
            throw RealizationError(
                "transformer " + std::to_string(i) +
                " is not total deterministic within budget on the fixed points");
        outputs.push_back(*r.values.begin());
    }

    // observational check of the fixed-point equations on a few inputs
    std::vector<Expr> samples = us;
    samples.push_back(Expr::atom("a"));
    samples.push_back(Expr::pair(Expr::atom("a"), Expr::atom("b")));
    for (size_t i = 0; i < n; ++i)
        for (const Expr& x : samples) {
            EvalResult lhs = evalProgram(us[i], x, budget);
            EvalResult rhs = evalProgram(outputs[i], x, budget);
            if (lhs.stuckCount || rhs.stuckCount)
                throw std::logic_error("fixed-point code got stuck");
            if (lhs.values != rhs.values ||
                lhs.complete() != rhs.complete())
                throw std::logic_error("fixed-point equation failed");
        }
    return us;
}

// ---------------------------------------------------------------------------
// realization of a Kripke model
// ---------------------------------------------------------------------------

struct RealizationBundle {
    KripkeModel model;
    std::vector<Expr> codes;  // aligned with model.worlds
    std::map<std::string, std::set<size_t>> valuation;  // var -> world indices
    long budget = kDefaultBudget;
    bool deterministic = false;

    std::optional<size_t> codeIndex(const Expr& e) const {
        for (size_t i = 0; i < codes.size(); ++i)
            if (codes[i] == e) return i;
        return std::nullopt;
    }
    std::vector<Expr> valuationCodes(const std::string& var) const {
        std::vector<Expr> out;
        auto it = valuation.find(var);
        if (it == valuation.end()) return out;
        for (size_t i : it->second) out.push_back(codes[i]);
        return out;
    }
};

// Builds one transformer per world: given the tuple of all codes, produce a
// lookup program that equality-tests its input against each source code with
// outgoing edges under this world and branches over the target codes, ending
// in diverge.  Deterministic models yield amb-free lookups.
inline RealizationBundle realize(const KripkeModel& m,
                                 long budget = kDefaultBudget,
                                 std::optional<bool> claimDeterministic =
                                     std::nullopt) {
    m.validate();
    const bool det = claimDeterministic.value_or(isDeterministic(m));
    if (det && !isDeterministic(m))
        throw std::invalid_argument(
            "deterministic realization of a nondeterministic model");
    const size_t n = m.worlds.size();

    // rows[i]: source index -> target indices under program world i
    std::vector<std::map<size_t, std::vector<size_t>>> rows(n);
    for (const auto& t : m.triples)
        rows[m.worldIndex(t.program)][m.worldIndex(t.source)].push_back(
            m.worldIndex(t.target));

    std::vector<Expr> transformers;
    for (size_t i = 0; i < n; ++i) {
        Expr chain = detail::quotedAtom("diverge");
        for (auto it = rows[i].rbegin(); it != rows[i].rend(); ++it) {
            const auto& targets = it->second;
            Expr targetData = detail::consList(
                {detail::quotedAtom("quote"), detail::nthOfInput(targets.back())});
            for (size_t k = targets.size() - 1; k-- > 0;)
                targetData = detail::consList(
                    {detail::quotedAtom("amb"),
                     detail::consList({detail::quotedAtom("quote"),
                                       detail::nthOfInput(targets[k])}),
                     targetData});
            Expr condData = detail::consList(
                {detail::quotedAtom("eq"), detail::quotedAtom("input"),
                 detail::consList(
                     {detail::quotedAtom("quote"), detail::nthOfInput(it->first)})});
            chain = detail::consList(
                {detail::quotedAtom("if"), condData, targetData, chain});
        }
        transformers.push_back(chain);
    }

    RealizationBundle b;
    b.model = m;
    b.codes = fixedPoints(transformers, budget);
    b.budget = budget;
    b.deterministic = det;
    for (const auto& [var, ws] : m.valuation) {
        auto& idxs = b.valuation[var];
        for (const auto& w : ws) idxs.insert(m.worldIndex(w));
    }
    return b;
}

enum class Reading { Existential, Universal };

namespace detail {

// Inspect a realized code: it must be the double application of a stored
// intermediate code to the full tuple, and that application must evaluate to
// an equality-test chain over the realized codes ending in diverge.  This is
// what restricts the effective domain of every realized code to the codes
// themselves, so set membership can quantify over world indices only.
class RealizationChecker {
    const RealizationBundle& b_;
    Reading reading_;
    std::map<std::pair<size_t, size_t>, EvalResult> appCache_;
    std::map<std::pair<std::string, size_t>, bool> memo_;

    void checkLookupShape(const Expr& code, size_t world) {
        auto isForm = [](const Expr& e, const char* tag, size_t arity)
            -> std::optional<std::vector<Expr>> {
            if (!e.isPair() || !e.head().isAtom() || e.head().atomName() != tag)
                return std::nullopt;
            return properList(e.tail(), arity);
        };
        auto args = isForm(code, "apply", 2);
        if (!args || !(*args)[1].isAtom() ||
            (*args)[1].atomName() != "input")
            throw RealizationError("world " + std::to_string(world) +
                                   ": code is not an application to input");
        Expr inner = (*args)[0];
        EvalResult r = evalProgram(inner, Expr::nil(), b_.budget, EvalMode::Det);
        if (!r.complete() || r.values.size() != 1)
            throw RealizationError("world " + std::to_string(world) +
                                   ": lookup construction did not evaluate");
        std::set<Expr> codeSet(b_.codes.begin(), b_.codes.end());
        std::set<Expr> keysSeen;
        Expr l = *r.values.begin();
        std::function<void(const Expr&)> checkTargets = [&](const Expr& t) {
            if (auto q = isForm(t, "quote", 1)) {
                if (!codeSet.count((*q)[0]))
                    throw RealizationError("lookup target is not a code");
                return;
            }
            if (auto a = isForm(t, "amb", 2)) {
                if (b_.deterministic)
                    throw RealizationError(
                        "amb in a deterministic realization");
                checkTargets((*a)[0]);
                checkTargets((*a)[1]);
                return;
            }
            throw RealizationError("unexpected lookup target shape");
        };
        while (true) {
            if (l.isAtom()) {
                if (l.atomName() == "diverge") break;
                throw RealizationError("lookup chain ends in " + l.atomName());
            }
            auto branch = isForm(l, "if", 3);
            if (!branch) throw RealizationError("unexpected lookup shape");
            auto cond = isForm((*branch)[0], "eq", 2);
            if (!cond || !(*cond)[0].isAtom() ||
                (*cond)[0].atomName() != "input")
                throw RealizationError("lookup test is not an input equality");
            auto key = isForm((*cond)[1], "quote", 1);
            if (!key || !codeSet.count((*key)[0]))
                throw RealizationError("lookup key is not a code");
            if (!keysSeen.insert((*key)[0]).second)
                throw RealizationError("duplicate lookup key");
            checkTargets((*branch)[1]);
            l = (*branch)[2];
        }
    }

    const EvalResult& application(size_t i, size_t j) {
        auto key = std::make_pair(i, j);
        auto it = appCache_.find(key);
        if (it != appCache_.end()) return it->second;
        EvalResult r = evalProgram(
            b_.codes[i], b_.codes[j], b_.budget,
            b_.deterministic ? EvalMode::Det : EvalMode::Nondet);
        if (r.stuckCount)
            throw RealizationError("realized code got stuck: " + r.firstStuck);
        return appCache_.emplace(key, std::move(r)).first->second;
    }

public:
    RealizationChecker(const RealizationBundle& b, Reading reading)
        : b_(b), reading_(reading) {
        if (b.codes.size() != b.model.worlds.size())
            throw RealizationError("bundle codes do not match the worlds");
        std::set<Expr> distinct(b.codes.begin(), b.codes.end());
        if (distinct.size() != b.codes.size())
            throw RealizationError("realized codes are not pairwise distinct");
        for (const auto& [var, idxs] : b.valuation)
            for (size_t i : idxs)
                if (i >= b.codes.size())
                    throw RealizationError("valuation index out of range");
        for (size_t i = 0; i < b.codes.size(); ++i)
            checkLookupShape(b.codes[i], i);
    }

    bool membership(const Formula& phi, size_t i) {
        if (i >= b_.codes.size())
            throw std::invalid_argument("world index out of range");
        auto key = std::make_pair(phi.str(), i);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        bool r = false;
        switch (phi.kind()) {
            case Formula::Kind::Bottom:
                r = false;
                break;
            case Formula::Kind::Var: {
                auto v = b_.valuation.find(phi.varName());
                r = v != b_.valuation.end() && v->second.count(i);
                break;
            }
            case Formula::Kind::Implies:
                r = !membership(phi.lhs(), i) || membership(phi.rhs(), i);
                break;
            case Formula::Kind::Rhd: {
                r = true;
                for (size_t j = 0; j < b_.codes.size() && r; ++j) {
                    if (!membership(phi.lhs(), j)) continue;
                    const EvalResult& app = application(i, j);
                    std::vector<size_t> valueIdx;
                    for (const Expr& v : app.values) {
                        auto k = b_.codeIndex(v);
                        if (!k)
                            throw RealizationError(
                                "realized code produced a non-code value");
                        valueIdx.push_back(*k);
                    }
                    if (reading_ == Reading::Existential) {
                        bool hit = false;
                        for (size_t k : valueIdx)
                            if (membership(phi.rhs(), k)) { hit = true; break; }
                        if (hit) continue;
                        if (!app.complete())
                            throw EvalBudgetError(
                                "inconclusive evaluation at world pair (" +
                                std::to_string(i) + ", " + std::to_string(j) +
                                ")");
                        if (!app.values.empty()) r = false;
                        // empty and complete: no terminating path, vacuous
                    } else {
                        for (size_t k : valueIdx)
                            if (!membership(phi.rhs(), k)) { r = false; break; }
                        if (r && !app.complete())
                            throw EvalBudgetError(
                                "inconclusive evaluation at world pair (" +
                                std::to_string(i) + ", " + std::to_string(j) +
                                ")");
                    }
                }
                break;
            }
        }
        memo_[key] = r;
        return r;
    }
};

}  // namespace detail

// Does the code of world i belong to the set the formula denotes?  Defined
// for bundles whose codes pass the lookup-shape inspection; anything else is
// refused rather than approximated.
inline bool membership(const RealizationBundle& b, const Formula& phi,
                       size_t worldIdx, Reading reading = Reading::Existential) {
    detail::RealizationChecker checker(b, reading);
    return checker.membership(phi, worldIdx);
}

struct RealizationCell {
    size_t world;
    Formula formula;
    bool inSet;
    bool forced;
};

struct RealizationReport {
    bool ok = true;
    std::vector<RealizationCell> matrix;
    std::vector<size_t> mismatches;  // indices into matrix
};

// Full agreement matrix between set membership of the realized codes and
// forcing in the model, over every formula of the closure and every world.
inline RealizationReport verifyRealization(const RealizationBundle& b,
                                           const ClosureSet& c,
                                           Reading reading =
                                               Reading::Existential) {
    detail::RealizationChecker checker(b, reading);
    std::vector<Formula> all(c.formulas().begin(), c.formulas().end());
    ForcingTable table(b.model, conjunctAll(all));
    RealizationReport report;
    for (size_t i = 0; i < b.model.worlds.size(); ++i)
        for (const Formula& f : c.formulas()) {
            bool inSet = checker.membership(f, i);
            bool forced = table.forces(b.model.worlds[i], f);
            if (inSet != forced) {
                report.ok = false;
                report.mismatches.push_back(report.matrix.size());
            }
            report.matrix.push_back({i, f, inSet, forced});
        }
    return report;
}

}  // namespace rhd
