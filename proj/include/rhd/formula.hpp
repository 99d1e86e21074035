#pragma once

// Formulas of the modal language: propositional variables, the constant
// false, implication, and the binary modality |> ("maps into").  Negation,
// conjunction, disjunction and true are surface sugar; the tree stores only
// the four primitive shapes.  Fixed expansions:
//
//   ~a      ==  a -> false
//   true    ==  false -> false
//   a & b   ==  (a -> (b -> false)) -> false
//   a | b   ==  (a -> false) -> b
//
// Concrete grammar (tightest first): ~  &  |  |>  ->
//   '->' is right-associative, '|>' is non-associative (nested modalities
//   need parentheses), '&' and '|' are right-associative.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rhd {

struct ParseError : std::runtime_error {
    size_t position;
    ParseError(const std::string& what, size_t pos)
        : std::runtime_error(what + " (at offset " + std::to_string(pos) + ")"),
          position(pos) {}
};

class Formula {
public:
    enum class Kind { Bottom, Var, Implies, Rhd };

private:
    struct Node {
        Kind kind;
        std::string name;                    // Var only
        std::shared_ptr<const Node> lhs, rhs;
        size_t hash = 0;
        size_t size = 1;                     // node count
    };
    std::shared_ptr<const Node> n_;

    explicit Formula(std::shared_ptr<const Node> n) : n_(std::move(n)) {}

    static size_t combine(size_t seed, size_t v) {
        return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    }

    static Formula make(Kind k, std::string name,
                        const Formula* l, const Formula* r) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->name = std::move(name);
        size_t h = static_cast<size_t>(k) * 0x100000001b3ULL;
        if (k == Kind::Var) h = combine(h, std::hash<std::string>{}(n->name));
        if (l) {
            n->lhs = l->n_;
            h = combine(h, l->n_->hash);
            n->size += l->n_->size;
        }
        if (r) {
            n->rhs = r->n_;
            h = combine(h, r->n_->hash);
            n->size += r->n_->size;
        }
        n->hash = h;
        return Formula(std::move(n));
    }

public:
    static Formula bottom() { return make(Kind::Bottom, "", nullptr, nullptr); }
    static Formula var(const std::string& name) {
        if (name.empty()) throw std::invalid_argument("empty variable name");
        return make(Kind::Var, name, nullptr, nullptr);
    }
    static Formula implies(const Formula& a, const Formula& b) {
        return make(Kind::Implies, "", &a, &b);
    }
    static Formula rhd(const Formula& a, const Formula& b) {
        return make(Kind::Rhd, "", &a, &b);
    }

    // sugar, expanded eagerly
    static Formula negation(const Formula& a) { return implies(a, bottom()); }
    static Formula top() { return implies(bottom(), bottom()); }
    static Formula conj(const Formula& a, const Formula& b) {
        return negation(implies(a, negation(b)));
    }
    static Formula disj(const Formula& a, const Formula& b) {
        return implies(negation(a), b);
    }

    Kind kind() const { return n_->kind; }
    const std::string& varName() const { return n_->name; }
    Formula lhs() const { return Formula(n_->lhs); }
    Formula rhs() const { return Formula(n_->rhs); }
    size_t size() const { return n_->size; }
    size_t hash() const { return n_->hash; }

    bool isNegation() const {
        return n_->kind == Kind::Implies && n_->rhs->kind == Kind::Bottom;
    }

    friend bool operator==(const Formula& a, const Formula& b) {
        return compare(a, b) == 0;
    }
    friend bool operator!=(const Formula& a, const Formula& b) {
        return !(a == b);
    }
    friend bool operator<(const Formula& a, const Formula& b) {
        return compare(a, b) < 0;
    }

    // total structural order: Bottom < Var < Implies < Rhd, then operands
    static int compare(const Formula& a, const Formula& b) {
        if (a.n_ == b.n_) return 0;
        if (a.n_->kind != b.n_->kind)
            return a.n_->kind < b.n_->kind ? -1 : 1;
        switch (a.n_->kind) {
            case Kind::Bottom: return 0;
            case Kind::Var: return a.n_->name.compare(b.n_->name);
            default: {
                int c = compare(a.lhs(), b.lhs());
                if (c != 0) return c;
                return compare(a.rhs(), b.rhs());
            }
        }
    }

    std::string str() const;
    static Formula parse(const std::string& text);
};

struct FormulaHash {
    size_t operator()(const Formula& f) const { return f.hash(); }
};

namespace detail {

// ----- printer: minimal parentheses, deterministic re-sugaring ------------

enum class View { True, Bottom, Var, Not, And, Or, Rhd, Implies };

// pattern priority: True, And, Not, Or; plain shapes otherwise
inline View viewOf(const Formula& f) {
    using K = Formula::Kind;
    switch (f.kind()) {
        case K::Bottom: return View::Bottom;
        case K::Var: return View::Var;
        case K::Rhd: return View::Rhd;
        case K::Implies: {
            const bool rhsBot = f.rhs().kind() == K::Bottom;
            if (rhsBot && f.lhs().kind() == K::Bottom) return View::True;
            if (rhsBot && f.lhs().kind() == K::Implies &&
                f.lhs().rhs().isNegation())
                return View::And;
            if (rhsBot) return View::Not;
            if (f.lhs().isNegation()) return View::Or;
            return View::Implies;
        }
    }
    return View::Implies;  // unreachable
}

inline int viewLevel(View v) {
    switch (v) {
        case View::Implies: return 1;
        case View::Rhd: return 2;
        case View::Or: return 3;
        case View::And: return 4;
        case View::Not: return 5;
        default: return 6;
    }
}

inline void printFormula(const Formula& f, int minLevel, std::string& out) {
    const View v = viewOf(f);
    const int lvl = viewLevel(v);
    const bool paren = lvl < minLevel;
    if (paren) out += '(';
    switch (v) {
        case View::True: out += "true"; break;
        case View::Bottom: out += "false"; break;
        case View::Var: out += f.varName(); break;
        case View::Not:
            out += '~';
            printFormula(f.lhs(), 5, out);
            break;
        case View::And:
            printFormula(f.lhs().lhs(), 5, out);
            out += " & ";
            printFormula(f.lhs().rhs().lhs(), 4, out);
            break;
        case View::Or:
            printFormula(f.lhs().lhs(), 4, out);
            out += " | ";
            printFormula(f.rhs(), 3, out);
            break;
        case View::Rhd:
            printFormula(f.lhs(), 3, out);
            out += " |> ";
            printFormula(f.rhs(), 3, out);
            break;
        case View::Implies:
            printFormula(f.lhs(), 2, out);
            out += " -> ";
            printFormula(f.rhs(), 1, out);
            break;
    }
    if (paren) out += ')';
}

// ----- tokenizer / recursive-descent parser --------------------------------

struct Token {
    enum class Type { False, True, Ident, Arrow, RhdOp, AndOp, OrOp, NotOp,
                      LParen, RParen, End };
    Type type;
    std::string text;
    size_t pos;
};

inline bool identStart(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool identChar(char c) {
    return identStart(c) || (c >= '0' && c <= '9') || c == '\'';
}

inline std::vector<Token> tokenize(const std::string& s) {
    std::vector<Token> out;
    size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') { ++i; continue; }
        size_t start = i;
        if (identStart(c)) {
            size_t j = i;
            while (j < s.size() && identChar(s[j])) ++j;
            std::string word = s.substr(i, j - i);
            i = j;
            if (word == "false") out.push_back({Token::Type::False, word, start});
            else if (word == "true") out.push_back({Token::Type::True, word, start});
            else out.push_back({Token::Type::Ident, word, start});
            continue;
        }
        if (c == '-' && i + 1 < s.size() && s[i + 1] == '>') {
            out.push_back({Token::Type::Arrow, "->", start}); i += 2; continue;
        }
        if (c == '|' && i + 1 < s.size() && s[i + 1] == '>') {
            out.push_back({Token::Type::RhdOp, "|>", start}); i += 2; continue;
        }
        switch (c) {
            case '&': out.push_back({Token::Type::AndOp, "&", start}); ++i; continue;
            case '|': out.push_back({Token::Type::OrOp, "|", start}); ++i; continue;
            case '~': out.push_back({Token::Type::NotOp, "~", start}); ++i; continue;
            case '(': out.push_back({Token::Type::LParen, "(", start}); ++i; continue;
            case ')': out.push_back({Token::Type::RParen, ")", start}); ++i; continue;
            default:
                throw ParseError(std::string("unknown token '") + c + "'", start);
        }
    }
    out.push_back({Token::Type::End, "", s.size()});
    return out;
}

class Parser {
    std::vector<Token> toks_;
    size_t i_ = 0;

    const Token& peek() const { return toks_[i_]; }
    Token next() { return toks_[i_++]; }

public:
    explicit Parser(const std::string& text) : toks_(tokenize(text)) {}

    Formula parseAll() {
        Formula f = parseImplies();
        if (peek().type != Token::Type::End)
            throw ParseError("unexpected trailing input '" + peek().text + "'",
                             peek().pos);
        return f;
    }

    Formula parseImplies() {
        Formula left = parseRhd();
        if (peek().type == Token::Type::Arrow) {
            next();
            return Formula::implies(left, parseImplies());  // right-assoc
        }
        return left;
    }

    Formula parseRhd() {
        Formula left = parseOr();
        if (peek().type == Token::Type::RhdOp) {
            next();
            Formula right = parseOr();
            if (peek().type == Token::Type::RhdOp)
                throw ParseError("'|>' is non-associative; parenthesize",
                                 peek().pos);
            return Formula::rhd(left, right);
        }
        return left;
    }

    Formula parseOr() {
        Formula left = parseAnd();
        if (peek().type == Token::Type::OrOp) {
            next();
            return Formula::disj(left, parseOr());
        }
        return left;
    }

    Formula parseAnd() {
        Formula left = parseNot();
        if (peek().type == Token::Type::AndOp) {
            next();
            return Formula::conj(left, parseAnd());
        }
        return left;
    }

    Formula parseNot() {
        if (peek().type == Token::Type::NotOp) {
            next();
            return Formula::negation(parseNot());
        }
        return parsePrimary();
    }

    Formula parsePrimary() {
        Token t = next();
        switch (t.type) {
            case Token::Type::False: return Formula::bottom();
            case Token::Type::True: return Formula::top();
            case Token::Type::Ident: return Formula::var(t.text);
            case Token::Type::LParen: {
                Formula f = parseImplies();
                if (peek().type != Token::Type::RParen)
                    throw ParseError("expected ')'", peek().pos);
                next();
                return f;
            }
            case Token::Type::RParen:
                throw ParseError("unbalanced ')'", t.pos);
            case Token::Type::End:
                throw ParseError("unexpected end of input", t.pos);
            default:
                throw ParseError("unexpected token '" + t.text + "'", t.pos);
        }
    }
};

}  // namespace detail

inline std::string Formula::str() const {
    std::string out;
    detail::printFormula(*this, 1, out);
    return out;
}

inline Formula Formula::parse(const std::string& text) {
    return detail::Parser(text).parseAll();
}

inline std::ostream& operator<<(std::ostream& os, const Formula& f) {
    return os << f.str();
}

// sim-negation: strips one outer negation instead of stacking a new one
inline Formula simNeg(const Formula& phi) {
    if (phi.isNegation()) return phi.lhs();
    return Formula::negation(phi);
}

inline void collectSubformulas(const Formula& f, std::set<Formula>& out) {
    if (!out.insert(f).second) return;
    if (f.kind() == Formula::Kind::Implies || f.kind() == Formula::Kind::Rhd) {
        collectSubformulas(f.lhs(), out);
        collectSubformulas(f.rhs(), out);
    }
}

inline std::set<Formula> subformulas(const Formula& phi) {
    std::set<Formula> out;
    collectSubformulas(phi, out);
    return out;
}

// The least set containing the seed that is closed under subformulas and
// sim-negation, in the structural total order with position lookup.
class ClosureSet {
    std::vector<Formula> formulas_;
    std::unordered_map<Formula, size_t, FormulaHash> index_;
    Formula seed_;

public:
    explicit ClosureSet(const Formula& seed) : seed_(seed) {
        std::set<Formula> acc;
        std::vector<Formula> work{seed};
        while (!work.empty()) {
            Formula f = work.back();
            work.pop_back();
            if (acc.count(f)) continue;
            std::set<Formula> subs;
            collectSubformulas(f, subs);
            for (const Formula& s : subs) {
                if (acc.insert(s).second) work.push_back(simNeg(s));
                Formula n = simNeg(s);
                if (!acc.count(n)) work.push_back(n);
            }
        }
        formulas_.assign(acc.begin(), acc.end());
        for (size_t i = 0; i < formulas_.size(); ++i) index_[formulas_[i]] = i;
    }

    const std::vector<Formula>& formulas() const { return formulas_; }
    const Formula& seed() const { return seed_; }
    size_t size() const { return formulas_.size(); }
    bool contains(const Formula& f) const { return index_.count(f) != 0; }
    std::optional<size_t> indexOf(const Formula& f) const {
        auto it = index_.find(f);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    const Formula& at(size_t i) const { return formulas_.at(i); }
};

inline ClosureSet closure(const Formula& phi0) { return ClosureSet(phi0); }

// Maximal subformulas that are variables or |>-formulas, in first-occurrence
// order.  These are the atoms of the propositional abstraction.
inline std::vector<Formula> modalAtoms(const Formula& phi) {
    std::vector<Formula> out;
    std::set<Formula> seen;
    std::function<void(const Formula&)> walk = [&](const Formula& f) {
        switch (f.kind()) {
            case Formula::Kind::Bottom:
                return;
            case Formula::Kind::Var:
            case Formula::Kind::Rhd:
                if (seen.insert(f).second) out.push_back(f);
                return;
            case Formula::Kind::Implies:
                walk(f.lhs());
                walk(f.rhs());
                return;
        }
    };
    walk(phi);
    return out;
}

namespace detail {
inline bool evalAbstracted(const Formula& f,
                           const std::map<Formula, bool>& atomValue) {
    switch (f.kind()) {
        case Formula::Kind::Bottom: return false;
        case Formula::Kind::Var:
        case Formula::Kind::Rhd: return atomValue.at(f);
        case Formula::Kind::Implies:
            return !evalAbstracted(f.lhs(), atomValue) ||
                   evalAbstracted(f.rhs(), atomValue);
    }
    return false;
}
}  // namespace detail

// True iff phi holds under every boolean assignment to its modal atoms.
inline bool isPropTautology(const Formula& phi) {
    std::vector<Formula> atoms = modalAtoms(phi);
    if (atoms.size() > 24)
        throw std::invalid_argument("too many modal atoms for a truth table");
    const uint64_t total = uint64_t{1} << atoms.size();
    std::map<Formula, bool> val;
    for (uint64_t mask = 0; mask < total; ++mask) {
        for (size_t i = 0; i < atoms.size(); ++i)
            val[atoms[i]] = (mask >> i) & 1;
        if (!detail::evalAbstracted(phi, val)) return false;
    }
    return true;
}

// Conjunction of a finite set, folded right over the structural order.
// The empty conjunction is true.
inline Formula conjunctAll(std::vector<Formula> fs) {
    if (fs.empty()) return Formula::top();
    std::sort(fs.begin(), fs.end());
    Formula acc = fs.back();
    for (size_t i = fs.size() - 1; i-- > 0;)
        acc = Formula::conj(fs[i], acc);
    return acc;
}

inline std::vector<std::string> collectVars(const Formula& f) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::function<void(const Formula&)> walk = [&](const Formula& g) {
        switch (g.kind()) {
            case Formula::Kind::Var:
                if (seen.insert(g.varName()).second) out.push_back(g.varName());
                return;
            case Formula::Kind::Implies:
            case Formula::Kind::Rhd:
                walk(g.lhs());
                walk(g.rhs());
                return;
            default:
                return;
        }
    };
    walk(f);
    return out;
}

}  // namespace rhd
