#pragma once
// Text format for PEC domains (.pec files): lexer, recursive-descent parser
// and pretty-printer. Parsing is total: every input yields either a Domain or
// a ParseError with a source span, never an exception.
//
// Statement forms, one per line ('#' starts a comment, newlines inside
// braces/parens are insignificant):
//
//   fluent <id> takes-values { <id> (, <id>)* }
//   action <id>
//   instants <int> .. <int>
//   instants { <label> (, <label>)* }
//   initially-one-of { ({<assignments>}, <prob>) (, ...)* }
//   <body> causes-one-of { ({<assignments>}, <prob>) (, ...)* }
//   <action> performed-at <instant> with-prob <prob> [if-holds {<assignments>}]
//
// where <body> is `<term> (& <term>)*`, each term `<fluent>=<value>` or a bare
// <action> name, and <prob> is a decimal literal (exponent allowed) or a
// fraction `a/b`.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pecmdp/domain.hpp"

namespace pecmdp {

struct SourceSpan {
    std::size_t line = 1;
    std::size_t column = 1;
    std::size_t length = 1;

    friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

struct ParseError {
    SourceSpan span;
    std::string message;
    std::vector<std::string> expected;

    std::string to_string() const {
        std::string out = std::to_string(span.line) + ":" + std::to_string(span.column) +
                          ": error: " + message;
        if (!expected.empty()) {
            out += " (expected ";
            for (std::size_t i = 0; i < expected.size(); ++i) {
                if (i > 0) out += expected.size() == 2 ? " or " : ", ";
                out += expected[i];
            }
            out += ")";
        }
        return out;
    }
};

struct ParseResult {
    std::optional<Domain> domain;
    std::optional<ParseError> error;

    bool ok() const { return domain.has_value(); }
};

namespace detail {

enum class TokKind {
    Ident,
    Int,
    Float,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Equals,
    Amp,
    DotDot,
    Slash,
    Newline,
    End,
    Bad,
};

struct Token {
    TokKind kind = TokKind::End;
    std::string text;
    std::size_t line = 1;
    std::size_t column = 1;

    SourceSpan span() const { return {line, column, text.empty() ? 1 : text.size()}; }
};

inline bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_'; }
inline bool ident_cont(unsigned char c) { return std::isalnum(c) || c == '_' || c == '-'; }

// Tokenizes the whole input. Newline tokens are emitted only at bracket
// depth 0 so multi-line outcome lists parse naturally.
inline std::vector<Token> lex(std::string_view src) {
    std::vector<Token> toks;
    std::size_t line = 1, col = 1, i = 0;
    int depth = 0;
    const std::size_t n = src.size();

    auto push = [&](TokKind k, std::size_t start, std::size_t len) {
        toks.push_back({k, std::string(src.substr(start, len)), line, col});
        col += len;
        i = start + len;
    };

    while (i < n) {
        const unsigned char c = src[i];
        if (c == '\n') {
            if (depth == 0 && !toks.empty() && toks.back().kind != TokKind::Newline)
                toks.push_back({TokKind::Newline, "\n", line, col});
            ++line;
            col = 1;
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f') {
            ++col;
            ++i;
            continue;
        }
        if (c == '#') {
            while (i < n && src[i] != '\n') {
                ++i;
                ++col;
            }
            continue;
        }
        if (ident_start(c)) {
            std::size_t j = i + 1;
            while (j < n && ident_cont(src[j])) ++j;
            push(TokKind::Ident, i, j - i);
            continue;
        }
        if (std::isdigit(c)) {
            std::size_t j = i + 1;
            while (j < n && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            bool is_float = false;
            if (j < n && src[j] == '.' && !(j + 1 < n && src[j + 1] == '.')) {
                is_float = true;
                ++j;
                while (j < n && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            if (j < n && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < n && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < n && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    ++k;
                    while (k < n && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
                    j = k;
                    is_float = true;
                }
            }
            push(is_float ? TokKind::Float : TokKind::Int, i, j - i);
            continue;
        }
        switch (c) {
            case '{': ++depth; push(TokKind::LBrace, i, 1); continue;
            case '}': if (depth > 0) --depth; push(TokKind::RBrace, i, 1); continue;
            case '(': ++depth; push(TokKind::LParen, i, 1); continue;
            case ')': if (depth > 0) --depth; push(TokKind::RParen, i, 1); continue;
            case ',': push(TokKind::Comma, i, 1); continue;
            case '=': push(TokKind::Equals, i, 1); continue;
            case '&': push(TokKind::Amp, i, 1); continue;
            case '/': push(TokKind::Slash, i, 1); continue;
            case '.':
                if (i + 1 < n && src[i + 1] == '.') {
                    push(TokKind::DotDot, i, 2);
                    continue;
                }
                if (i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1]))) {
                    std::size_t j = i + 2;
                    while (j < n && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
                    push(TokKind::Float, i, j - i);
                    continue;
                }
                push(TokKind::Bad, i, 1);
                continue;
            default:
                push(TokKind::Bad, i, 1);
                continue;
        }
    }
    toks.push_back({TokKind::End, "", line, col});
    return toks;
}

inline const char* describe(TokKind k) {
    switch (k) {
        case TokKind::Ident: return "identifier";
        case TokKind::Int: return "integer";
        case TokKind::Float: return "number";
        case TokKind::LBrace: return "'{'";
        case TokKind::RBrace: return "'}'";
        case TokKind::LParen: return "'('";
        case TokKind::RParen: return "')'";
        case TokKind::Comma: return "','";
        case TokKind::Equals: return "'='";
        case TokKind::Amp: return "'&'";
        case TokKind::DotDot: return "'..'";
        case TokKind::Slash: return "'/'";
        case TokKind::Newline: return "end of line";
        case TokKind::End: return "end of input";
        case TokKind::Bad: return "character";
    }
    return "token";
}

inline bool is_keyword(std::string_view s) {
    return s == "fluent" || s == "action" || s == "instants" || s == "takes-values" ||
           s == "initially-one-of" || s == "causes-one-of" || s == "performed-at" ||
           s == "with-prob" || s == "if-holds";
}

// Internal control flow only; parse_domain converts it into a ParseError.
struct ParseFailure {
    ParseError error;
};

class Parser {
public:
    explicit Parser(std::string_view src) : toks_(lex(src)) {}

    Domain parse() {
        Domain d;
        bool saw_statement = false;
        bool saw_instants = false;
        bool saw_initially = false;

        skip_newlines();
        while (peek().kind != TokKind::End) {
            parse_statement(d, saw_instants, saw_initially);
            saw_statement = true;
            if (peek().kind == TokKind::Newline)
                skip_newlines();
            else if (peek().kind != TokKind::End)
                fail(peek(), "unexpected " + token_name(peek()), {"end of line"});
        }
        if (!saw_statement) fail(peek(), "expected declaration", {"declaration"});
        if (!saw_initially)
            fail(peek(), "missing initially-one-of declaration", {"initially-one-of"});
        return d;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;

    const Token& peek(std::size_t ahead = 0) const {
        const std::size_t i = pos_ + ahead;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    const Token& advance() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    void skip_newlines() {
        while (peek().kind == TokKind::Newline) advance();
    }

    static std::string token_name(const Token& t) {
        if (t.kind == TokKind::End) return "end of input";
        if (t.kind == TokKind::Newline) return "end of line";
        return std::string("'") + t.text + "'";
    }

    [[noreturn]] void fail(const Token& at, std::string message,
                           std::vector<std::string> expected = {}) const {
        throw ParseFailure{ParseError{at.span(), std::move(message), std::move(expected)}};
    }

    const Token& expect(TokKind k, const char* what = nullptr) {
        if (peek().kind != k)
            fail(peek(), "unexpected " + token_name(peek()), {what ? what : describe(k)});
        return advance();
    }

    // A user-supplied name; keywords are reserved in every name position.
    std::string parse_name(const char* what) {
        if (peek().kind != TokKind::Ident) fail(peek(), "unexpected " + token_name(peek()), {what});
        if (is_keyword(peek().text))
            fail(peek(), "reserved keyword '" + peek().text + "' used as " + what, {what});
        return advance().text;
    }

    std::int64_t parse_int(const Token& t) const {
        std::int64_t v = 0;
        const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (res.ec != std::errc{} || res.ptr != t.text.data() + t.text.size())
            fail(t, "integer literal '" + t.text + "' out of range");
        return v;
    }

    double parse_prob() {
        const Token& t = peek();
        if (t.kind == TokKind::Float) {
            advance();
            double v = 0.0;
            const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
            if (res.ec != std::errc{} || res.ptr != t.text.data() + t.text.size())
                fail(t, "malformed number '" + t.text + "'");
            return v;
        }
        if (t.kind == TokKind::Int) {
            advance();
            const std::int64_t num = parse_int(t);
            if (peek().kind == TokKind::Slash) {
                advance();
                const Token& dt = expect(TokKind::Int, "denominator");
                const std::int64_t den = parse_int(dt);
                if (den == 0) fail(dt, "fraction with zero denominator");
                return static_cast<double>(num) / static_cast<double>(den);
            }
            return static_cast<double>(num);
        }
        fail(t, "unexpected " + token_name(t), {"probability"});
    }

    // `{ F=v (, F=v)* }` or `{}`.
    template <typename StateT>
    StateT parse_assignments(const char* where) {
        StateT state;
        expect(TokKind::LBrace);
        if (peek().kind == TokKind::RBrace) {
            advance();
            return state;
        }
        while (true) {
            const Token& ft = peek();
            const std::string fluent = parse_name("fluent name");
            expect(TokKind::Equals);
            const std::string value = parse_name("value");
            if (state.value(fluent) != nullptr)
                fail(ft, "fluent '" + fluent + "' assigned twice in " + where);
            state.set(fluent, value);
            if (peek().kind == TokKind::Comma) {
                advance();
                continue;
            }
            break;
        }
        expect(TokKind::RBrace);
        return state;
    }

    // `{ ({...}, p) (, ({...}, p))* }`
    template <typename StateT>
    std::vector<std::pair<StateT, double>> parse_outcomes(const char* where) {
        std::vector<std::pair<StateT, double>> outcomes;
        expect(TokKind::LBrace);
        while (true) {
            expect(TokKind::LParen);
            StateT state = parse_assignments<StateT>(where);
            expect(TokKind::Comma);
            const double p = parse_prob();
            expect(TokKind::RParen);
            outcomes.emplace_back(std::move(state), p);
            if (peek().kind == TokKind::Comma) {
                advance();
                continue;
            }
            break;
        }
        expect(TokKind::RBrace);
        return outcomes;
    }

    void parse_statement(Domain& d, bool& saw_instants, bool& saw_initially) {
        const Token& t = peek();
        if (t.kind == TokKind::Ident && t.text == "fluent") {
            advance();
            parse_fluent_decl(d);
            return;
        }
        if (t.kind == TokKind::Ident && t.text == "action") {
            advance();
            const Token& nt = peek();
            const std::string name = parse_name("action name");
            if (d.has_action(name)) fail(nt, "duplicate action declaration '" + name + "'");
            d.actions.push_back(name);
            return;
        }
        if (t.kind == TokKind::Ident && t.text == "instants") {
            advance();
            if (saw_instants) fail(t, "duplicate instants declaration");
            saw_instants = true;
            parse_instants(d);
            return;
        }
        if (t.kind == TokKind::Ident && t.text == "initially-one-of") {
            advance();
            if (saw_initially) fail(t, "duplicate initially-one-of declaration");
            saw_initially = true;
            d.initially.outcomes = parse_outcomes<FluentState>("initial state");
            return;
        }
        if (t.kind == TokKind::Ident && !is_keyword(t.text)) {
            parse_cprop_or_pprop(d);
            return;
        }
        fail(t, "unexpected " + token_name(t), {"declaration"});
    }

    void parse_fluent_decl(Domain& d) {
        const Token& nt = peek();
        FluentDecl decl;
        decl.name = parse_name("fluent name");
        if (d.find_fluent(decl.name) != nullptr)
            fail(nt, "duplicate fluent declaration '" + decl.name + "'");
        {
            const Token& kw = peek();
            if (kw.kind != TokKind::Ident || kw.text != "takes-values")
                fail(kw, "unexpected " + token_name(kw), {"takes-values"});
            advance();
        }
        expect(TokKind::LBrace);
        while (true) {
            const Token& vt = peek();
            const std::string value = parse_name("value");
            if (std::find(decl.values.begin(), decl.values.end(), value) != decl.values.end())
                fail(vt, "duplicate value '" + value + "' for fluent '" + decl.name + "'");
            decl.values.push_back(value);
            if (peek().kind == TokKind::Comma) {
                advance();
                continue;
            }
            break;
        }
        expect(TokKind::RBrace);
        d.fluents.push_back(std::move(decl));
    }

    void parse_instants(Domain& d) {
        static constexpr std::int64_t kMaxRange = 1 << 20;
        if (peek().kind == TokKind::Int) {
            const Token& lo_tok = advance();
            const std::int64_t lo = parse_int(lo_tok);
            expect(TokKind::DotDot);
            const Token& hi_tok = expect(TokKind::Int, "range end");
            const std::int64_t hi = parse_int(hi_tok);
            if (hi < lo) fail(hi_tok, "descending instant range");
            if (hi - lo + 1 > kMaxRange) fail(hi_tok, "instant range too large");
            for (std::int64_t v = lo; v <= hi; ++v) d.instants.push_back(std::to_string(v));
            return;
        }
        if (peek().kind == TokKind::LBrace) {
            advance();
            while (true) {
                const Token& lt = peek();
                std::string label;
                if (lt.kind == TokKind::Int) {
                    label = advance().text;
                } else {
                    label = parse_name("instant label");
                }
                if (d.instant_index(label)) fail(lt, "duplicate instant '" + label + "'");
                d.instants.push_back(label);
                if (peek().kind == TokKind::Comma) {
                    advance();
                    continue;
                }
                break;
            }
            expect(TokKind::RBrace);
            return;
        }
        fail(peek(), "unexpected " + token_name(peek()), {"integer range", "'{'"});
    }

    void parse_cprop_or_pprop(Domain& d) {
        struct Term {
            Token name_tok;
            std::string name;
            std::optional<std::string> value;  // set for fluent=value terms
        };
        std::vector<Term> terms;
        while (true) {
            Term term;
            term.name_tok = peek();
            term.name = parse_name("name");
            if (peek().kind == TokKind::Equals) {
                advance();
                term.value = parse_name("value");
            }
            terms.push_back(std::move(term));
            if (peek().kind == TokKind::Amp) {
                advance();
                continue;
            }
            break;
        }

        const Token& kw = peek();
        if (kw.kind == TokKind::Ident && kw.text == "performed-at") {
            advance();
            if (terms.size() != 1 || terms[0].value.has_value())
                fail(terms[0].name_tok, "performed-at takes a single action name");
            PProposition p;
            p.action = terms[0].name;
            const Token& it = peek();
            if (it.kind == TokKind::Int) {
                p.instant = advance().text;
            } else {
                p.instant = parse_name("instant label");
            }
            {
                const Token& wt = peek();
                if (wt.kind != TokKind::Ident || wt.text != "with-prob")
                    fail(wt, "unexpected " + token_name(wt), {"with-prob"});
                advance();
            }
            p.probability = parse_prob();
            if (peek().kind == TokKind::Ident && peek().text == "if-holds") {
                advance();
                p.condition = parse_assignments<PartialFluentState>("if-holds condition");
            }
            d.pprops.push_back(std::move(p));
            return;
        }
        if (kw.kind == TokKind::Ident && kw.text == "causes-one-of") {
            advance();
            CProposition c;
            for (const auto& term : terms) {
                if (term.value) {
                    if (c.body_conditions.value(term.name) != nullptr)
                        fail(term.name_tok, "fluent '" + term.name + "' assigned twice in body");
                    c.body_conditions.set(term.name, *term.value);
                } else {
                    if (!c.body_actions.insert(term.name).second)
                        fail(term.name_tok, "duplicate action '" + term.name + "' in body");
                }
            }
            if (c.body_actions.empty())
                fail(kw, "c-proposition body must name at least one action");
            c.outcomes = parse_outcomes<PartialFluentState>("outcome");
            d.cprops.push_back(std::move(c));
            return;
        }
        fail(kw, "unexpected " + token_name(kw), {"causes-one-of", "performed-at"});
    }
};

}  // namespace detail

/// Parses a PEC domain description. Declaration orders in the returned Domain
/// match source order. Never throws: malformed input yields a ParseError.
inline ParseResult parse_domain(std::string_view source) {
    try {
        detail::Parser parser(source);
        return ParseResult{parser.parse(), std::nullopt};
    } catch (const detail::ParseFailure& f) {
        return ParseResult{std::nullopt, f.error};
    }
}

namespace detail {

// Assignments ordered by fluent declaration order; unknown fluents (possible
// in unvalidated domains) are appended in name order.
inline std::string render_assignments_ordered(const Domain& d,
                                              const std::map<std::string, std::string>& m) {
    std::string out = "{";
    bool first = true;
    auto emit = [&](const std::string& f, const std::string& v) {
        if (!first) out += ", ";
        first = false;
        out += f + "=" + v;
    };
    for (const auto& f : d.fluents) {
        auto it = m.find(f.name);
        if (it != m.end()) emit(f.name, it->second);
    }
    for (const auto& [f, v] : m) {
        if (d.find_fluent(f) == nullptr) emit(f, v);
    }
    return out + "}";
}

inline bool instants_render_as_range(const std::vector<std::string>& labels, std::int64_t& lo,
                                     std::int64_t& hi) {
    if (labels.empty()) return false;
    std::int64_t prev = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::int64_t v = 0;
        const auto& s = labels[i];
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return false;
        if (std::to_string(v) != s) return false;  // reject leading zeros
        if (i == 0)
            lo = v;
        else if (v != prev + 1)
            return false;
        prev = v;
    }
    hi = prev;
    return true;
}

}  // namespace detail

/// Pretty-prints a Domain in the .pec text format. For every valid domain,
/// parse_domain(render_domain(d)) yields a structurally equal Domain.
inline std::string render_domain(const Domain& d) {
    std::string out;
    for (const auto& f : d.fluents) {
        out += "fluent " + f.name + " takes-values {";
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            if (i > 0) out += ", ";
            out += f.values[i];
        }
        out += "}\n";
    }
    for (const auto& a : d.actions) out += "action " + a + "\n";

    if (!d.instants.empty()) {
        std::int64_t lo = 0, hi = 0;
        if (detail::instants_render_as_range(d.instants, lo, hi)) {
            out += "instants " + std::to_string(lo) + ".." + std::to_string(hi) + "\n";
        } else {
            out += "instants {";
            for (std::size_t i = 0; i < d.instants.size(); ++i) {
                if (i > 0) out += ", ";
                out += d.instants[i];
            }
            out += "}\n";
        }
    }

    out += "initially-one-of {";
    for (std::size_t i = 0; i < d.initially.outcomes.size(); ++i) {
        const auto& [state, p] = d.initially.outcomes[i];
        if (i > 0) out += ", ";
        out += "(" + detail::render_assignments_ordered(d, state.assignments()) + ", " +
               detail::format_double(p) + ")";
    }
    out += "}\n";

    for (const auto& c : d.cprops) {
        std::vector<std::string> actions(c.body_actions.begin(), c.body_actions.end());
        std::stable_sort(actions.begin(), actions.end(), [&](const auto& a, const auto& b) {
            auto idx = [&](const std::string& name) {
                const auto it = std::find(d.actions.begin(), d.actions.end(), name);
                return it == d.actions.end() ? d.actions.size() : std::size_t(it - d.actions.begin());
            };
            return idx(a) < idx(b);
        });
        std::string body;
        for (const auto& a : actions) {
            if (!body.empty()) body += " & ";
            body += a;
        }
        std::string conds = detail::render_assignments_ordered(d, c.body_conditions.assignments());
        conds = conds.substr(1, conds.size() - 2);  // strip braces; re-join with '&'
        if (!conds.empty()) {
            std::string joined;
            std::size_t start = 0;
            while (start < conds.size()) {
                std::size_t end = conds.find(", ", start);
                if (end == std::string::npos) end = conds.size();
                if (!joined.empty()) joined += " & ";
                joined += conds.substr(start, end - start);
                start = end + 2;
            }
            body += " & " + joined;
        }
        out += body + " causes-one-of {";
        for (std::size_t i = 0; i < c.outcomes.size(); ++i) {
            const auto& [x, p] = c.outcomes[i];
            if (i > 0) out += ", ";
            out += "(" + detail::render_assignments_ordered(d, x.assignments()) + ", " +
                   detail::format_double(p) + ")";
        }
        out += "}\n";
    }

    for (const auto& p : d.pprops) {
        out += p.action + " performed-at " + p.instant + " with-prob " +
               detail::format_double(p.probability);
        if (!p.condition.empty())
            out += " if-holds " + detail::render_assignments_ordered(d, p.condition.assignments());
        out += "\n";
    }
    return out;
}

/// One side of a projection query in the CLI micro-syntax
/// `F=V[, F2=V2]@instant` (a bare `@instant` denotes the empty partial state).
struct QueryAtom {
    PartialFluentState state;
    std::string instant;
};

inline QueryAtom parse_query_atom(std::string_view text) {
    const std::size_t at = text.rfind('@');
    if (at == std::string_view::npos)
        throw QueryError("query '" + std::string(text) + "' is missing '@instant'");
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    QueryAtom atom;
    atom.instant = std::string(trim(text.substr(at + 1)));
    if (atom.instant.empty())
        throw QueryError("query '" + std::string(text) + "' has an empty instant label");

    std::string_view lhs = trim(text.substr(0, at));
    while (!lhs.empty()) {
        std::size_t comma = lhs.find(',');
        std::string_view item = trim(lhs.substr(0, comma));
        if (!item.empty()) {
            const std::size_t eq = item.find('=');
            if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size())
                throw QueryError("malformed assignment '" + std::string(item) +
                                 "' in query (expected fluent=value)");
            const std::string fluent{trim(item.substr(0, eq))};
            const std::string value{trim(item.substr(eq + 1))};
            if (atom.state.has(fluent))
                throw QueryError("fluent '" + fluent + "' assigned twice in query");
            atom.state.set(fluent, value);
        }
        if (comma == std::string_view::npos) break;
        lhs = lhs.substr(comma + 1);
    }
    return atom;
}

}  // namespace pecmdp
