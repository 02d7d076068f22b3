#pragma once
// Core model for Probabilistic Event Calculus (PEC) domain descriptions:
// fluent declarations, the four proposition kinds, entailment, and
// well-formedness validation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pecmdp {

/// Absolute tolerance for probability sums (i-proposition outcomes,
/// c-proposition outcomes, transition/policy rows).
inline constexpr double kProbSumTolerance = 1e-9;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A state or situation space exceeded a configured cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Conditioning event has numerically zero probability.
class ZeroConditionProbability : public Error {
public:
    using Error::Error;
};

/// A deterministic policy was required but a stochastic one was supplied.
class RequiresDeterministic : public Error {
public:
    using Error::Error;
};

/// Malformed or out-of-range temporal query.
class QueryError : public Error {
public:
    using Error::Error;
};

namespace detail {

// Compensated (Kahan) accumulation; probability sums go through this so the
// 1e-9 tolerance is not eaten by naive summation order.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

/// A consistent set of fluent=value assignments. The empty set matches every
/// fluent state.
class PartialFluentState {
public:
    using Map = std::map<std::string, std::string>;

    PartialFluentState() = default;
    PartialFluentState(std::initializer_list<std::pair<std::string, std::string>> init) {
        for (const auto& [f, v] : init) assignments_[f] = v;
    }

    void set(const std::string& fluent, const std::string& value) { assignments_[fluent] = value; }
    bool has(const std::string& fluent) const { return assignments_.count(fluent) != 0; }
    const std::string* value(const std::string& fluent) const {
        auto it = assignments_.find(fluent);
        return it == assignments_.end() ? nullptr : &it->second;
    }

    bool empty() const { return assignments_.empty(); }
    std::size_t size() const { return assignments_.size(); }
    const Map& assignments() const { return assignments_; }

    /// True when no fluent is assigned different values by the two sets.
    bool compatible_with(const PartialFluentState& other) const {
        const auto& a = assignments_.size() <= other.assignments_.size() ? assignments_ : other.assignments_;
        const auto& b = assignments_.size() <= other.assignments_.size() ? other.assignments_ : assignments_;
        for (const auto& [f, v] : a) {
            auto it = b.find(f);
            if (it != b.end() && it->second != v) return false;
        }
        return true;
    }

    friend bool operator==(const PartialFluentState&, const PartialFluentState&) = default;

private:
    Map assignments_;
};

/// A total assignment of values to the domain's fluents.
class FluentState {
public:
    using Map = std::map<std::string, std::string>;

    FluentState() = default;
    FluentState(std::initializer_list<std::pair<std::string, std::string>> init) {
        for (const auto& [f, v] : init) assignments_[f] = v;
    }

    void set(const std::string& fluent, const std::string& value) { assignments_[fluent] = value; }
    const std::string* value(const std::string& fluent) const {
        auto it = assignments_.find(fluent);
        return it == assignments_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return assignments_.size(); }
    const Map& assignments() const { return assignments_; }

    PartialFluentState as_partial() const {
        PartialFluentState p;
        for (const auto& [f, v] : assignments_) p.set(f, v);
        return p;
    }

    friend bool operator==(const FluentState&, const FluentState&) = default;

private:
    Map assignments_;
};

/// `F takes-values {V1, ..., Vm}`. Declaration order of values is canonical
/// and defines the numeric value indices used downstream.
struct FluentDecl {
    std::string name;
    std::vector<std::string> values;

    friend bool operator==(const FluentDecl&, const FluentDecl&) = default;
};

/// `initially-one-of {(S1, P1), ...}`.
struct IProposition {
    std::vector<std::pair<FluentState, double>> outcomes;

    friend bool operator==(const IProposition&, const IProposition&) = default;
};

/// `body causes-one-of {(X1, P1), ...}` with the body split into its action
/// component (all asserted true) and its fluent preconditions.
struct CProposition {
    std::set<std::string> body_actions;
    PartialFluentState body_conditions;
    std::vector<std::pair<PartialFluentState, double>> outcomes;

    friend bool operator==(const CProposition&, const CProposition&) = default;
};

/// `A performed-at I with-prob P [if-holds X]`.
struct PProposition {
    std::string action;
    std::string instant;
    double probability = 1.0;
    PartialFluentState condition;

    friend bool operator==(const PProposition&, const PProposition&) = default;
};

/// A parsed PEC domain. Declaration order of fluents, values, actions and
/// instants is significant: it fixes the canonical numeric encodings.
struct Domain {
    std::vector<FluentDecl> fluents;
    std::vector<std::string> actions;
    std::vector<std::string> instants;
    IProposition initially;
    std::vector<CProposition> cprops;
    std::vector<PProposition> pprops;

    const FluentDecl* find_fluent(const std::string& name) const {
        for (const auto& f : fluents)
            if (f.name == name) return &f;
        return nullptr;
    }
    bool has_action(const std::string& name) const {
        return std::find(actions.begin(), actions.end(), name) != actions.end();
    }
    std::optional<std::size_t> instant_index(const std::string& label) const {
        for (std::size_t i = 0; i < instants.size(); ++i)
            if (instants[i] == label) return i;
        return std::nullopt;
    }

    friend bool operator==(const Domain&, const Domain&) = default;
};

// ---------------------------------------------------------------------------
// Rendering helpers (shared by diagnostics and the pretty-printer)

inline std::string render_assignment_map(const std::map<std::string, std::string>& m) {
    std::string out = "{";
    bool first = true;
    for (const auto& [f, v] : m) {
        if (!first) out += ", ";
        first = false;
        out += f + "=" + v;
    }
    return out + "}";
}

inline std::string render_partial(const PartialFluentState& p) {
    return render_assignment_map(p.assignments());
}

inline std::string render_state(const FluentState& s) {
    return render_assignment_map(s.assignments());
}

inline std::string render_cprop_body(const CProposition& c) {
    std::string out;
    bool first = true;
    for (const auto& a : c.body_actions) {
        if (!first) out += " & ";
        first = false;
        out += a;
    }
    for (const auto& [f, v] : c.body_conditions.assignments()) {
        if (!first) out += " & ";
        first = false;
        out += f + "=" + v;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Entailment

/// True iff every assignment in `cond` appears in `state`. Throws when the
/// condition names a fluent the state does not assign.
inline bool entails(const FluentState& state, const PartialFluentState& cond) {
    for (const auto& [f, v] : cond.assignments()) {
        const std::string* sv = state.value(f);
        if (sv == nullptr) throw Error("unknown fluent '" + f + "' in condition " + render_partial(cond));
        if (*sv != v) return false;
    }
    return true;
}

/// Domain-checked variant: also rejects values outside vals(F).
inline bool entails(const Domain& domain, const FluentState& state, const PartialFluentState& cond) {
    for (const auto& [f, v] : cond.assignments()) {
        const FluentDecl* decl = domain.find_fluent(f);
        if (decl == nullptr) throw Error("unknown fluent '" + f + "' in condition " + render_partial(cond));
        if (std::find(decl->values.begin(), decl->values.end(), v) == decl->values.end())
            throw Error("value '" + v + "' is not a value of fluent '" + f + "'");
    }
    return entails(state, cond);
}

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
    Structural,
    DanglingName,
    ProbabilitySum,
    ProbabilityRange,
    CPropOverlap,
    PPropAmbiguity,
};

inline const char* to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::Structural: return "structural";
        case ViolationKind::DanglingName: return "dangling-name";
        case ViolationKind::ProbabilitySum: return "probability-sum";
        case ViolationKind::ProbabilityRange: return "probability-range";
        case ViolationKind::CPropOverlap: return "c-prop-overlap";
        case ViolationKind::PPropAmbiguity: return "p-prop-ambiguity";
    }
    return "unknown";
}

struct Violation {
    ViolationKind kind;
    std::string message;

    friend bool operator==(const Violation&, const Violation&) = default;
    friend bool operator<(const Violation& a, const Violation& b) {
        if (a.kind != b.kind) return a.kind < b.kind;
        return a.message < b.message;
    }
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }

    std::string to_string() const {
        std::string out;
        for (const auto& v : violations) {
            out += std::string(pecmdp::to_string(v.kind)) + ": " + v.message + "\n";
        }
        return out;
    }
};

class ValidationError : public Error {
public:
    explicit ValidationError(ValidationReport report)
        : Error("domain failed validation:\n" + report.to_string()), report_(std::move(report)) {}
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

namespace detail {

inline bool value_declared(const FluentDecl& decl, const std::string& value) {
    return std::find(decl.values.begin(), decl.values.end(), value) != decl.values.end();
}

// Checks assignment names against declarations; `where` identifies the
// proposition in the message.
inline void check_assignments(const Domain& d, const std::map<std::string, std::string>& m,
                              const std::string& where, std::vector<Violation>& out) {
    for (const auto& [f, v] : m) {
        const FluentDecl* decl = d.find_fluent(f);
        if (decl == nullptr) {
            out.push_back({ViolationKind::DanglingName, "unknown fluent '" + f + "' in " + where});
        } else if (!value_declared(*decl, v)) {
            out.push_back({ViolationKind::DanglingName,
                           "value '" + v + "' is not a value of fluent '" + f + "' in " + where});
        }
    }
}

}  // namespace detail

/// Well-formedness check. Violations are report entries, never exceptions:
/// the report is empty exactly when the domain is safe to compile.
/// Deterministic and order-independent: permuting cprops/pprops yields the
/// same violation set.
inline ValidationReport validate(const Domain& d) {
    std::vector<Violation> out;

    // Structure of the declarations themselves.
    if (d.fluents.empty())
        out.push_back({ViolationKind::Structural, "domain declares no fluents"});
    if (d.instants.empty())
        out.push_back({ViolationKind::Structural, "domain declares no instants"});

    std::set<std::string> seen;
    for (const auto& f : d.fluents) {
        if (!seen.insert(f.name).second)
            out.push_back({ViolationKind::Structural, "duplicate fluent '" + f.name + "'"});
        if (f.values.size() < 2)
            out.push_back({ViolationKind::Structural,
                           "fluent '" + f.name + "' declares fewer than two values"});
        std::set<std::string> vals;
        for (const auto& v : f.values)
            if (!vals.insert(v).second)
                out.push_back({ViolationKind::Structural,
                               "fluent '" + f.name + "' repeats value '" + v + "'"});
    }
    seen.clear();
    for (const auto& a : d.actions)
        if (!seen.insert(a).second)
            out.push_back({ViolationKind::Structural, "duplicate action '" + a + "'"});
    seen.clear();
    for (const auto& i : d.instants)
        if (!seen.insert(i).second)
            out.push_back({ViolationKind::Structural, "duplicate instant '" + i + "'"});

    // i-proposition: total distinct states, probabilities forming a distribution.
    {
        detail::KahanSum sum;
        std::set<FluentState::Map> states;
        for (const auto& [state, p] : d.initially.outcomes) {
            const std::string where = "i-proposition outcome " + render_state(state);
            detail::check_assignments(d, state.assignments(), where, out);
            if (state.size() != d.fluents.size() ||
                std::any_of(d.fluents.begin(), d.fluents.end(),
                            [&](const FluentDecl& f) { return state.value(f.name) == nullptr; })) {
                out.push_back({ViolationKind::Structural,
                               where + " does not assign every declared fluent"});
            }
            if (!states.insert(state.assignments()).second)
                out.push_back({ViolationKind::Structural,
                               "i-proposition lists duplicate outcome state " + render_state(state)});
            if (p < 0.0 || p > 1.0)
                out.push_back({ViolationKind::ProbabilityRange,
                               "probability " + detail::format_double(p) + " outside [0, 1] in " + where});
            sum.add(p);
        }
        if (std::abs(sum.value() - 1.0) > kProbSumTolerance)
            out.push_back({ViolationKind::ProbabilitySum,
                           "i-proposition probabilities sum to " + detail::format_double(sum.value())});
    }

    // c-propositions.
    for (const auto& c : d.cprops) {
        const std::string body = render_cprop_body(c);
        if (c.body_actions.empty())
            out.push_back({ViolationKind::Structural,
                           "c-proposition '" + body + "' names no actions in its body"});
        for (const auto& a : c.body_actions)
            if (!d.has_action(a))
                out.push_back({ViolationKind::DanglingName,
                               "unknown action '" + a + "' in c-proposition '" + body + "'"});
        detail::check_assignments(d, c.body_conditions.assignments(),
                                  "c-proposition '" + body + "' condition", out);
        detail::KahanSum sum;
        for (const auto& [x, p] : c.outcomes) {
            detail::check_assignments(d, x.assignments(),
                                      "c-proposition '" + body + "' outcome " + render_partial(x), out);
            if (p < 0.0 || p > 1.0)
                out.push_back({ViolationKind::ProbabilityRange,
                               "probability " + detail::format_double(p) + " outside [0, 1] in c-proposition '" +
                                   body + "'"});
            sum.add(p);
        }
        if (std::abs(sum.value() - 1.0) > kProbSumTolerance)
            out.push_back({ViolationKind::ProbabilitySum,
                           "c-proposition '" + body + "' outcome probabilities sum to " +
                               detail::format_double(sum.value())});
    }

    // Two c-propositions may never be jointly applicable: identical action
    // components with compatible fluent conditions means some (state, situation)
    // pair satisfies both bodies.
    for (std::size_t i = 0; i < d.cprops.size(); ++i) {
        for (std::size_t j = i + 1; j < d.cprops.size(); ++j) {
            const CProposition& a = d.cprops[i];
            const CProposition& b = d.cprops[j];
            if (a.body_actions == b.body_actions &&
                a.body_conditions.compatible_with(b.body_conditions)) {
                std::string ba = render_cprop_body(a);
                std::string bb = render_cprop_body(b);
                if (bb < ba) std::swap(ba, bb);
                out.push_back({ViolationKind::CPropOverlap,
                               "c-propositions '" + ba + "' and '" + bb + "' can fire together"});
            }
        }
    }

    // p-propositions.
    for (const auto& p : d.pprops) {
        const std::string where =
            "p-proposition '" + p.action + " performed-at " + p.instant + "'";
        if (!d.has_action(p.action))
            out.push_back({ViolationKind::DanglingName, "unknown action '" + p.action + "' in " + where});
        if (!d.instant_index(p.instant))
            out.push_back({ViolationKind::DanglingName, "unknown instant '" + p.instant + "' in " + where});
        detail::check_assignments(d, p.condition.assignments(), where + " condition", out);
        if (!(p.probability > 0.0) || p.probability > 1.0)
            out.push_back({ViolationKind::ProbabilityRange,
                           where + " probability " + detail::format_double(p.probability) +
                               " outside (0, 1]"});
    }

    // Two p-propositions for the same action and instant must not assign
    // different probabilities to any state: jointly satisfiable conditions are
    // ambiguous unless the probabilities coincide.
    for (std::size_t i = 0; i < d.pprops.size(); ++i) {
        for (std::size_t j = i + 1; j < d.pprops.size(); ++j) {
            const PProposition& a = d.pprops[i];
            const PProposition& b = d.pprops[j];
            if (a.action == b.action && a.instant == b.instant &&
                a.condition.compatible_with(b.condition) && a.probability != b.probability) {
                std::string ca = render_partial(a.condition);
                std::string cb = render_partial(b.condition);
                if (cb < ca) std::swap(ca, cb);
                out.push_back({ViolationKind::PPropAmbiguity,
                               "p-propositions for action '" + a.action + "' at instant '" + a.instant +
                                   "' have jointly satisfiable conditions " + ca + " and " + cb +
                                   " with different probabilities"});
            }
        }
    }

    // Canonical order, duplicates collapsed, so permuting propositions yields
    // the same report.
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return ValidationReport{std::move(out)};
}

}  // namespace pecmdp
