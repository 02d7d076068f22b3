#pragma once
// Translation of validated PEC domains into numerically encoded MDPs:
// mixed-radix state indexing, action-taking situation codec, initial
// distribution, transition tensor and non-stationary policy tensor.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pecmdp/domain.hpp"

namespace pecmdp {

struct CompileOptions {
    /// Hard cap on the number of encoded states.
    std::size_t max_states = std::size_t{1} << 24;
    /// Hard cap on the number of action-taking situations.
    std::size_t max_situations = std::size_t{1} << 12;
    /// Dense transition storage is used while n_states * n_situations *
    /// n_states stays at or below this; larger tensors switch to sparse rows
    /// with implicit self-loops.
    std::size_t max_dense_transition_entries = std::size_t{1} << 22;
    /// Cap on policy tensor entries (horizon * n_states * n_situations).
    std::size_t max_policy_entries = std::size_t{1} << 24;
    /// Run validate() first and throw ValidationError on any violation.
    bool validate_input = true;
};

/// Bijective codec between total fluent states and {0, ..., n_states-1}.
/// A state maps to the vector of per-fluent value indices (declaration
/// order); vectors are ranked lexicographically with fluent 0 most
/// significant, i.e. the index is the mixed-radix value of the vector.
class StateCodec {
public:
    /// (fluent index, value index) pairs sorted by fluent index.
    using Condition = std::vector<std::pair<std::size_t, std::int32_t>>;

    StateCodec() = default;

    static StateCodec build(const Domain& d, std::size_t max_states = CompileOptions{}.max_states) {
        StateCodec c;
        for (const auto& f : d.fluents) {
            c.fluent_names_.push_back(f.name);
            c.fluent_index_[f.name] = c.values_.size();
            c.values_.push_back(f.values);
            std::map<std::string, std::int32_t> vi;
            for (std::size_t i = 0; i < f.values.size(); ++i)
                vi[f.values[i]] = static_cast<std::int32_t>(i);
            c.value_index_.push_back(std::move(vi));
            c.radices_.push_back(f.values.size());
        }
        c.n_states_ = 1;
        for (const std::size_t r : c.radices_) {
            if (r == 0) throw Error("fluent with no values cannot be encoded");
            if (c.n_states_ > max_states / r)
                throw CapacityError("state space exceeds cap of " + std::to_string(max_states) +
                                    " states");
            c.n_states_ *= r;
        }
        c.strides_.assign(c.radices_.size(), 1);
        for (std::size_t i = c.radices_.size(); i-- > 1;)
            c.strides_[i - 1] = c.strides_[i] * c.radices_[i];
        return c;
    }

    std::size_t n_fluents() const { return radices_.size(); }
    std::size_t n_states() const { return n_states_; }
    std::size_t radix(std::size_t fluent) const { return radices_[fluent]; }
    const std::string& fluent_name(std::size_t fluent) const { return fluent_names_[fluent]; }
    const std::string& value_name(std::size_t fluent, std::int32_t value) const {
        return values_[fluent][static_cast<std::size_t>(value)];
    }
    std::optional<std::size_t> fluent_index(const std::string& name) const {
        auto it = fluent_index_.find(name);
        if (it == fluent_index_.end()) return std::nullopt;
        return it->second;
    }
    std::optional<std::int32_t> value_index(std::size_t fluent, const std::string& value) const {
        auto it = value_index_[fluent].find(value);
        if (it == value_index_[fluent].end()) return std::nullopt;
        return it->second;
    }

    std::size_t encode(std::span<const std::int32_t> x) const {
        std::size_t s = 0;
        for (std::size_t i = 0; i < x.size(); ++i)
            s += static_cast<std::size_t>(x[i]) * strides_[i];
        return s;
    }

    void decode_into(std::size_t s, std::span<std::int32_t> out) const {
        for (std::size_t i = 0; i < radices_.size(); ++i)
            out[i] = static_cast<std::int32_t>((s / strides_[i]) % radices_[i]);
    }
    std::vector<std::int32_t> decode(std::size_t s) const {
        std::vector<std::int32_t> x(radices_.size());
        decode_into(s, x);
        return x;
    }

    /// Value index of `fluent` within encoded state `s`, without decoding.
    std::int32_t value_at(std::size_t s, std::size_t fluent) const {
        return static_cast<std::int32_t>((s / strides_[fluent]) % radices_[fluent]);
    }

    std::size_t encode_state(const FluentState& state) const {
        if (state.size() != n_fluents())
            throw Error("fluent state " + render_state(state) + " is not total over the domain");
        std::vector<std::int32_t> x(n_fluents());
        for (std::size_t i = 0; i < n_fluents(); ++i) {
            const std::string* v = state.value(fluent_names_[i]);
            if (v == nullptr) throw Error("fluent state misses fluent '" + fluent_names_[i] + "'");
            const auto vi = value_index(i, *v);
            if (!vi)
                throw Error("value '" + *v + "' is not a value of fluent '" + fluent_names_[i] + "'");
            x[i] = *vi;
        }
        return encode(x);
    }

    FluentState decode_state(std::size_t s) const {
        FluentState out;
        for (std::size_t i = 0; i < n_fluents(); ++i)
            out.set(fluent_names_[i], values_[i][static_cast<std::size_t>(value_at(s, i))]);
        return out;
    }

    Condition condition(const PartialFluentState& p) const {
        Condition cond;
        for (const auto& [f, v] : p.assignments()) {
            const auto fi = fluent_index(f);
            if (!fi) throw Error("unknown fluent '" + f + "' in " + render_partial(p));
            const auto vi = value_index(*fi, v);
            if (!vi) throw Error("value '" + v + "' is not a value of fluent '" + f + "'");
            cond.emplace_back(*fi, *vi);
        }
        std::sort(cond.begin(), cond.end());
        return cond;
    }

    bool entails_index(std::size_t s, const Condition& cond) const {
        for (const auto& [f, v] : cond)
            if (value_at(s, f) != v) return false;
        return true;
    }

    /// Calls `fn(s)` for every encoded state matching the condition, in
    /// ascending index order.
    template <typename F>
    void for_each_matching(const Condition& cond, F&& fn) const {
        std::size_t base = 0;
        std::vector<std::size_t> free_fluents;
        std::size_t ci = 0;
        for (std::size_t i = 0; i < n_fluents(); ++i) {
            if (ci < cond.size() && cond[ci].first == i) {
                base += static_cast<std::size_t>(cond[ci].second) * strides_[i];
                ++ci;
            } else {
                free_fluents.push_back(i);
            }
        }
        std::vector<std::size_t> digits(free_fluents.size(), 0);
        while (true) {
            std::size_t s = base;
            for (std::size_t i = 0; i < free_fluents.size(); ++i)
                s += digits[i] * strides_[free_fluents[i]];
            fn(s);
            std::size_t i = free_fluents.size();
            while (i-- > 0) {
                if (++digits[i] < radices_[free_fluents[i]]) break;
                digits[i] = 0;
                if (i == 0) return;
            }
            if (free_fluents.empty()) return;
        }
    }

private:
    std::vector<std::string> fluent_names_;
    std::map<std::string, std::size_t> fluent_index_;
    std::vector<std::vector<std::string>> values_;
    std::vector<std::map<std::string, std::int32_t>> value_index_;
    std::vector<std::size_t> radices_;
    std::vector<std::size_t> strides_;
    std::size_t n_states_ = 1;
};

/// Codec for action-taking situations: sets of simultaneously performed
/// actions. Index 0 is always the null situation (empty set). The situation
/// set is the union over instants of the powerset of actions performable at
/// that instant, plus the action component of every c-proposition so the
/// transition tensor is total over referenced situations.
class ActionSituationCodec {
public:
    ActionSituationCodec() = default;

    static ActionSituationCodec build(const Domain& d,
                                      std::size_t max_situations = CompileOptions{}.max_situations) {
        ActionSituationCodec c;
        c.action_names_ = d.actions;
        for (std::size_t i = 0; i < d.actions.size(); ++i) c.action_index_[d.actions[i]] = i;

        c.insert({}, max_situations);  // null situation at index 0

        for (const auto& label : d.instants) {
            std::set<std::size_t> performable;
            for (const auto& p : d.pprops) {
                if (p.instant != label) continue;
                const auto it = c.action_index_.find(p.action);
                if (it == c.action_index_.end())
                    throw Error("unknown action '" + p.action + "' in p-proposition");
                performable.insert(it->second);
            }
            std::vector<std::size_t> base(performable.begin(), performable.end());
            if (base.size() >= 8 * sizeof(std::size_t) - 1 ||
                (std::size_t{1} << base.size()) > max_situations)
                throw CapacityError("powerset of actions performable at instant '" + label +
                                    "' exceeds situation cap");
            for (std::size_t mask = 0; mask < (std::size_t{1} << base.size()); ++mask) {
                std::vector<std::size_t> subset;
                for (std::size_t b = 0; b < base.size(); ++b)
                    if (mask & (std::size_t{1} << b)) subset.push_back(base[b]);
                c.insert(subset, max_situations);
            }
        }
        for (const auto& cp : d.cprops) {
            std::vector<std::size_t> situation;
            for (const auto& name : cp.body_actions) {
                const auto it = c.action_index_.find(name);
                if (it == c.action_index_.end())
                    throw Error("unknown action '" + name + "' in c-proposition body");
                situation.push_back(it->second);
            }
            std::sort(situation.begin(), situation.end());
            c.insert(situation, max_situations);
        }
        return c;
    }

    std::size_t n_situations() const { return situations_.size(); }
    std::size_t n_actions() const { return action_names_.size(); }
    const std::string& action_name(std::size_t k) const { return action_names_[k]; }
    std::optional<std::size_t> action_index(const std::string& name) const {
        auto it = action_index_.find(name);
        if (it == action_index_.end()) return std::nullopt;
        return it->second;
    }

    /// Sorted action indices of situation `a`.
    const std::vector<std::size_t>& situation(std::size_t a) const { return situations_[a]; }

    std::vector<std::string> situation_names(std::size_t a) const {
        std::vector<std::string> out;
        for (const std::size_t k : situations_[a]) out.push_back(action_names_[k]);
        return out;
    }

    bool contains(std::size_t a, std::size_t action) const {
        const auto& s = situations_[a];
        return std::binary_search(s.begin(), s.end(), action);
    }

    std::optional<std::size_t> index_of(std::vector<std::size_t> sorted_actions) const {
        auto it = index_.find(sorted_actions);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::size_t> index_of_names(const std::set<std::string>& names) const {
        std::vector<std::size_t> idx;
        for (const auto& n : names) {
            const auto k = action_index(n);
            if (!k) return std::nullopt;
            idx.push_back(*k);
        }
        std::sort(idx.begin(), idx.end());
        return index_of(std::move(idx));
    }

private:
    void insert(std::vector<std::size_t> situation, std::size_t max_situations) {
        if (index_.count(situation) != 0) return;
        if (situations_.size() >= max_situations)
            throw CapacityError("situation count exceeds cap of " + std::to_string(max_situations));
        index_[situation] = situations_.size();
        situations_.push_back(std::move(situation));
    }

    std::vector<std::string> action_names_;
    std::map<std::string, std::size_t> action_index_;
    std::vector<std::vector<std::size_t>> situations_;
    std::map<std::vector<std::size_t>, std::size_t> index_;
};

/// Row-stochastic transition tensor T[s][a][s']. Dense storage for small
/// tensors; sparse per-(s, a) outcome rows otherwise, with rows absent from
/// the sparse map denoting the implicit self-loop (persistence) row.
class TransitionModel {
public:
    using SparseRow = std::vector<std::pair<std::uint32_t, double>>;

    TransitionModel() = default;

    static TransitionModel make(std::size_t n_states, std::size_t n_situations,
                                std::size_t max_dense_entries) {
        TransitionModel t;
        t.n_states_ = n_states;
        t.n_situations_ = n_situations;
        std::size_t entries = n_states;
        bool overflow = false;
        for (const std::size_t f : {n_situations, n_states}) {
            if (f != 0 && entries > max_dense_entries / f + 1) overflow = true;
            entries *= f;
        }
        t.dense_ = !overflow && entries <= max_dense_entries;
        if (t.dense_) {
            t.data_.assign(entries, 0.0);
            for (std::size_t s = 0; s < n_states; ++s)
                for (std::size_t a = 0; a < n_situations; ++a)
                    t.data_[(s * n_situations + a) * n_states + s] = 1.0;
        }
        return t;
    }

    bool is_dense() const { return dense_; }
    std::size_t n_states() const { return n_states_; }
    std::size_t n_situations() const { return n_situations_; }

    void set_row(std::size_t s, std::size_t a, const SparseRow& outcomes) {
        if (dense_) {
            double* row = &data_[(s * n_situations_ + a) * n_states_];
            std::fill(row, row + n_states_, 0.0);
            for (const auto& [sp, p] : outcomes) row[sp] = p;
        } else {
            rows_[key(s, a)] = outcomes;
        }
    }

    bool has_explicit_row(std::size_t s, std::size_t a) const {
        return dense_ ? true : rows_.count(key(s, a)) != 0;
    }

    double prob(std::size_t s, std::size_t a, std::size_t sp) const {
        if (dense_) return data_[(s * n_situations_ + a) * n_states_ + sp];
        auto it = rows_.find(key(s, a));
        if (it == rows_.end()) return sp == s ? 1.0 : 0.0;
        for (const auto& [t, p] : it->second)
            if (t == sp) return p;
        return 0.0;
    }

    /// Calls fn(s', p) for the nonzero entries of row (s, a).
    template <typename F>
    void for_each_successor(std::size_t s, std::size_t a, F&& fn) const {
        if (dense_) {
            const double* row = &data_[(s * n_situations_ + a) * n_states_];
            for (std::size_t sp = 0; sp < n_states_; ++sp)
                if (row[sp] != 0.0) fn(sp, row[sp]);
            return;
        }
        auto it = rows_.find(key(s, a));
        if (it == rows_.end()) {
            fn(s, 1.0);
            return;
        }
        for (const auto& [sp, p] : it->second)
            if (p != 0.0) fn(sp, p);
    }

    double row_sum(std::size_t s, std::size_t a) const {
        detail::KahanSum sum;
        for_each_successor(s, a, [&](std::size_t, double p) { sum.add(p); });
        return sum.value();
    }

    /// Explicit sparse rows (empty in dense mode); key is s * n_situations + a.
    const std::map<std::uint64_t, SparseRow>& sparse_rows() const { return rows_; }

private:
    std::uint64_t key(std::size_t s, std::size_t a) const {
        return static_cast<std::uint64_t>(s) * n_situations_ + a;
    }

    std::size_t n_states_ = 0;
    std::size_t n_situations_ = 0;
    bool dense_ = true;
    std::vector<double> data_;
    std::map<std::uint64_t, SparseRow> rows_;
};

/// The compiled artifact: codecs, horizon, initial distribution, transition
/// tensor and non-stationary policy tensor, plus the source domain for the
/// inverse translation. Immutable after compile(); safe for concurrent reads.
struct PecMdp {
    Domain domain;
    StateCodec codec;
    ActionSituationCodec acodec;
    std::size_t horizon = 0;  // number of instants
    std::vector<double> p0;
    TransitionModel transitions;
    std::vector<double> policy;               // [t][s][a] flattened
    std::vector<std::string> instant_labels;  // step -> label
    std::map<std::string, std::size_t> instant_map;

    std::size_t n_states() const { return codec.n_states(); }
    std::size_t n_situations() const { return acodec.n_situations(); }

    double mu(std::size_t t, std::size_t s, std::size_t a) const {
        return policy[(t * n_states() + s) * n_situations() + a];
    }

    std::optional<std::size_t> instant_step(const std::string& label) const {
        auto it = instant_map.find(label);
        if (it == instant_map.end()) return std::nullopt;
        return it->second;
    }
};

/// Order-preserving renumbering of instant labels onto {0, ..., n_I - 1}.
inline std::map<std::string, std::size_t> normalize_instants(const Domain& d) {
    std::map<std::string, std::size_t> m;
    for (std::size_t t = 0; t < d.instants.size(); ++t) m[d.instants[t]] = t;
    return m;
}

inline StateCodec build_state_codec(const Domain& d,
                                    std::size_t max_states = CompileOptions{}.max_states) {
    return StateCodec::build(d, max_states);
}

inline ActionSituationCodec build_action_situations(
    const Domain& d, std::size_t max_situations = CompileOptions{}.max_situations) {
    return ActionSituationCodec::build(d, max_situations);
}

inline std::vector<double> build_initial_distribution(const Domain& d, const StateCodec& codec) {
    std::vector<double> p0(codec.n_states(), 0.0);
    for (const auto& [state, p] : d.initially.outcomes) p0[codec.encode_state(state)] = p;
    return p0;
}

/// Applies a partial-state outcome to a state vector: positions named by the
/// outcome take its value indices, all others are preserved.
inline std::vector<std::int32_t> apply_outcome(const StateCodec& codec,
                                               const PartialFluentState& outcome,
                                               std::span<const std::int32_t> x) {
    std::vector<std::int32_t> out(x.begin(), x.end());
    for (const auto& [f, v] : codec.condition(outcome))
        out[f] = v;
    return out;
}

inline TransitionModel build_transition_tensor(const Domain& d, const StateCodec& codec,
                                               const ActionSituationCodec& acodec,
                                               const CompileOptions& opt = {}) {
    TransitionModel model = TransitionModel::make(codec.n_states(), acodec.n_situations(),
                                                  opt.max_dense_transition_entries);
    std::set<std::uint64_t> written;

    for (const auto& c : d.cprops) {
        const auto a = acodec.index_of_names(c.body_actions);
        if (!a) throw Error("c-proposition situation missing from codec");
        const StateCodec::Condition cond = codec.condition(c.body_conditions);

        // Outcomes as (fluent, value) update lists.
        std::vector<std::pair<StateCodec::Condition, double>> updates;
        for (const auto& [x, p] : c.outcomes) updates.emplace_back(codec.condition(x), p);

        std::vector<std::int32_t> x(codec.n_fluents());
        std::vector<std::int32_t> xp(codec.n_fluents());
        codec.for_each_matching(cond, [&](std::size_t s) {
            const std::uint64_t k = static_cast<std::uint64_t>(s) * acodec.n_situations() + *a;
            if (!written.insert(k).second)
                throw Error("c-propositions overlap at state " + render_state(codec.decode_state(s)) +
                            " and situation '" + render_cprop_body(c) + "'");
            codec.decode_into(s, x);
            TransitionModel::SparseRow row;
            for (const auto& [upd, p] : updates) {
                xp.assign(x.begin(), x.end());
                for (const auto& [f, v] : upd) xp[f] = v;
                row.emplace_back(static_cast<std::uint32_t>(codec.encode(xp)), p);
            }
            // Aggregate outcomes landing on the same successor.
            std::sort(row.begin(), row.end(),
                      [](const auto& lhs, const auto& rhs) { return lhs.first < rhs.first; });
            TransitionModel::SparseRow merged;
            std::size_t i = 0;
            while (i < row.size()) {
                detail::KahanSum sum;
                const std::uint32_t sp = row[i].first;
                while (i < row.size() && row[i].first == sp) sum.add(row[i++].second);
                merged.emplace_back(sp, sum.value());
            }
            model.set_row(s, *a, merged);
        });
    }
    return model;
}

/// Per-state action-occurrence probabilities at one instant: entry [s][k] is
/// the probability that declared action k is performed at that instant in
/// state s (0 when no p-proposition applies).
inline std::vector<double> action_probability_matrix(const Domain& d, const StateCodec& codec,
                                                     const std::string& instant_label) {
    const std::size_t n_actions = d.actions.size();
    std::vector<double> m(codec.n_states() * n_actions, 0.0);
    for (const auto& p : d.pprops) {
        if (p.instant != instant_label) continue;
        std::size_t k = 0;
        while (k < n_actions && d.actions[k] != p.action) ++k;
        if (k == n_actions) throw Error("unknown action '" + p.action + "' in p-proposition");
        const StateCodec::Condition cond = codec.condition(p.condition);
        codec.for_each_matching(cond,
                                [&](std::size_t s) { m[s * n_actions + k] = p.probability; });
    }
    return m;
}

/// Policy tensor mu[t][s][a]: the probability of each action-taking situation
/// under independent per-action occurrence probabilities. A situation's
/// probability is the product of p for its members and (1 - p) for every
/// other declared action; the empty product makes the null situation certain
/// where nothing is performable.
inline std::vector<double> build_policy_tensor(const Domain& d, const StateCodec& codec,
                                               const ActionSituationCodec& acodec,
                                               const CompileOptions& opt = {}) {
    const std::size_t n_states = codec.n_states();
    const std::size_t n_sit = acodec.n_situations();
    const std::size_t n_actions = d.actions.size();
    const std::size_t horizon = d.instants.size();

    std::size_t entries = horizon;
    for (const std::size_t f : {n_states, n_sit}) {
        if (f != 0 && entries > opt.max_policy_entries / f + 1)
            throw CapacityError("policy tensor exceeds entry cap");
        entries *= f;
    }
    if (entries > opt.max_policy_entries) throw CapacityError("policy tensor exceeds entry cap");

    std::vector<double> mu(entries, 0.0);
    for (std::size_t t = 0; t < horizon; ++t) {
        const std::vector<double> p = action_probability_matrix(d, codec, d.instants[t]);
        for (std::size_t s = 0; s < n_states; ++s) {
            for (std::size_t a = 0; a < n_sit; ++a) {
                const auto& members = acodec.situation(a);
                double prod = 1.0;
                std::size_t mi = 0;
                for (std::size_t k = 0; k < n_actions; ++k) {
                    const double pk = p[s * n_actions + k];
                    if (mi < members.size() && members[mi] == k) {
                        prod *= pk;
                        ++mi;
                    } else {
                        prod *= 1.0 - pk;
                    }
                }
                mu[(t * n_states + s) * n_sit + a] = prod;
            }
        }
    }
    return mu;
}

/// Full translation pipeline. Throws ValidationError when the domain is not
/// well-formed and CapacityError when a configured cap is exceeded.
inline PecMdp compile(const Domain& d, const CompileOptions& opt = {}) {
    if (opt.validate_input) {
        ValidationReport report = validate(d);
        if (!report.ok()) throw ValidationError(std::move(report));
    }
    PecMdp m;
    m.domain = d;
    m.horizon = d.instants.size();
    m.instant_labels = d.instants;
    m.instant_map = normalize_instants(d);
    m.codec = build_state_codec(d, opt.max_states);
    m.acodec = build_action_situations(d, opt.max_situations);
    m.p0 = build_initial_distribution(d, m.codec);
    m.transitions = build_transition_tensor(d, m.codec, m.acodec, opt);
    m.policy = build_policy_tensor(d, m.codec, m.acodec, opt);
    return m;
}

}  // namespace pecmdp
