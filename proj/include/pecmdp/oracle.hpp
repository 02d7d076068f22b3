#pragma once
// Reference semantics by exhaustive enumeration of possible worlds: every
// branch of (initial outcome) x (per-instant action occurrences) x (effect
// outcomes) with its product weight. Ground truth for projection on small
// domains. Matching of c-propositions is exact on the performed action set,
// the same rule the compiler implements, so this checks the matrix algebra
// rather than the matching convention.

#include <cstdint>
#include <string>
#include <vector>

#include "pecmdp/compiler.hpp"
#include "pecmdp/domain.hpp"
#include "pecmdp/projection.hpp"

namespace pecmdp {

/// One complete evolution of the domain: a state per instant, the actions
/// performed at each instant, and the branch weight. Action occurrences at
/// the final instant can influence no state and are not expanded; the last
/// performed set is always empty.
struct World {
    std::vector<std::uint32_t> states;
    std::vector<std::vector<std::size_t>> performed;
    double weight = 0.0;
};

struct OracleOptions {
    std::size_t max_worlds = 1'000'000;
};

namespace detail {

struct OracleContext {
    const Domain& domain;
    StateCodec codec;

    struct CompiledCProp {
        std::vector<std::size_t> actions;  // sorted indices into domain.actions
        StateCodec::Condition condition;
        std::vector<std::pair<StateCodec::Condition, double>> outcomes;
    };
    std::vector<CompiledCProp> cprops;

    struct CompiledPProp {
        std::size_t action;
        StateCodec::Condition condition;
        double probability;
    };
    std::vector<std::vector<CompiledPProp>> pprops_by_step;

    explicit OracleContext(const Domain& d) : domain(d), codec(StateCodec::build(d)) {
        for (const auto& c : d.cprops) {
            CompiledCProp cc;
            for (const auto& name : c.body_actions) {
                std::size_t k = 0;
                while (k < d.actions.size() && d.actions[k] != name) ++k;
                if (k == d.actions.size()) throw Error("unknown action '" + name + "'");
                cc.actions.push_back(k);
            }
            std::sort(cc.actions.begin(), cc.actions.end());
            cc.condition = codec.condition(c.body_conditions);
            for (const auto& [x, p] : c.outcomes) cc.outcomes.emplace_back(codec.condition(x), p);
            cprops.push_back(std::move(cc));
        }
        pprops_by_step.resize(d.instants.size());
        for (const auto& p : d.pprops) {
            const auto t = d.instant_index(p.instant);
            if (!t) throw Error("unknown instant '" + p.instant + "'");
            std::size_t k = 0;
            while (k < d.actions.size() && d.actions[k] != p.action) ++k;
            if (k == d.actions.size()) throw Error("unknown action '" + p.action + "'");
            pprops_by_step[*t].push_back({k, codec.condition(p.condition), p.probability});
        }
    }

    double action_probability(std::size_t t, std::size_t s, std::size_t action) const {
        for (const auto& p : pprops_by_step[t])
            if (p.action == action && codec.entails_index(s, p.condition)) return p.probability;
        return 0.0;
    }

    const CompiledCProp* matching_cprop(std::size_t s, const std::vector<std::size_t>& performed) const {
        for (const auto& c : cprops)
            if (c.actions == performed && codec.entails_index(s, c.condition)) return &c;
        return nullptr;
    }
};

class WorldEnumerator {
public:
    WorldEnumerator(const OracleContext& ctx, const OracleOptions& opt) : ctx_(ctx), opt_(opt) {
        const std::size_t horizon = ctx.domain.instants.size();
        states_.resize(horizon);
        performed_.resize(horizon);
    }

    std::vector<World> run() {
        for (const auto& [state, p] : ctx_.domain.initially.outcomes) {
            if (p == 0.0) continue;
            visit_state(0, ctx_.codec.encode_state(state), p);
        }
        return std::move(worlds_);
    }

private:
    void visit_state(std::size_t t, std::size_t s, double weight) {
        states_[t] = static_cast<std::uint32_t>(s);
        if (t + 1 == states_.size()) {
            emit(weight);
            return;
        }
        branch_actions(t, s, 0, weight);
    }

    // Independent occurrence branching over declared actions at instant t.
    void branch_actions(std::size_t t, std::size_t s, std::size_t k, double weight) {
        if (k == ctx_.domain.actions.size()) {
            resolve_effects(t, s, weight);
            return;
        }
        const double p = ctx_.action_probability(t, s, k);
        if (p > 0.0) {
            performed_[t].push_back(k);
            branch_actions(t, s, k + 1, weight * p);
            performed_[t].pop_back();
        }
        if (p < 1.0) branch_actions(t, s, k + 1, weight * (1.0 - p));
    }

    void resolve_effects(std::size_t t, std::size_t s, double weight) {
        const auto* c = ctx_.matching_cprop(s, performed_[t]);
        if (c == nullptr) {
            visit_state(t + 1, s, weight);  // persistence
            return;
        }
        std::vector<std::int32_t> x(ctx_.codec.n_fluents());
        std::vector<std::int32_t> xp(ctx_.codec.n_fluents());
        ctx_.codec.decode_into(s, x);
        for (const auto& [upd, p] : c->outcomes) {
            if (p == 0.0) continue;
            xp.assign(x.begin(), x.end());
            for (const auto& [f, v] : upd) xp[f] = v;
            visit_state(t + 1, ctx_.codec.encode(xp), weight * p);
        }
    }

    void emit(double weight) {
        if (worlds_.size() >= opt_.max_worlds)
            throw CapacityError("world count exceeds cap of " + std::to_string(opt_.max_worlds));
        worlds_.push_back(World{states_, performed_, weight});
    }

    const OracleContext& ctx_;
    const OracleOptions& opt_;
    std::vector<std::uint32_t> states_;
    std::vector<std::vector<std::size_t>> performed_;
    std::vector<World> worlds_;
};

}  // namespace detail

/// Enumerates every possible world of the domain. Throws CapacityError when
/// the branch count exceeds the configured cap.
inline std::vector<World> enumerate_worlds(const Domain& d, const OracleOptions& opt = {}) {
    detail::OracleContext ctx(d);
    return detail::WorldEnumerator(ctx, opt).run();
}

/// Projection by summing world weights: the probability of the target at its
/// instant is the total weight of worlds whose state there entails it;
/// conditional queries are ratios of such sums.
inline double oracle_project(const Domain& d, const Query& q, const OracleOptions& opt = {}) {
    detail::OracleContext ctx(d);
    const std::vector<World> worlds = detail::WorldEnumerator(ctx, opt).run();

    const auto t_q = d.instant_index(q.target_instant);
    if (!t_q) throw QueryError("unknown instant '" + q.target_instant + "'");
    const std::vector<double> f_q = filter_vector(ctx.codec, q.target);

    if (!q.condition.has_value()) {
        detail::KahanSum sum;
        for (const auto& w : worlds)
            if (f_q[w.states[*t_q]] != 0.0) sum.add(w.weight);
        return sum.value();
    }

    if (!q.condition_instant.has_value())
        throw QueryError("conditional query is missing the condition instant");
    const auto t_c = d.instant_index(*q.condition_instant);
    if (!t_c) throw QueryError("unknown instant '" + *q.condition_instant + "'");
    if (*t_c > *t_q)
        throw QueryError("condition instant '" + *q.condition_instant + "' is after query instant '" +
                         q.target_instant + "'");
    const std::vector<double> f_c = filter_vector(ctx.codec, *q.condition);

    detail::KahanSum joint, cond;
    for (const auto& w : worlds) {
        if (f_c[w.states[*t_c]] == 0.0) continue;
        cond.add(w.weight);
        if (f_q[w.states[*t_q]] != 0.0) joint.add(w.weight);
    }
    if (cond.value() < kMinConditionProbability)
        throw ZeroConditionProbability("condition " + render_partial(*q.condition) + " at instant '" +
                                       *q.condition_instant + "' has zero probability");
    return joint.value() / cond.value();
}

}  // namespace pecmdp
