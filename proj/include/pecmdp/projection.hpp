#pragma once
// Temporal projection over compiled PEC-MDPs: policy-weighted transition
// matrices, distribution propagation, and basic/conditional queries.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pecmdp/compiler.hpp"
#include "pecmdp/domain.hpp"

namespace pecmdp {

/// Minimum mass of a conditioning event before conditioning is treated as
/// division by zero.
inline constexpr double kMinConditionProbability = 1e-12;

struct StateDistribution {
    std::vector<double> probs;
    std::size_t time = 0;
};

/// "What is the probability of `target` at `target_instant` (given
/// `condition` at the earlier `condition_instant`)?"
struct Query {
    PartialFluentState target;
    std::string target_instant;
    std::optional<PartialFluentState> condition;
    std::optional<std::string> condition_instant;
};

struct ProjectOptions {
    /// Accept integer instants past the declared horizon by appending
    /// identity steps (default persistence). Off by default: the policy is
    /// undefined beyond the declared timeline.
    bool extrapolate_persistence = false;
};

/// Policy-weighted one-step matrix at time t: row-stochastic n_states x
/// n_states, entry (s, s') = sum_a mu(a, s, t) * T(s, a, s').
inline std::vector<double> policy_weighted_matrix(const PecMdp& mdp, std::size_t t) {
    if (t >= mdp.horizon) throw QueryError("time step " + std::to_string(t) + " out of range");
    const std::size_t n = mdp.n_states();
    std::vector<double> m(n * n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t a = 0; a < mdp.n_situations(); ++a) {
            const double w = mdp.mu(t, s, a);
            if (w == 0.0) continue;
            mdp.transitions.for_each_successor(
                s, a, [&](std::size_t sp, double p) { m[s * n + sp] += w * p; });
        }
    }
    return m;
}

namespace detail {

// One propagation step p -> p M_t without materializing M_t.
inline void propagate_step(const PecMdp& mdp, std::size_t t, const std::vector<double>& in,
                           std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t s = 0; s < in.size(); ++s) {
        const double ps = in[s];
        if (ps == 0.0) continue;
        for (std::size_t a = 0; a < mdp.n_situations(); ++a) {
            const double w = mdp.mu(t, s, a);
            if (w == 0.0) continue;
            const double wa = ps * w;
            mdp.transitions.for_each_successor(s, a,
                                               [&](std::size_t sp, double p) { out[sp] += wa * p; });
        }
    }
}

}  // namespace detail

/// Propagates a state distribution forward to `to_time` by successive
/// policy-weighted steps. With extrapolation enabled, steps at or past the
/// final instant are identity (persistence).
inline StateDistribution propagate(const PecMdp& mdp, StateDistribution p, std::size_t to_time,
                                   const ProjectOptions& opt = {}) {
    if (p.probs.size() != mdp.n_states())
        throw QueryError("distribution size does not match the state space");
    if (to_time < p.time) throw QueryError("cannot propagate backwards in time");
    if (to_time >= mdp.horizon && !opt.extrapolate_persistence)
        throw QueryError("time step " + std::to_string(to_time) + " is beyond the declared horizon");

    std::vector<double> next(p.probs.size());
    for (std::size_t t = p.time; t < to_time; ++t) {
        if (t + 1 >= mdp.horizon) break;  // extrapolated steps are identity
        detail::propagate_step(mdp, t, p.probs, next);
        p.probs.swap(next);
    }
    p.time = to_time;
    return p;
}

/// Indicator vector over encoded states: f[s] = 1 iff state s entails the
/// partial fluent state.
inline std::vector<double> filter_vector(const StateCodec& codec, const PartialFluentState& x) {
    const StateCodec::Condition cond = codec.condition(x);
    std::vector<double> f(codec.n_states(), 0.0);
    codec.for_each_matching(cond, [&](std::size_t s) { f[s] = 1.0; });
    return f;
}

namespace detail {

inline std::size_t resolve_instant(const PecMdp& mdp, const std::string& label,
                                   const ProjectOptions& opt) {
    const auto t = mdp.instant_step(label);
    if (t) return *t;
    if (opt.extrapolate_persistence && !mdp.instant_labels.empty()) {
        // Integer labels past the declared end extend the timeline with
        // identity steps.
        std::int64_t query_v = 0, last_v = 0;
        const auto parse = [](const std::string& s, std::int64_t& v) {
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            return res.ec == std::errc{} && res.ptr == s.data() + s.size();
        };
        if (parse(label, query_v) && parse(mdp.instant_labels.back(), last_v) && query_v > last_v)
            return mdp.horizon - 1 + static_cast<std::size_t>(query_v - last_v);
    }
    throw QueryError("unknown instant '" + label + "'");
}

inline double masked_mass(const std::vector<double>& p, const std::vector<double>& f) {
    KahanSum sum;
    for (std::size_t s = 0; s < p.size(); ++s)
        if (f[s] != 0.0) sum.add(p[s]);
    return sum.value();
}

}  // namespace detail

/// Projection query against the compiled MDP. Unconditional queries propagate
/// p0 to the query time and sum the filtered mass; conditional queries mask
/// and renormalize at the (not later) condition time first. Throws
/// ZeroConditionProbability when the conditioning event has no mass, and
/// QueryError for unknown instants or a condition after the query time.
inline double project(const PecMdp& mdp, const Query& q, const ProjectOptions& opt = {}) {
    const std::size_t t_q = detail::resolve_instant(mdp, q.target_instant, opt);
    const std::vector<double> f_q = filter_vector(mdp.codec, q.target);

    StateDistribution dist{mdp.p0, 0};
    if (q.condition.has_value()) {
        if (!q.condition_instant.has_value())
            throw QueryError("conditional query is missing the condition instant");
        const std::size_t t_c = detail::resolve_instant(mdp, *q.condition_instant, opt);
        if (t_c > t_q)
            throw QueryError("condition instant '" + *q.condition_instant +
                             "' is after query instant '" + q.target_instant + "'");
        const std::vector<double> f_c = filter_vector(mdp.codec, *q.condition);
        dist = propagate(mdp, std::move(dist), t_c, opt);
        const double mass = detail::masked_mass(dist.probs, f_c);
        if (mass < kMinConditionProbability)
            throw ZeroConditionProbability("condition " + render_partial(*q.condition) +
                                           " at instant '" + *q.condition_instant +
                                           "' has zero probability");
        for (std::size_t s = 0; s < dist.probs.size(); ++s)
            dist.probs[s] = f_c[s] != 0.0 ? dist.probs[s] / mass : 0.0;
    }
    dist = propagate(mdp, std::move(dist), t_q, opt);
    return detail::masked_mass(dist.probs, f_q);
}

}  // namespace pecmdp
