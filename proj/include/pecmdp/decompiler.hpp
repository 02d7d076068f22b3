#pragma once
// Inverse translation: deterministic policies back into probability-1
// p-propositions, with reachability pruning and minimal distinguishing
// fluent conditions, plus a round-trip equivalence check.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pecmdp/compiler.hpp"
#include "pecmdp/domain.hpp"
#include "pecmdp/planning.hpp"

namespace pecmdp {

/// A set of p-propositions, each with probability exactly 1.
struct PPropSet {
    std::vector<PProposition> props;

    std::size_t size() const { return props.size(); }
    bool empty() const { return props.empty(); }
};

/// Translates a deterministic policy into p-propositions: one per atomic
/// action of the chosen situation, conditioned on the full fluent state.
/// Stationary policies emit at every instant; non-stationary ones only at the
/// instants their steps cover. Null-situation choices emit nothing.
inline PPropSet policy_to_pprops(const PecMdp& mdp, const PolicyTable& policy) {
    PPropSet out;
    const std::size_t t_end = policy.kind == PolicyTable::Kind::Stationary
                                  ? mdp.horizon
                                  : std::min(policy.n_steps(), mdp.horizon);
    for (std::size_t t = 0; t < t_end; ++t) {
        for (std::size_t s = 0; s < mdp.n_states(); ++s) {
            const std::size_t a = policy.choice(t, s);
            if (a == 0) continue;
            const PartialFluentState condition = mdp.codec.decode_state(s).as_partial();
            for (const std::size_t k : mdp.acodec.situation(a)) {
                PProposition p;
                p.action = mdp.acodec.action_name(k);
                p.instant = mdp.instant_labels[t];
                p.probability = 1.0;
                p.condition = condition;
                out.props.push_back(std::move(p));
            }
        }
    }
    return out;
}

namespace detail {

// Condition of a translated (not yet minimized) p-proposition as a state
// index; requires a full assignment.
inline std::size_t condition_state_index(const StateCodec& codec, const PProposition& p) {
    FluentState state;
    for (const auto& [f, v] : p.condition.assignments()) state.set(f, v);
    return codec.encode_state(state);
}

}  // namespace detail

/// Drops p-propositions whose (state, instant) pair has probability at or
/// below `threshold` of being reached under the policy-induced chain.
/// Operates on the raw translation output (full-state conditions).
inline PPropSet reachability_prune(const PecMdp& mdp, const PolicyTable& policy,
                                   const PPropSet& pprops, double threshold = 0.0) {
    const std::vector<std::vector<double>> dists = policy_induced_distributions(mdp, policy);
    PPropSet out;
    for (const auto& p : pprops.props) {
        const auto t = mdp.instant_step(p.instant);
        if (!t) throw Error("unknown instant '" + p.instant + "' in p-proposition");
        const std::size_t s = detail::condition_state_index(mdp.codec, p);
        if (dists[*t][s] > threshold) out.props.push_back(p);
    }
    return out;
}

/// Replaces each full-state condition with a minimal partial state that no
/// competitor state matches: per instant, the competitors of state s are the
/// other condition states plus any states listed in `extra_competitors` for
/// that instant (callers use this for reachable states whose policy choice
/// differs, so the emitted propositions never fire there). Subsets are
/// searched in increasing size; ties take the lexicographically first fluent
/// combination in declaration order.
inline PPropSet minimize_conditions(
    const PecMdp& mdp, const PPropSet& pprops,
    const std::map<std::string, std::vector<std::size_t>>& extra_competitors = {}) {
    // Group condition states per instant.
    std::map<std::string, std::set<std::size_t>> states_at;
    for (const auto& p : pprops.props)
        states_at[p.instant].insert(detail::condition_state_index(mdp.codec, p));

    const std::size_t n_fluents = mdp.codec.n_fluents();
    std::map<std::pair<std::string, std::size_t>, PartialFluentState> minimized;

    for (const auto& [instant, state_set] : states_at) {
        std::vector<std::size_t> competitors_base(state_set.begin(), state_set.end());
        if (auto it = extra_competitors.find(instant); it != extra_competitors.end())
            competitors_base.insert(competitors_base.end(), it->second.begin(), it->second.end());

        for (const std::size_t s : state_set) {
            std::vector<std::size_t> competitors;
            for (const std::size_t c : competitors_base)
                if (c != s) competitors.push_back(c);

            auto distinguishes = [&](const std::vector<std::size_t>& fluents) {
                for (const std::size_t c : competitors) {
                    bool separated = false;
                    for (const std::size_t f : fluents)
                        if (mdp.codec.value_at(c, f) != mdp.codec.value_at(s, f)) {
                            separated = true;
                            break;
                        }
                    if (!separated) return false;
                }
                return true;
            };

            // Increasing-cardinality combination search over fluent subsets.
            std::vector<std::size_t> chosen;
            bool found = false;
            for (std::size_t k = 0; k <= n_fluents && !found; ++k) {
                std::vector<std::size_t> combo(k);
                for (std::size_t i = 0; i < k; ++i) combo[i] = i;
                while (true) {
                    if (distinguishes(combo)) {
                        chosen = combo;
                        found = true;
                        break;
                    }
                    if (k == 0) break;
                    // next combination in lexicographic order
                    std::size_t i = k;
                    while (i-- > 0) {
                        if (combo[i] + (k - i) < n_fluents) {
                            ++combo[i];
                            for (std::size_t j = i + 1; j < k; ++j) combo[j] = combo[j - 1] + 1;
                            break;
                        }
                        if (i == 0) {
                            i = k + 1;  // exhausted
                            break;
                        }
                    }
                    if (i == k + 1 || k == 0) break;
                }
            }
            if (!found) throw Error("no distinguishing condition exists");  // unreachable: full state always works

            PartialFluentState cond;
            for (const std::size_t f : chosen)
                cond.set(mdp.codec.fluent_name(f),
                         mdp.codec.value_name(f, mdp.codec.value_at(s, f)));
            minimized[{instant, s}] = std::move(cond);
        }
    }

    PPropSet out;
    for (const auto& p : pprops.props) {
        PProposition q = p;
        q.condition = minimized.at({p.instant, detail::condition_state_index(mdp.codec, p)});
        out.props.push_back(std::move(q));
    }
    return out;
}

struct DecompileOptions {
    bool prune = false;
    double prune_threshold = 0.0;
    bool minimize = false;
};

/// Full inverse pipeline: translate, optionally prune unreachable
/// (state, instant) pairs, optionally minimize conditions. Minimization keeps
/// every reachable state with a different policy choice as a competitor, so
/// the refined propositions stay functionally equivalent to the policy.
inline PPropSet decompile_policy(const PecMdp& mdp, const PolicyTable& policy,
                                 const DecompileOptions& opt = {}) {
    PPropSet props = policy_to_pprops(mdp, policy);
    if (opt.prune) props = reachability_prune(mdp, policy, props, opt.prune_threshold);
    if (!opt.minimize) return props;

    std::map<std::string, std::vector<std::size_t>> extra;
    const std::vector<std::vector<double>> dists = policy_induced_distributions(mdp, policy);
    std::map<std::string, std::set<std::size_t>> covered;
    for (const auto& p : props.props)
        covered[p.instant].insert(detail::condition_state_index(mdp.codec, p));
    for (const auto& [instant, states] : covered) {
        const std::size_t t = *mdp.instant_step(instant);
        for (std::size_t s = 0; s < mdp.n_states(); ++s)
            if (dists[t][s] > opt.prune_threshold && states.count(s) == 0)
                extra[instant].push_back(s);
    }
    return minimize_conditions(mdp, props, extra);
}

struct RoundtripMismatch {
    std::string instant;
    std::size_t state = 0;
    std::vector<std::string> expected_situation;
    double observed_probability = 0.0;
};

struct RoundtripReport {
    std::vector<RoundtripMismatch> mismatches;
    std::optional<std::string> error;  // recompilation failure, if any

    bool ok() const { return mismatches.empty() && !error.has_value(); }

    std::string to_string() const {
        std::string out;
        if (error) out += "recompilation failed: " + *error + "\n";
        for (const auto& m : mismatches) {
            out += "state " + std::to_string(m.state) + " at instant '" + m.instant +
                   "': expected situation {";
            for (std::size_t i = 0; i < m.expected_situation.size(); ++i) {
                if (i > 0) out += ", ";
                out += m.expected_situation[i];
            }
            out += "} with probability 1, observed " +
                   detail::format_double(m.observed_probability) + "\n";
        }
        return out;
    }
};

/// Rebuilds the domain with `pprops` in place of the original p-propositions,
/// recompiles, and verifies the new policy tensor puts probability 1 on the
/// policy's chosen situation at every reachable (state, step). Mismatches are
/// report entries, not failures.
inline RoundtripReport roundtrip_check(const Domain& domain, const PPropSet& pprops,
                                       const PolicyTable& policy, double reach_threshold = 0.0) {
    RoundtripReport report;

    Domain rebuilt = domain;
    rebuilt.pprops = pprops.props;

    PecMdp original;
    PecMdp recompiled;
    try {
        original = compile(domain);
        recompiled = compile(rebuilt);
    } catch (const Error& e) {
        report.error = e.what();
        return report;
    }

    const std::vector<std::vector<double>> dists = policy_induced_distributions(original, policy);
    const std::size_t t_end = policy.kind == PolicyTable::Kind::Stationary
                                  ? original.horizon
                                  : std::min(policy.n_steps(), original.horizon);
    for (std::size_t t = 0; t < t_end; ++t) {
        for (std::size_t s = 0; s < original.n_states(); ++s) {
            if (!(dists[t][s] > reach_threshold)) continue;
            const std::size_t a = policy.choice(t, s);
            const std::vector<std::string> names = original.acodec.situation_names(a);
            const auto a2 = recompiled.acodec.index_of_names(
                std::set<std::string>(names.begin(), names.end()));
            const double observed = a2 ? recompiled.mu(t, s, *a2) : 0.0;
            if (!(observed >= 1.0 - 1e-12))
                report.mismatches.push_back(
                    {original.instant_labels[t], s, names, observed});
        }
    }
    return report;
}

}  // namespace pecmdp
