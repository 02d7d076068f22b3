#pragma once
// Objective-directed strategies: declarative reward specs compiled to
// R(s, a, s'), exact tabular solvers (finite-horizon backward induction and
// stationary value iteration), deterministic policies, and seeded Monte-Carlo
// simulation.
//
// Decision steps are the transitions between consecutive instants: a domain
// with n instants has n-1 steps, and the value at the final instant is zero.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pecmdp/compiler.hpp"
#include "pecmdp/domain.hpp"

namespace pecmdp {

/// Declarative objective: a goal condition worth `goal_reward` on entry, a
/// per-action cost table, and a constant per-step penalty. At least one
/// component must be present.
struct RewardSpec {
    std::optional<PartialFluentState> goal;
    double goal_reward = 0.0;
    std::map<std::string, double> action_costs;
    double step_penalty = 0.0;
    double discount = 1.0;
};

/// R(s, a, s') = goal bonus of s' minus the aggregated cost of the situation
/// minus the step penalty. Stored factored; the tensor view is `reward()`.
class RewardModel {
public:
    RewardModel() = default;
    RewardModel(std::vector<double> goal_bonus, std::vector<double> situation_cost, double discount)
        : goal_bonus_(std::move(goal_bonus)), situation_cost_(std::move(situation_cost)),
          discount_(discount) {}

    double reward(std::size_t /*s*/, std::size_t a, std::size_t sp) const {
        return goal_bonus_[sp] - situation_cost_[a];
    }
    double discount() const { return discount_; }
    const std::vector<double>& goal_bonus() const { return goal_bonus_; }
    const std::vector<double>& situation_cost() const { return situation_cost_; }

private:
    std::vector<double> goal_bonus_;
    std::vector<double> situation_cost_;
    double discount_ = 1.0;
};

inline RewardModel build_reward(const PecMdp& mdp, const RewardSpec& spec) {
    if (!spec.goal.has_value() && spec.action_costs.empty() && spec.step_penalty == 0.0)
        throw Error("reward specification sets no goal, action costs, or step penalty");
    if (!(spec.discount > 0.0) || spec.discount > 1.0)
        throw Error("discount " + detail::format_double(spec.discount) + " outside (0, 1]");
    if (spec.step_penalty < 0.0) throw Error("step penalty must be non-negative");

    std::vector<double> bonus(mdp.n_states(), 0.0);
    if (spec.goal.has_value()) {
        const StateCodec::Condition cond = mdp.codec.condition(*spec.goal);
        mdp.codec.for_each_matching(cond, [&](std::size_t s) { bonus[s] = spec.goal_reward; });
    }

    std::vector<double> action_cost(mdp.acodec.n_actions(), 0.0);
    for (const auto& [name, c] : spec.action_costs) {
        const auto k = mdp.acodec.action_index(name);
        if (!k) throw Error("unknown action '" + name + "' in action costs");
        if (c < 0.0) throw Error("cost of action '" + name + "' must be non-negative");
        action_cost[*k] = c;
    }
    std::vector<double> situation_cost(mdp.n_situations(), 0.0);
    for (std::size_t a = 0; a < mdp.n_situations(); ++a) {
        double c = spec.step_penalty;
        for (const std::size_t k : mdp.acodec.situation(a)) c += action_cost[k];
        situation_cost[a] = c;
    }
    return RewardModel(std::move(bonus), std::move(situation_cost), spec.discount);
}

/// Deterministic mapping from state (and step, when non-stationary) to an
/// action-taking situation index.
struct PolicyTable {
    enum class Kind { Stationary, Nonstationary };

    Kind kind = Kind::Stationary;
    std::vector<std::size_t> stationary;          // [s]
    std::vector<std::vector<std::size_t>> steps;  // [t][s]

    std::size_t n_steps() const { return steps.size(); }

    std::size_t choice(std::size_t s) const { return stationary[s]; }
    std::size_t choice(std::size_t t, std::size_t s) const {
        if (kind == Kind::Stationary) return stationary[s];
        return t < steps.size() ? steps[t][s] : 0;
    }

    /// Extracts the deterministic policy embedded in the domain's own policy
    /// tensor. Throws RequiresDeterministic when any (t, s) row spreads mass
    /// over more than one situation.
    static PolicyTable from_mu(const PecMdp& mdp, double tolerance = 1e-9) {
        PolicyTable p;
        p.kind = Kind::Nonstationary;
        p.steps.assign(mdp.horizon, std::vector<std::size_t>(mdp.n_states(), 0));
        for (std::size_t t = 0; t < mdp.horizon; ++t) {
            for (std::size_t s = 0; s < mdp.n_states(); ++s) {
                std::size_t chosen = mdp.n_situations();
                for (std::size_t a = 0; a < mdp.n_situations(); ++a) {
                    const double w = mdp.mu(t, s, a);
                    if (w >= 1.0 - tolerance) {
                        chosen = a;
                        break;
                    }
                    if (w > tolerance)
                        throw RequiresDeterministic(
                            "policy tensor is stochastic at step " + std::to_string(t) + ", state " +
                            std::to_string(s));
                }
                if (chosen == mdp.n_situations())
                    throw RequiresDeterministic("policy tensor has no certain situation at step " +
                                                std::to_string(t) + ", state " + std::to_string(s));
                p.steps[t][s] = chosen;
            }
        }
        return p;
    }
};

/// Which situations the optimizer may pick at a step. StepSupport (default):
/// anything the domain's policy tensor supports at that step in some state,
/// plus the null situation. InstantPerformable: every subset of the actions
/// performable at that instant per the p-propositions.
enum class AvailabilityMode { StepSupport, InstantPerformable };

struct PlanOptions {
    AvailabilityMode availability = AvailabilityMode::StepSupport;
};

inline std::vector<std::size_t> available_situations(const PecMdp& mdp, std::size_t t,
                                                     AvailabilityMode mode) {
    std::set<std::size_t> avail{0};
    if (mode == AvailabilityMode::StepSupport) {
        for (std::size_t s = 0; s < mdp.n_states(); ++s)
            for (std::size_t a = 0; a < mdp.n_situations(); ++a)
                if (mdp.mu(t, s, a) > 0.0) avail.insert(a);
    } else {
        std::set<std::size_t> performable;
        for (const auto& p : mdp.domain.pprops) {
            if (p.instant != mdp.instant_labels[t]) continue;
            if (const auto k = mdp.acodec.action_index(p.action)) performable.insert(*k);
        }
        for (std::size_t a = 0; a < mdp.n_situations(); ++a) {
            const auto& members = mdp.acodec.situation(a);
            if (std::all_of(members.begin(), members.end(),
                            [&](std::size_t k) { return performable.count(k) != 0; }))
                avail.insert(a);
        }
    }
    return std::vector<std::size_t>(avail.begin(), avail.end());
}

namespace detail {

inline double q_value(const PecMdp& mdp, const RewardModel& r, std::size_t s, std::size_t a,
                      const std::vector<double>& v_next) {
    KahanSum q;
    mdp.transitions.for_each_successor(s, a, [&](std::size_t sp, double p) {
        q.add(p * (r.reward(s, a, sp) + r.discount() * v_next[sp]));
    });
    return q.value();
}

}  // namespace detail

struct FiniteHorizonSolution {
    PolicyTable policy;                     // non-stationary, one row per step
    std::vector<std::vector<double>> value; // [t][s] for t = 0..n_steps (last row zero)
};

/// Backward-induction solution of the finite-horizon problem. Ties break to
/// the lowest situation index, so results are reproducible.
inline FiniteHorizonSolution solve_finite_horizon(const PecMdp& mdp, const RewardModel& reward,
                                                  const PlanOptions& opt = {}) {
    if (mdp.horizon == 0) throw Error("cannot plan over an empty timeline");
    const std::size_t n_steps = mdp.horizon - 1;
    const std::size_t n = mdp.n_states();

    FiniteHorizonSolution out;
    out.policy.kind = PolicyTable::Kind::Nonstationary;
    out.policy.steps.assign(n_steps, std::vector<std::size_t>(n, 0));
    out.value.assign(n_steps + 1, std::vector<double>(n, 0.0));

    for (std::size_t t = n_steps; t-- > 0;) {
        const std::vector<std::size_t> avail = available_situations(mdp, t, opt.availability);
        for (std::size_t s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_a = 0;
            for (const std::size_t a : avail) {
                const double q = detail::q_value(mdp, reward, s, a, out.value[t + 1]);
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            out.value[t][s] = best;
            out.policy.steps[t][s] = best_a;
        }
    }
    return out;
}

struct StationarySolution {
    PolicyTable policy;
    std::vector<double> value;
    std::size_t iterations = 0;
};

/// Value iteration to the usual epsilon-optimal fixed point, then the greedy
/// policy. Requires discount < 1. The action set is the union of per-step
/// availability over the whole timeline.
inline StationarySolution solve_stationary(const PecMdp& mdp, const RewardModel& reward,
                                           double epsilon = 1e-9, const PlanOptions& opt = {}) {
    if (!(reward.discount() < 1.0))
        throw Error("stationary solving requires a discount strictly below 1");
    if (!(epsilon > 0.0)) throw Error("epsilon must be positive");

    std::set<std::size_t> avail_set{0};
    for (std::size_t t = 0; t + 1 < std::max<std::size_t>(mdp.horizon, 1); ++t)
        for (const std::size_t a : available_situations(mdp, t, opt.availability))
            avail_set.insert(a);
    const std::vector<std::size_t> avail(avail_set.begin(), avail_set.end());

    const std::size_t n = mdp.n_states();
    const double gamma = reward.discount();
    const double threshold = epsilon * (1.0 - gamma) / (2.0 * gamma);

    StationarySolution out;
    out.value.assign(n, 0.0);
    std::vector<double> next(n, 0.0);
    const std::size_t max_iterations = 1'000'000;
    for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
        double delta = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (const std::size_t a : avail)
                best = std::max(best, detail::q_value(mdp, reward, s, a, out.value));
            delta = std::max(delta, std::abs(best - out.value[s]));
            next[s] = best;
        }
        out.value.swap(next);
        if (delta < threshold) break;
    }

    out.policy.kind = PolicyTable::Kind::Stationary;
    out.policy.stationary.assign(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_a = 0;
        for (const std::size_t a : avail) {
            const double q = detail::q_value(mdp, reward, s, a, out.value);
            if (q > best) {
                best = q;
                best_a = a;
            }
        }
        out.policy.stationary[s] = best_a;
    }
    return out;
}

/// State distributions p_t, t = 0..horizon-1, of the Markov chain induced by
/// substituting the deterministic policy into the transition tensor.
inline std::vector<std::vector<double>> policy_induced_distributions(const PecMdp& mdp,
                                                                     const PolicyTable& policy) {
    std::vector<std::vector<double>> dists;
    dists.push_back(mdp.p0);
    for (std::size_t t = 0; t + 1 < mdp.horizon; ++t) {
        std::vector<double> next(mdp.n_states(), 0.0);
        const std::vector<double>& cur = dists.back();
        for (std::size_t s = 0; s < mdp.n_states(); ++s) {
            if (cur[s] == 0.0) continue;
            const std::size_t a = policy.choice(t, s);
            mdp.transitions.for_each_successor(
                s, a, [&](std::size_t sp, double p) { next[sp] += cur[s] * p; });
        }
        dists.push_back(std::move(next));
    }
    return dists;
}

/// Exact expected discounted return of a deterministic policy, computed
/// forward over the policy-induced chain (an algebraic route independent of
/// the backward-induction solvers).
inline double exact_policy_return(const PecMdp& mdp, const RewardModel& reward,
                                  const PolicyTable& policy) {
    const std::vector<std::vector<double>> dists = policy_induced_distributions(mdp, policy);
    detail::KahanSum total;
    double gamma_t = 1.0;
    for (std::size_t t = 0; t + 1 < mdp.horizon; ++t) {
        for (std::size_t s = 0; s < mdp.n_states(); ++s) {
            const double ps = dists[t][s];
            if (ps == 0.0) continue;
            const std::size_t a = policy.choice(t, s);
            detail::KahanSum step;
            mdp.transitions.for_each_successor(s, a, [&](std::size_t sp, double p) {
                step.add(p * reward.reward(s, a, sp));
            });
            total.add(gamma_t * ps * step.value());
        }
        gamma_t *= reward.discount();
    }
    return total.value();
}

// ---------------------------------------------------------------------------
// Simulation

struct SimulateOptions {
    std::uint64_t seed = 0;
    std::size_t episodes = 0;
    bool record_trajectories = true;
};

struct Trajectory {
    std::vector<std::uint32_t> states;      // one per instant
    std::vector<std::uint32_t> situations;  // situation taken at each instant
    double ret = 0.0;
};

struct SimulationResult {
    std::size_t episodes = 0;
    std::size_t horizon = 0;
    std::vector<std::vector<std::uint64_t>> state_visits;  // [t][s]
    bool has_returns = false;
    double mean_return = 0.0;
    double return_stddev = 0.0;
    std::vector<Trajectory> trajectories;

    double empirical(std::size_t t, std::size_t s) const {
        return episodes == 0 ? 0.0
                             : static_cast<double>(state_visits[t][s]) /
                                   static_cast<double>(episodes);
    }
};

namespace detail {

// Platform-independent uniform double in [0, 1) from a seeded mt19937_64.
inline double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename WeightAt>
inline std::size_t sample_categorical(std::mt19937_64& rng, std::size_t n, WeightAt&& weight) {
    const double u = next_uniform(rng);
    double cum = 0.0;
    std::size_t last_nonzero = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weight(i);
        if (w <= 0.0) continue;
        last_nonzero = i;
        cum += w;
        if (u < cum) return i;
    }
    return last_nonzero;  // guard against rounding at the top of the CDF
}

inline std::size_t sample_successor(const TransitionModel& t, std::mt19937_64& rng, std::size_t s,
                                    std::size_t a) {
    const double u = next_uniform(rng);
    double cum = 0.0;
    std::size_t chosen = s;
    bool decided = false;
    t.for_each_successor(s, a, [&](std::size_t sp, double p) {
        if (decided) return;
        chosen = sp;
        cum += p;
        if (u < cum) decided = true;
    });
    return chosen;
}

inline SimulationResult run_simulation(const PecMdp& mdp, const PolicyTable* policy,
                                       const RewardModel* reward, const SimulateOptions& opt) {
    SimulationResult out;
    out.episodes = opt.episodes;
    out.horizon = mdp.horizon;
    out.state_visits.assign(mdp.horizon, std::vector<std::uint64_t>(mdp.n_states(), 0));
    out.has_returns = reward != nullptr;

    std::mt19937_64 rng(opt.seed);
    KahanSum sum_ret, sum_sq;
    for (std::size_t ep = 0; ep < opt.episodes; ++ep) {
        Trajectory traj;
        std::size_t s = sample_categorical(rng, mdp.n_states(),
                                           [&](std::size_t i) { return mdp.p0[i]; });
        double ret = 0.0;
        double gamma_t = 1.0;
        for (std::size_t t = 0; t < mdp.horizon; ++t) {
            out.state_visits[t][s] += 1;
            std::size_t a;
            if (policy != nullptr) {
                a = t + 1 < mdp.horizon || policy->kind == PolicyTable::Kind::Stationary
                        ? policy->choice(t, s)
                        : 0;
            } else {
                a = sample_categorical(rng, mdp.n_situations(),
                                       [&](std::size_t i) { return mdp.mu(t, s, i); });
            }
            if (opt.record_trajectories) {
                traj.states.push_back(static_cast<std::uint32_t>(s));
                traj.situations.push_back(static_cast<std::uint32_t>(a));
            }
            if (t + 1 < mdp.horizon) {
                const std::size_t sp = sample_successor(mdp.transitions, rng, s, a);
                if (reward != nullptr) {
                    ret += gamma_t * reward->reward(s, a, sp);
                    gamma_t *= reward->discount();
                }
                s = sp;
            }
        }
        if (reward != nullptr) {
            sum_ret.add(ret);
            sum_sq.add(ret * ret);
        }
        if (opt.record_trajectories) {
            traj.ret = ret;
            out.trajectories.push_back(std::move(traj));
        }
    }
    if (reward != nullptr && opt.episodes > 0) {
        const double n = static_cast<double>(opt.episodes);
        out.mean_return = sum_ret.value() / n;
        const double var = std::max(0.0, sum_sq.value() / n - out.mean_return * out.mean_return);
        out.return_stddev = std::sqrt(var);
    }
    return out;
}

}  // namespace detail

/// Monte-Carlo rollout of the domain's own (stochastic) policy tensor.
inline SimulationResult simulate(const PecMdp& mdp, const SimulateOptions& opt,
                                 const RewardModel* reward = nullptr) {
    return detail::run_simulation(mdp, nullptr, reward, opt);
}

/// Monte-Carlo rollout of a fixed deterministic policy.
inline SimulationResult simulate(const PecMdp& mdp, const PolicyTable& policy,
                                 const SimulateOptions& opt, const RewardModel* reward = nullptr) {
    return detail::run_simulation(mdp, &policy, reward, opt);
}

}  // namespace pecmdp
