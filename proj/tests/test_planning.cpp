#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pecmdp/pecmdp.hpp"
#include "support/corpus.hpp"
#include "support/fixtures.hpp"

using namespace pecmdp;

namespace {

RewardSpec lamp_goal(double reward = 1.0) {
    RewardSpec spec;
    spec.goal = PartialFluentState{{"Lamp", "on"}};
    spec.goal_reward = reward;
    return spec;
}

// Coin-lamp dynamics with one decision step and the flip performable at 0.
Domain one_step_lamp() {
    return fixtures::must_parse(
        "fluent Lamp takes-values {off, on}\n"
        "action Flip\n"
        "instants 0..1\n"
        "initially-one-of {({Lamp=off}, 1.0)}\n"
        "Flip causes-one-of {({Lamp=on}, 0.9), ({}, 0.1)}\n"
        "Flip performed-at 0 with-prob 0.8\n");
}

// Coin-lamp dynamics where the flip is performable at every listed instant.
Domain lamp_with_horizon(std::size_t n_instants) {
    std::string src =
        "fluent Lamp takes-values {off, on}\n"
        "action Flip\n"
        "instants 0.." + std::to_string(n_instants - 1) + "\n"
        "initially-one-of {({Lamp=off}, 1.0)}\n"
        "Flip causes-one-of {({Lamp=on}, 0.9), ({}, 0.1)}\n";
    for (std::size_t t = 0; t < n_instants; ++t)
        src += "Flip performed-at " + std::to_string(t) + " with-prob 0.5\n";
    return fixtures::must_parse(src);
}

}  // namespace

TEST_CASE("reward construction") {
    const PecMdp mdp = compile(fixtures::coin_lamp());

    const RewardModel indicator = build_reward(mdp, lamp_goal());
    const std::size_t flip = *mdp.acodec.index_of_names({"Flip"});
    CHECK(indicator.reward(0, 0, 1) == 1.0);
    CHECK(indicator.reward(0, flip, 1) == 1.0);
    CHECK(indicator.reward(0, 0, 0) == 0.0);

    RewardSpec with_cost = lamp_goal();
    with_cost.action_costs["Flip"] = 0.2;
    const RewardModel costed = build_reward(mdp, with_cost);
    CHECK(costed.reward(0, flip, 0) == -0.2);
    CHECK(costed.reward(0, 0, 0) == 0.0);

    RewardSpec bad = lamp_goal();
    bad.action_costs["Ghost"] = 1.0;
    CHECK_THROWS_AS(build_reward(mdp, bad), Error);
    CHECK_THROWS_AS(build_reward(mdp, RewardSpec{}), Error);
}

TEST_CASE("composite situations aggregate their action costs") {
    const Domain d = fixtures::must_parse(
        "fluent F takes-values {a, b}\n"
        "action A\naction B\n"
        "instants 0..1\n"
        "initially-one-of {({F=a}, 1.0)}\n"
        "A performed-at 0 with-prob 0.5\n"
        "B performed-at 0 with-prob 0.5\n");
    const PecMdp mdp = compile(d);
    RewardSpec spec;
    spec.action_costs = {{"A", 0.2}, {"B", 0.3}};
    const RewardModel reward = build_reward(mdp, spec);
    const std::size_t both = *mdp.acodec.index_of_names({"A", "B"});
    CHECK_THAT(reward.reward(0, both, 0), Catch::Matchers::WithinAbs(-0.5, 1e-12));
}

TEST_CASE("one-step backward induction picks the flip") {
    const PecMdp mdp = compile(one_step_lamp());
    const FiniteHorizonSolution sol = solve_finite_horizon(mdp, build_reward(mdp, lamp_goal()));

    REQUIRE(sol.policy.n_steps() == 1);
    const std::size_t flip = *mdp.acodec.index_of_names({"Flip"});
    CHECK(sol.policy.choice(0, 0) == flip);
    CHECK_THAT(sol.value[0][0], Catch::Matchers::WithinAbs(0.9, 1e-12));
}

TEST_CASE("zero reward ties break to the null situation") {
    const PecMdp mdp = compile(one_step_lamp());
    const FiniteHorizonSolution sol = solve_finite_horizon(mdp, build_reward(mdp, lamp_goal(0.0)));
    for (std::size_t t = 0; t < sol.policy.n_steps(); ++t)
        for (std::size_t s = 0; s < mdp.n_states(); ++s) {
            CHECK(sol.policy.choice(t, s) == 0);
            CHECK(sol.value[t][s] == 0.0);
        }
}

TEST_CASE("Bellman recomputation matches the returned value table") {
    corpus::Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Domain d = corpus::random_domain(rng);
        const PecMdp mdp = compile(d);
        RewardSpec spec;
        spec.goal = corpus::single_fluent_queries(d)[0];
        spec.goal_reward = 1.0;
        spec.step_penalty = 0.125;
        const RewardModel reward = build_reward(mdp, spec);
        const FiniteHorizonSolution sol = solve_finite_horizon(mdp, reward);

        for (std::size_t t = 0; t + 1 < sol.value.size(); ++t) {
            const auto avail = available_situations(mdp, t, AvailabilityMode::StepSupport);
            for (std::size_t s = 0; s < mdp.n_states(); ++s) {
                double best = -std::numeric_limits<double>::infinity();
                for (const std::size_t a : avail)
                    best = std::max(best, detail::q_value(mdp, reward, s, a, sol.value[t + 1]));
                REQUIRE_THAT(sol.value[t][s], Catch::Matchers::WithinAbs(best, 1e-12));
            }
        }
    }
}

TEST_CASE("finite-horizon policies beat brute-force enumeration") {
    corpus::Params params;
    params.max_fluents = 2;
    params.max_values = 2;
    params.max_actions = 2;
    params.max_instants = 3;
    corpus::Rng rng(47);
    int solved = 0;
    for (int trial = 0; trial < 60 && solved < 12; ++trial) {
        const Domain d = corpus::random_domain(rng, params);
        const PecMdp mdp = compile(d);
        RewardSpec spec;
        spec.goal = corpus::single_fluent_queries(d)[0];
        spec.goal_reward = 1.0;
        spec.action_costs[d.actions[0]] = 0.25;
        const RewardModel reward = build_reward(mdp, spec);

        const auto best = corpus::brute_force_best_return(mdp, reward,
                                                          AvailabilityMode::StepSupport, 100'000);
        if (!best.has_value()) continue;
        ++solved;

        const FiniteHorizonSolution sol = solve_finite_horizon(mdp, reward);
        const double solver_return = exact_policy_return(mdp, reward, sol.policy);
        REQUIRE_THAT(solver_return, Catch::Matchers::WithinAbs(*best, 1e-9));
    }
    REQUIRE(solved >= 8);
}

TEST_CASE("argmax is invariant under exact reward scaling") {
    corpus::Rng rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        const Domain d = corpus::random_domain(rng);
        const PecMdp mdp = compile(d);
        RewardSpec spec;
        spec.goal = corpus::single_fluent_queries(d).back();
        spec.goal_reward = 0.75;
        spec.step_penalty = 0.25;
        RewardSpec scaled = spec;
        scaled.goal_reward *= 4.0;  // power of two: exact scaling
        scaled.step_penalty *= 4.0;

        const FiniteHorizonSolution a = solve_finite_horizon(mdp, build_reward(mdp, spec));
        const FiniteHorizonSolution b = solve_finite_horizon(mdp, build_reward(mdp, scaled));
        CHECK(a.policy.steps == b.policy.steps);
    }
}

TEST_CASE("stationary value iteration") {
    // All rewards zero: any policy is optimal, ties go to the null situation.
    const PecMdp mdp = compile(lamp_with_horizon(4));
    RewardSpec zero = lamp_goal(0.0);
    zero.discount = 0.9;
    const StationarySolution trivial = solve_stationary(mdp, build_reward(mdp, zero));
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        CHECK(trivial.policy.choice(s) == 0);
        CHECK(trivial.value[s] == 0.0);
    }

    // Absorbing goal: compare against a long finite horizon.
    RewardSpec spec = lamp_goal();
    spec.discount = 0.9;
    const StationarySolution stat = solve_stationary(mdp, build_reward(mdp, spec), 1e-9);
    const std::size_t flip = *mdp.acodec.index_of_names({"Flip"});
    CHECK(stat.policy.choice(0) == flip);
    CHECK(stat.value[0] >= 0.9 * 0.9);

    const PecMdp long_mdp = compile(lamp_with_horizon(51));
    const FiniteHorizonSolution fh =
        solve_finite_horizon(long_mdp, build_reward(long_mdp, spec));
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        CHECK_THAT(stat.value[s], Catch::Matchers::WithinAbs(fh.value[0][s], 0.06));
        CHECK(stat.policy.choice(s) == fh.policy.choice(0, s));
    }

    RewardSpec undiscounted = lamp_goal();
    CHECK_THROWS_AS(solve_stationary(mdp, build_reward(mdp, undiscounted)), Error);
}

TEST_CASE("inert domains converge to the geometric step-penalty sum") {
    Domain d = fixtures::coin_lamp();
    d.cprops.clear();
    d.pprops.clear();
    const PecMdp mdp = compile(d);
    RewardSpec spec;
    spec.step_penalty = 0.5;
    spec.discount = 0.9;
    const StationarySolution sol = solve_stationary(mdp, build_reward(mdp, spec), 1e-9);
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        CHECK_THAT(sol.value[s], Catch::Matchers::WithinAbs(-0.5 / (1.0 - 0.9), 1e-8));
}

TEST_CASE("availability modes") {
    // Flip has probability 1 at instant 0: situations omitting it carry no
    // support, but remain performable in instant mode.
    const Domain d = fixtures::must_parse(
        "fluent Lamp takes-values {off, on}\n"
        "action Flip\n"
        "instants 0..1\n"
        "initially-one-of {({Lamp=off}, 1.0)}\n"
        "Flip performed-at 0 with-prob 1.0\n");
    const PecMdp mdp = compile(d);
    const std::size_t flip = *mdp.acodec.index_of_names({"Flip"});

    const auto support = available_situations(mdp, 0, AvailabilityMode::StepSupport);
    CHECK(support == std::vector<std::size_t>{0, flip});

    const auto instant = available_situations(mdp, 0, AvailabilityMode::InstantPerformable);
    CHECK(instant == std::vector<std::size_t>{0, flip});

    // Nothing performable at instant 1.
    CHECK(available_situations(mdp, 1, AvailabilityMode::InstantPerformable) ==
          std::vector<std::size_t>{0});
}

TEST_CASE("policy extraction from the domain tensor") {
    // All p-propositions certain: the tensor is deterministic.
    const Domain d = fixtures::must_parse(
        "fluent Lamp takes-values {off, on}\n"
        "action Flip\n"
        "instants 0..1\n"
        "initially-one-of {({Lamp=off}, 1.0)}\n"
        "Flip performed-at 0 with-prob 1.0\n");
    const PecMdp deterministic = compile(d);
    const PolicyTable p = PolicyTable::from_mu(deterministic);
    CHECK(p.choice(0, 0) == *deterministic.acodec.index_of_names({"Flip"}));
    CHECK(p.choice(1, 0) == 0);

    const PecMdp stochastic = compile(fixtures::coin_lamp());
    CHECK_THROWS_AS(PolicyTable::from_mu(stochastic), RequiresDeterministic);
}

TEST_CASE("simulation is reproducible and converges") {
    const PecMdp mdp = compile(fixtures::coin_lamp());

    SimulateOptions opt;
    opt.seed = 42;
    opt.episodes = 20'000;
    opt.record_trajectories = false;
    const SimulationResult a = simulate(mdp, opt);
    const SimulationResult b = simulate(mdp, opt);
    CHECK(a.state_visits == b.state_visits);

    const double exact = 0.72;
    const double sigma = std::sqrt(exact * (1.0 - exact) / static_cast<double>(opt.episodes));
    CHECK(std::abs(a.empirical(2, 1) - exact) <= 3.0 * sigma);

    opt.seed = 43;
    const SimulationResult c = simulate(mdp, opt);
    CHECK(a.state_visits != c.state_visits);
}

TEST_CASE("simulation edge cases") {
    const PecMdp mdp = compile(fixtures::coin_lamp());

    SimulateOptions none;
    none.episodes = 0;
    const SimulationResult empty = simulate(mdp, none);
    CHECK(empty.trajectories.empty());
    CHECK(empty.mean_return == 0.0);

    // Deterministic policy + deterministic start + null actions: one repeated
    // trajectory.
    PolicyTable idle;
    idle.kind = PolicyTable::Kind::Stationary;
    idle.stationary.assign(mdp.n_states(), 0);
    SimulateOptions opt;
    opt.episodes = 50;
    const SimulationResult fixed = simulate(mdp, idle, opt);
    REQUIRE(fixed.trajectories.size() == 50);
    for (const auto& traj : fixed.trajectories) {
        CHECK(traj.states == fixed.trajectories[0].states);
        CHECK(traj.states == std::vector<std::uint32_t>{0, 0, 0, 0});
    }
}

TEST_CASE("policy JSON round trip") {
    const PecMdp mdp = compile(fixtures::coin_lamp());
    const FiniteHorizonSolution sol = solve_finite_horizon(mdp, build_reward(mdp, lamp_goal()));

    const Json j = policy_to_json(mdp, sol.policy, &sol.value);
    const PolicyTable back = policy_from_json(mdp, nlohmann::json::parse(j.dump()));
    CHECK(back.kind == PolicyTable::Kind::Nonstationary);
    CHECK(back.steps == sol.policy.steps);

    const StationarySolution stat = [&] {
        RewardSpec spec = lamp_goal();
        spec.discount = 0.5;
        return solve_stationary(mdp, build_reward(mdp, spec));
    }();
    const PolicyTable stat_back =
        policy_from_json(mdp, nlohmann::json::parse(policy_to_json(mdp, stat.policy).dump()));
    CHECK(stat_back.stationary == stat.policy.stationary);

    CHECK_THROWS_AS(policy_from_json(mdp, nlohmann::json::parse("{}")), Error);
}
