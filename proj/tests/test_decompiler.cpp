#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "pecmdp/pecmdp.hpp"
#include "support/corpus.hpp"
#include "support/fixtures.hpp"

using namespace pecmdp;

namespace {

PolicyTable stationary_policy(const PecMdp& mdp, std::vector<std::size_t> choices) {
    PolicyTable p;
    p.kind = PolicyTable::Kind::Stationary;
    p.stationary = std::move(choices);
    REQUIRE(p.stationary.size() == mdp.n_states());
    return p;
}

Domain two_by_two_with_action() {
    return fixtures::must_parse(
        "fluent F takes-values {a, b}\n"
        "fluent G takes-values {x, y}\n"
        "action Act\n"
        "instants 0..1\n"
        "initially-one-of {({F=a, G=x}, 1.0)}\n"
        "Act performed-at 0 with-prob 0.5\n");
}

PProposition prop(const PecMdp& mdp, const std::string& action, const std::string& instant,
                  std::size_t state) {
    PProposition p;
    p.action = action;
    p.instant = instant;
    p.probability = 1.0;
    p.condition = mdp.codec.decode_state(state).as_partial();
    return p;
}

}  // namespace

TEST_CASE("stationary translation covers every instant") {
    const PecMdp mdp = compile(fixtures::coin_lamp());
    const std::size_t flip = *mdp.acodec.index_of_names({"Flip"});
    const PolicyTable policy = stationary_policy(mdp, {flip, 0});

    const PPropSet props = policy_to_pprops(mdp, policy);
    REQUIRE(props.size() == 4);  // |instants| x |mapped states| x 1 action
    for (std::size_t i = 0; i < props.props.size(); ++i) {
        CHECK(props.props[i].action == "Flip");
        CHECK(props.props[i].instant == std::to_string(i));
        CHECK(props.props[i].probability == 1.0);
        CHECK(props.props[i].condition == PartialFluentState{{"Lamp", "off"}});
    }
}

TEST_CASE("null-only policies translate to nothing") {
    const PecMdp mdp = compile(fixtures::coin_lamp());
    const PolicyTable policy = stationary_policy(mdp, {0, 0});
    CHECK(policy_to_pprops(mdp, policy).empty());
}

TEST_CASE("composite situations emit one proposition per atomic action") {
    const Domain d = fixtures::must_parse(
        "fluent F takes-values {a, b}\n"
        "action A\naction B\n"
        "instants 0..1\n"
        "initially-one-of {({F=a}, 1.0)}\n"
        "A performed-at 0 with-prob 0.5\n"
        "B performed-at 0 with-prob 0.5\n");
    const PecMdp mdp = compile(d);
    const std::size_t both = *mdp.acodec.index_of_names({"A", "B"});

    PolicyTable policy;
    policy.kind = PolicyTable::Kind::Nonstationary;
    policy.steps = {{both, 0}};
    const PPropSet props = policy_to_pprops(mdp, policy);
    REQUIRE(props.size() == 2);
    CHECK(props.props[0].action == "A");
    CHECK(props.props[1].action == "B");
    CHECK(props.props[0].instant == "0");
    CHECK(props.props[1].instant == "0");
    CHECK(props.props[0].condition == props.props[1].condition);
}

TEST_CASE("reachability pruning follows the induced chain") {
    const PecMdp mdp = compile(fixtures::coin_lamp());
    const std::size_t flip = *mdp.acodec.index_of_names({"Flip"});
    // Flip whenever off; on is absorbing. P(off at t) = 0.1^t > 0.
    const PolicyTable policy = stationary_policy(mdp, {flip, 0});
    const PPropSet props = policy_to_pprops(mdp, policy);

    CHECK(reachability_prune(mdp, policy, props, 0.0).size() == 4);
    CHECK(reachability_prune(mdp, policy, props, 0.05).size() == 2);  // t = 0, 1 survive
    CHECK(reachability_prune(mdp, policy, props, 1.1).empty());
}

TEST_CASE("point-mass starts with identity dynamics keep only the start state") {
    Domain d = fixtures::coin_lamp();
    d.cprops.clear();  // every situation self-loops
    const PecMdp mdp = compile(d);
    const std::size_t flip = *mdp.acodec.index_of_names({"Flip"});
    const PolicyTable policy = stationary_policy(mdp, {flip, flip});

    const PPropSet props = policy_to_pprops(mdp, policy);
    REQUIRE(props.size() == 8);  // both states mapped, four instants
    const PPropSet pruned = reachability_prune(mdp, policy, props, 0.0);
    REQUIRE(pruned.size() == 4);
    for (const auto& p : pruned.props) CHECK(p.condition == PartialFluentState{{"Lamp", "off"}});
}

TEST_CASE("condition minimization keeps the distinguishing fluents") {
    const PecMdp mdp = compile(two_by_two_with_action());
    const std::size_t ax = 0, ay = 1, bx = 2;

    SECTION("shared fluent is dropped") {
        PPropSet props;
        props.props = {prop(mdp, "Act", "0", ax), prop(mdp, "Act", "0", bx)};
        const PPropSet out = minimize_conditions(mdp, props);
        CHECK(out.props[0].condition == PartialFluentState{{"F", "a"}});
        CHECK(out.props[1].condition == PartialFluentState{{"F", "b"}});
    }

    SECTION("a lone state needs no condition") {
        PPropSet props;
        props.props = {prop(mdp, "Act", "0", ax)};
        const PPropSet out = minimize_conditions(mdp, props);
        CHECK(out.props[0].condition.empty());
    }

    SECTION("three states: one needs both assignments") {
        PPropSet props;
        props.props = {prop(mdp, "Act", "0", ax), prop(mdp, "Act", "0", ay),
                       prop(mdp, "Act", "0", bx)};
        const PPropSet out = minimize_conditions(mdp, props);
        CHECK(out.props[0].condition == PartialFluentState{{"F", "a"}, {"G", "x"}});
        CHECK(out.props[1].condition == PartialFluentState{{"G", "y"}});
        CHECK(out.props[2].condition == PartialFluentState{{"F", "b"}});

        // Minimality: removing any single assignment breaks distinguishability.
        for (const auto& p : out.props) {
            const std::size_t s = [&] {
                FluentState full;
                for (const auto& [f, v] : p.condition.assignments()) full.set(f, v);
                return p.condition.size() == 2 ? mdp.codec.encode_state(full) : ax;
            }();
            for (const auto& [drop_f, drop_v] : p.condition.assignments()) {
                PartialFluentState weakened;
                for (const auto& [f, v] : p.condition.assignments())
                    if (f != drop_f) weakened.set(f, v);
                int compatible = 0;
                for (const std::size_t other : {ax, ay, bx}) {
                    if (other == s) continue;
                    if (entails(mdp.codec.decode_state(other), weakened)) ++compatible;
                }
                CHECK(compatible > 0);
            }
        }
    }

    SECTION("extra competitors forbid over-generalization") {
        PPropSet props;
        props.props = {prop(mdp, "Act", "0", ax)};
        const PPropSet out =
            minimize_conditions(mdp, props, {{"0", {ay}}});
        CHECK(out.props[0].condition == PartialFluentState{{"G", "x"}});
    }
}

TEST_CASE("round trip of a solved coin-lamp policy") {
    const PecMdp mdp = compile(fixtures::coin_lamp());
    RewardSpec spec;
    spec.goal = PartialFluentState{{"Lamp", "on"}};
    spec.goal_reward = 1.0;
    spec.action_costs["Flip"] = 0.1;
    const FiniteHorizonSolution sol = solve_finite_horizon(mdp, build_reward(mdp, spec));

    DecompileOptions opt;
    opt.prune = true;
    opt.minimize = true;
    const PPropSet props = decompile_policy(mdp, sol.policy, opt);
    const RoundtripReport report = roundtrip_check(mdp.domain, props, sol.policy);
    CHECK(report.ok());

    // The decompiled propositions render to valid .pec text and reparse.
    Domain rebuilt = mdp.domain;
    rebuilt.pprops = props.props;
    const ParseResult r = parse_domain(render_domain(rebuilt));
    REQUIRE(r.ok());
    CHECK(*r.domain == rebuilt);
}

TEST_CASE("empty proposition set round-trips against the idle policy") {
    const PecMdp mdp = compile(fixtures::coin_lamp());
    const PolicyTable idle = stationary_policy(mdp, {0, 0});
    CHECK(roundtrip_check(mdp.domain, PPropSet{}, idle).ok());
}

TEST_CASE("a corrupted instant is located by the round-trip check") {
    const PecMdp mdp = compile(fixtures::coin_lamp());
    RewardSpec spec;
    spec.goal = PartialFluentState{{"Lamp", "on"}};
    spec.goal_reward = 1.0;
    const FiniteHorizonSolution sol = solve_finite_horizon(mdp, build_reward(mdp, spec));

    PPropSet props = decompile_policy(mdp, sol.policy, {});
    REQUIRE_FALSE(props.empty());
    REQUIRE(props.props[0].instant == "1");
    props.props[0].instant = "2";

    const RoundtripReport report = roundtrip_check(mdp.domain, props, sol.policy);
    REQUIRE_FALSE(report.ok());
    const bool found = std::any_of(
        report.mismatches.begin(), report.mismatches.end(), [&](const RoundtripMismatch& m) {
            return m.instant == "1" && m.state == 0;
        });
    CHECK(found);
}

TEST_CASE("minimization without reachable competitors would leak; the pipeline does not") {
    // Uniform start; flip only when off. The lamp-on state is reachable with
    // the null choice, so the minimized condition must still exclude it.
    const Domain d = fixtures::must_parse(
        "fluent Lamp takes-values {off, on}\n"
        "action Flip\n"
        "instants 0..3\n"
        "initially-one-of {({Lamp=off}, 0.5), ({Lamp=on}, 0.5)}\n"
        "Flip causes-one-of {({Lamp=on}, 0.9), ({}, 0.1)}\n"
        "Flip performed-at 1 with-prob 0.8\n");
    const PecMdp mdp = compile(d);
    const std::size_t flip = *mdp.acodec.index_of_names({"Flip"});
    const PolicyTable policy = stationary_policy(mdp, {flip, 0});

    DecompileOptions opt;
    opt.prune = true;
    opt.minimize = true;
    const PPropSet sound = decompile_policy(mdp, policy, opt);
    for (const auto& p : sound.props) CHECK(p.condition == PartialFluentState{{"Lamp", "off"}});
    CHECK(roundtrip_check(d, sound, policy).ok());

    // Scoping competitors to the proposition states alone generalizes the
    // condition away entirely and breaks the round trip.
    const PPropSet leaky =
        minimize_conditions(mdp, reachability_prune(mdp, policy, policy_to_pprops(mdp, policy)));
    REQUIRE_FALSE(leaky.props.empty());
    CHECK(leaky.props[0].condition.empty());
    CHECK_FALSE(roundtrip_check(d, leaky, policy).ok());
}

TEST_CASE("pruning at threshold zero preserves the round trip") {
    corpus::Rng rng(202);
    int checked = 0;
    for (int trial = 0; trial < 30 && checked < 10; ++trial) {
        const Domain d = corpus::random_domain(rng);
        const PecMdp mdp = compile(d);
        if (mdp.horizon < 2) continue;
        RewardSpec spec;
        spec.goal = corpus::single_fluent_queries(d)[0];
        spec.goal_reward = 1.0;
        const FiniteHorizonSolution sol = solve_finite_horizon(mdp, build_reward(mdp, spec));

        DecompileOptions pruned_opt;
        pruned_opt.prune = true;
        pruned_opt.minimize = true;
        const PPropSet pruned = decompile_policy(mdp, sol.policy, pruned_opt);
        DecompileOptions unpruned_opt;
        unpruned_opt.minimize = true;
        const PPropSet unpruned = decompile_policy(mdp, sol.policy, unpruned_opt);

        CHECK(roundtrip_check(d, pruned, sol.policy).ok());
        CHECK(roundtrip_check(d, unpruned, sol.policy).ok());
        ++checked;
    }
    CHECK(checked >= 10);
}

TEST_CASE("recompiled domains preserve single-fluent projections") {
    corpus::Rng rng(404);
    int checked = 0;
    for (int trial = 0; trial < 40 && checked < 12; ++trial) {
        const Domain d = corpus::random_domain(rng);
        const PecMdp mdp = compile(d);
        if (mdp.horizon < 2) continue;
        RewardSpec spec;
        spec.goal = corpus::single_fluent_queries(d).back();
        spec.goal_reward = 2.0;
        spec.step_penalty = 0.25;
        const FiniteHorizonSolution sol = solve_finite_horizon(mdp, build_reward(mdp, spec));

        DecompileOptions opt;
        opt.prune = true;
        opt.minimize = true;
        const PPropSet props = decompile_policy(mdp, sol.policy, opt);

        Domain rebuilt = d;
        rebuilt.pprops = props.props;
        const PecMdp remdp = compile(rebuilt);
        const auto chain = policy_induced_distributions(mdp, sol.policy);

        for (const auto& target : corpus::single_fluent_queries(d)) {
            const std::vector<double> f = filter_vector(mdp.codec, target);
            for (std::size_t t = 0; t < mdp.horizon; ++t) {
                detail::KahanSum expected;
                for (std::size_t s = 0; s < mdp.n_states(); ++s)
                    if (f[s] != 0.0) expected.add(chain[t][s]);
                Query q;
                q.target = target;
                q.target_instant = d.instants[t];
                REQUIRE_THAT(project(remdp, q),
                             Catch::Matchers::WithinAbs(expected.value(), 1e-9));
            }
        }
        ++checked;
    }
    CHECK(checked >= 12);
}

TEST_CASE("stationary count bound") {
    corpus::Rng rng(606);
    for (int trial = 0; trial < 20; ++trial) {
        const Domain d = corpus::random_domain(rng);
        const PecMdp mdp = compile(d);
        std::vector<std::size_t> choices(mdp.n_states());
        for (auto& c : choices) c = corpus::pick(rng, 0, mdp.n_situations() - 1);
        const PolicyTable policy = stationary_policy(mdp, std::move(choices));

        std::size_t expected = 0;
        for (std::size_t s = 0; s < mdp.n_states(); ++s)
            expected += mdp.acodec.situation(policy.choice(s)).size();
        expected *= mdp.horizon;

        CHECK(policy_to_pprops(mdp, policy).size() == expected);
    }
}
