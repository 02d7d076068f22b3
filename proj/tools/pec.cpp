// Command-line front end: validate, compile, project, plan, decompile,
// simulate. See the repository README for file formats and examples.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pecmdp/pecmdp.hpp"

namespace {

// Bad invocation (missing file, malformed argument): exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Diagnostics already printed: exit code 1.
struct Diagnosed : std::exception {};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::optional<std::string>& path, const std::string& text) {
    if (!path.has_value()) {
        std::cout << text;
        return;
    }
    std::ofstream out(*path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + *path + "'");
    out << text;
}

pecmdp::Domain load_domain(const std::string& path) {
    const std::string source = read_file(path);
    pecmdp::ParseResult result = pecmdp::parse_domain(source);
    if (!result.ok()) {
        std::cerr << path << ":" << result.error->to_string() << "\n";
        throw Diagnosed{};
    }
    return std::move(*result.domain);
}

pecmdp::Domain load_valid_domain(const std::string& path) {
    pecmdp::Domain d = load_domain(path);
    const pecmdp::ValidationReport report = pecmdp::validate(d);
    if (!report.ok()) {
        for (const auto& v : report.violations)
            std::cerr << path << ": error: " << pecmdp::to_string(v.kind) << ": " << v.message << "\n";
        throw Diagnosed{};
    }
    return d;
}

nlohmann::json load_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw pecmdp::Error("malformed JSON in '" + path + "': " + e.what());
    }
}

std::string significant12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%#.12g", v);
    return buf;
}

struct Options {
    std::string input;
    std::optional<std::string> output;
    std::string query;
    std::string given;
    std::string engine = "matrix";
    std::string reward_path;
    std::string policy_path;
    std::string horizon_mode = "finite";
    std::string availability = "support";
    bool extrapolate = false;
    bool prune = false;
    bool minimize = false;
    bool check = false;
    bool json = false;
    double threshold = 0.0;
    double epsilon = 1e-9;
    std::uint64_t seed = 0;
    std::size_t episodes = 1000;
    std::size_t state_cap = pecmdp::CompileOptions{}.max_states;
};

pecmdp::CompileOptions compile_options(const Options& o) {
    pecmdp::CompileOptions opt;
    opt.max_states = o.state_cap;
    return opt;
}

pecmdp::PlanOptions plan_options(const Options& o) {
    pecmdp::PlanOptions opt;
    if (o.availability == "support")
        opt.availability = pecmdp::AvailabilityMode::StepSupport;
    else if (o.availability == "instant")
        opt.availability = pecmdp::AvailabilityMode::InstantPerformable;
    else
        throw UsageError("unknown availability mode '" + o.availability + "'");
    return opt;
}

int cmd_validate(const Options& o) {
    pecmdp::Domain d = load_domain(o.input);
    const pecmdp::ValidationReport report = pecmdp::validate(d);
    if (!report.ok()) {
        for (const auto& v : report.violations)
            std::cerr << o.input << ": error: " << pecmdp::to_string(v.kind) << ": " << v.message
                      << "\n";
        return 1;
    }
    std::cout << "ok\n";
    return 0;
}

int cmd_compile(const Options& o) {
    const pecmdp::Domain d = load_valid_domain(o.input);
    const pecmdp::PecMdp mdp = pecmdp::compile(d, compile_options(o));
    write_output(o.output, pecmdp::mdp_to_json(mdp).dump(2) + "\n");
    return 0;
}

int cmd_project(const Options& o) {
    pecmdp::Query q;
    try {
        const pecmdp::QueryAtom target = pecmdp::parse_query_atom(o.query);
        q.target = target.state;
        q.target_instant = target.instant;
        if (!o.given.empty()) {
            const pecmdp::QueryAtom cond = pecmdp::parse_query_atom(o.given);
            q.condition = cond.state;
            q.condition_instant = cond.instant;
        }
    } catch (const pecmdp::QueryError& e) {
        throw UsageError(e.what());
    }

    const pecmdp::Domain d = load_valid_domain(o.input);
    double p = 0.0;
    if (o.engine == "matrix") {
        const pecmdp::PecMdp mdp = pecmdp::compile(d, compile_options(o));
        pecmdp::ProjectOptions popt;
        popt.extrapolate_persistence = o.extrapolate;
        p = pecmdp::project(mdp, q, popt);
    } else if (o.engine == "oracle") {
        p = pecmdp::oracle_project(d, q);
    } else {
        throw UsageError("unknown engine '" + o.engine + "'");
    }

    if (o.json) {
        pecmdp::Json j;
        j["query"] = o.query;
        if (!o.given.empty()) j["given"] = o.given;
        j["engine"] = o.engine;
        j["probability"] = p;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << significant12(p) << "\n";
        std::cout << "# exact: " << pecmdp::detail::format_double(p) << "\n";
    }
    return 0;
}

int cmd_plan(const Options& o) {
    const pecmdp::Domain d = load_valid_domain(o.input);
    const pecmdp::PecMdp mdp = pecmdp::compile(d, compile_options(o));
    const pecmdp::RewardSpec spec = pecmdp::reward_spec_from_json(load_json(o.reward_path));
    const pecmdp::RewardModel reward = pecmdp::build_reward(mdp, spec);

    pecmdp::Json out;
    if (o.horizon_mode == "finite") {
        const pecmdp::FiniteHorizonSolution sol =
            pecmdp::solve_finite_horizon(mdp, reward, plan_options(o));
        out = pecmdp::policy_to_json(mdp, sol.policy, &sol.value);
    } else if (o.horizon_mode == "discounted") {
        const pecmdp::StationarySolution sol =
            pecmdp::solve_stationary(mdp, reward, o.epsilon, plan_options(o));
        out = pecmdp::policy_to_json(mdp, sol.policy, nullptr, &sol.value);
    } else {
        throw UsageError("unknown horizon mode '" + o.horizon_mode + "'");
    }
    write_output(o.output, out.dump(2) + "\n");
    return 0;
}

int cmd_decompile(const Options& o) {
    const pecmdp::Domain d = load_valid_domain(o.input);
    const pecmdp::PecMdp mdp = pecmdp::compile(d, compile_options(o));
    const pecmdp::PolicyTable policy = pecmdp::policy_from_json(mdp, load_json(o.policy_path));

    pecmdp::DecompileOptions dopt;
    dopt.prune = o.prune;
    dopt.prune_threshold = o.threshold;
    dopt.minimize = o.minimize;
    const pecmdp::PPropSet props = pecmdp::decompile_policy(mdp, policy, dopt);

    pecmdp::Domain rebuilt = d;
    rebuilt.pprops = props.props;
    write_output(o.output, pecmdp::render_domain(rebuilt));

    if (o.check) {
        const pecmdp::RoundtripReport report =
            pecmdp::roundtrip_check(d, props, policy, o.threshold);
        if (!report.ok()) {
            std::cerr << report.to_string();
            return 1;
        }
        std::cerr << "round-trip ok: " << props.size() << " p-propositions\n";
    }
    return 0;
}

int cmd_simulate(const Options& o) {
    const pecmdp::Domain d = load_valid_domain(o.input);
    const pecmdp::PecMdp mdp = pecmdp::compile(d, compile_options(o));

    std::optional<pecmdp::PolicyTable> policy;
    if (!o.policy_path.empty())
        policy = pecmdp::policy_from_json(mdp, load_json(o.policy_path));
    std::optional<pecmdp::RewardModel> reward;
    if (!o.reward_path.empty())
        reward = pecmdp::build_reward(mdp, pecmdp::reward_spec_from_json(load_json(o.reward_path)));

    pecmdp::SimulateOptions sopt;
    sopt.seed = o.seed;
    sopt.episodes = o.episodes;
    sopt.record_trajectories = false;
    const pecmdp::SimulationResult result =
        policy.has_value()
            ? pecmdp::simulate(mdp, *policy, sopt, reward.has_value() ? &*reward : nullptr)
            : pecmdp::simulate(mdp, sopt, reward.has_value() ? &*reward : nullptr);

    if (o.json) {
        pecmdp::Json j;
        j["episodes"] = result.episodes;
        j["seed"] = o.seed;
        pecmdp::Json freq = pecmdp::Json::array();
        for (std::size_t t = 0; t < result.horizon; ++t) {
            pecmdp::Json row;
            row["instant"] = mdp.instant_labels[t];
            pecmdp::Json states;
            for (std::size_t s = 0; s < mdp.n_states(); ++s)
                if (result.state_visits[t][s] > 0)
                    states[pecmdp::render_state(mdp.codec.decode_state(s))] = result.empirical(t, s);
            row["frequencies"] = states;
            freq.push_back(row);
        }
        j["state_frequencies"] = freq;
        if (result.has_returns) {
            j["mean_return"] = result.mean_return;
            j["return_stddev"] = result.return_stddev;
        }
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    std::cout << "episodes: " << result.episodes << " (seed " << o.seed << ")\n";
    for (std::size_t t = 0; t < result.horizon; ++t) {
        for (std::size_t s = 0; s < mdp.n_states(); ++s) {
            if (result.state_visits[t][s] == 0) continue;
            std::cout << "t=" << mdp.instant_labels[t] << " "
                      << pecmdp::render_state(mdp.codec.decode_state(s)) << ": "
                      << significant12(result.empirical(t, s)) << "\n";
        }
    }
    if (result.has_returns)
        std::cout << "mean return: " << significant12(result.mean_return) << " (stddev "
                  << significant12(result.return_stddev) << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"PEC domain compiler and reasoning toolkit"};
    app.require_subcommand(1);

    auto* validate = app.add_subcommand("validate", "Check a .pec domain for well-formedness");
    validate->add_option("input", o.input, "domain file")->required();

    auto* compile = app.add_subcommand("compile", "Compile a domain to its JSON MDP artifact");
    compile->add_option("input", o.input, "domain file")->required();
    compile->add_option("-o,--output", o.output, "output path (stdout when omitted)");
    compile->add_option("--state-cap", o.state_cap, "maximum number of encoded states");

    auto* project = app.add_subcommand("project", "Temporal projection query");
    project->add_option("input", o.input, "domain file")->required();
    project->add_option("--query", o.query, "target, e.g. \"Lamp=on@2\"")->required();
    project->add_option("--given", o.given, "condition at an earlier instant, e.g. \"Lamp=off@0\"");
    project->add_option("--engine", o.engine, "matrix (default) or oracle");
    project->add_flag("--extrapolate", o.extrapolate,
                      "allow integer instants past the horizon (persistence)");
    project->add_option("--state-cap", o.state_cap, "maximum number of encoded states");
    project->add_flag("--json", o.json, "JSON output");

    auto* plan = app.add_subcommand("plan", "Solve for an objective-directed policy");
    plan->add_option("input", o.input, "domain file")->required();
    plan->add_option("--reward", o.reward_path, "reward specification (JSON)")->required();
    plan->add_option("-o,--output", o.output, "policy output path (stdout when omitted)");
    plan->add_option("--horizon-mode", o.horizon_mode, "finite (default) or discounted");
    plan->add_option("--epsilon", o.epsilon, "stopping tolerance for discounted mode");
    plan->add_option("--availability", o.availability,
                     "situations the optimizer may use: support (default) or instant");
    plan->add_option("--state-cap", o.state_cap, "maximum number of encoded states");

    auto* decompile = app.add_subcommand("decompile", "Translate a policy into p-propositions");
    decompile->add_option("input", o.input, "domain file")->required();
    decompile->add_option("--policy", o.policy_path, "policy file (JSON)")->required();
    decompile->add_flag("--prune", o.prune, "drop unreachable (state, instant) propositions");
    decompile->add_option("--threshold", o.threshold, "reachability threshold (default 0)");
    decompile->add_flag("--minimize", o.minimize, "minimal distinguishing conditions");
    decompile->add_flag("--check", o.check, "verify the round trip and report mismatches");
    decompile->add_option("-o,--output", o.output, "output .pec path (stdout when omitted)");
    decompile->add_option("--state-cap", o.state_cap, "maximum number of encoded states");

    auto* simulate = app.add_subcommand("simulate", "Seeded Monte-Carlo rollouts");
    simulate->add_option("input", o.input, "domain file")->required();
    simulate->add_option("--episodes", o.episodes, "number of episodes")->required();
    simulate->add_option("--seed", o.seed, "RNG seed (default 0)");
    simulate->add_option("--policy", o.policy_path, "roll out a fixed policy instead of the domain's");
    simulate->add_option("--reward", o.reward_path, "reward specification for return statistics");
    simulate->add_flag("--json", o.json, "JSON output");
    simulate->add_option("--state-cap", o.state_cap, "maximum number of encoded states");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(validate)) return cmd_validate(o);
        if (app.got_subcommand(compile)) return cmd_compile(o);
        if (app.got_subcommand(project)) return cmd_project(o);
        if (app.got_subcommand(plan)) return cmd_plan(o);
        if (app.got_subcommand(decompile)) return cmd_decompile(o);
        if (app.got_subcommand(simulate)) return cmd_simulate(o);
    } catch (const Diagnosed&) {
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const pecmdp::ValidationError& e) {
        std::cerr << o.input << ": " << e.what();
        return 1;
    } catch (const pecmdp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
