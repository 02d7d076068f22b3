#pragma once
// JSON forms of the compiled artifact, policies, and reward specifications.
// Field layouts are documented in the repository README; output is
// byte-deterministic for identical inputs.

#include <string>
#include <vector>

#include <json.hpp>

#include "pecmdp/compiler.hpp"
#include "pecmdp/planning.hpp"

namespace pecmdp {

using Json = nlohmann::ordered_json;

/// Serializes a compiled MDP. Dense transitions are nested [s][a][s'] arrays;
/// sparse transitions list explicit rows only, with absent rows denoting the
/// identity (self-loop) row.
inline Json mdp_to_json(const PecMdp& m) {
    Json j;
    j["format"] = "pec-mdp-1";

    Json fluents = Json::array();
    for (std::size_t i = 0; i < m.codec.n_fluents(); ++i) {
        Json f;
        f["name"] = m.codec.fluent_name(i);
        Json values = Json::array();
        for (std::size_t v = 0; v < m.codec.radix(i); ++v)
            values.push_back(m.codec.value_name(i, static_cast<std::int32_t>(v)));
        f["values"] = values;
        fluents.push_back(f);
    }
    j["fluents"] = fluents;

    Json actions = Json::array();
    for (std::size_t k = 0; k < m.acodec.n_actions(); ++k) actions.push_back(m.acodec.action_name(k));
    j["actions"] = actions;

    j["instants"] = m.instant_labels;
    Json imap;
    for (std::size_t t = 0; t < m.instant_labels.size(); ++t) imap[m.instant_labels[t]] = t;
    j["instant_map"] = imap;

    Json situations = Json::array();
    for (std::size_t a = 0; a < m.n_situations(); ++a) situations.push_back(m.acodec.situation_names(a));
    j["situations"] = situations;

    j["n_states"] = m.n_states();
    j["p0"] = m.p0;

    Json transitions;
    if (m.transitions.is_dense()) {
        transitions["format"] = "dense";
        Json data = Json::array();
        for (std::size_t s = 0; s < m.n_states(); ++s) {
            Json per_a = Json::array();
            for (std::size_t a = 0; a < m.n_situations(); ++a) {
                Json row = Json::array();
                for (std::size_t sp = 0; sp < m.n_states(); ++sp)
                    row.push_back(m.transitions.prob(s, a, sp));
                per_a.push_back(std::move(row));
            }
            data.push_back(std::move(per_a));
        }
        transitions["data"] = std::move(data);
    } else {
        transitions["format"] = "sparse";
        transitions["identity_default"] = true;
        Json rows = Json::array();
        for (const auto& [key, outcomes] : m.transitions.sparse_rows()) {
            Json row;
            row["state"] = key / m.n_situations();
            row["situation"] = key % m.n_situations();
            Json out = Json::array();
            for (const auto& [sp, p] : outcomes) out.push_back(Json::array({sp, p}));
            row["outcomes"] = std::move(out);
            rows.push_back(std::move(row));
        }
        transitions["rows"] = std::move(rows);
    }
    j["transitions"] = std::move(transitions);

    Json policy = Json::array();
    for (std::size_t t = 0; t < m.horizon; ++t) {
        Json per_s = Json::array();
        for (std::size_t s = 0; s < m.n_states(); ++s) {
            Json row = Json::array();
            for (std::size_t a = 0; a < m.n_situations(); ++a) row.push_back(m.mu(t, s, a));
            per_s.push_back(std::move(row));
        }
        policy.push_back(std::move(per_s));
    }
    j["policy"] = std::move(policy);
    return j;
}

/// Serializes a policy. Situations are stored as action-name arrays so the
/// file stays valid across recompiles of the same domain.
inline Json policy_to_json(const PecMdp& mdp, const PolicyTable& p,
                           const std::vector<std::vector<double>>* step_values = nullptr,
                           const std::vector<double>* state_values = nullptr) {
    Json j;
    j["format"] = "pec-policy-1";
    j["kind"] = p.kind == PolicyTable::Kind::Stationary ? "stationary" : "nonstationary";
    j["n_states"] = mdp.n_states();
    Json situations = Json::array();
    for (std::size_t a = 0; a < mdp.n_situations(); ++a)
        situations.push_back(mdp.acodec.situation_names(a));
    j["situations"] = situations;
    if (p.kind == PolicyTable::Kind::Stationary) {
        j["choice"] = p.stationary;
    } else {
        j["steps"] = p.n_steps();
        j["choice"] = p.steps;
    }
    if (step_values != nullptr) j["value"] = *step_values;
    if (state_values != nullptr) j["value"] = *state_values;
    return j;
}

inline PolicyTable policy_from_json(const PecMdp& mdp, const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.contains("choice") || !j.contains("situations"))
        throw Error("policy file is missing required fields (kind, situations, choice)");
    if (j.value("format", "pec-policy-1") != "pec-policy-1")
        throw Error("unsupported policy format '" + j.value("format", "") + "'");
    if (j.contains("n_states") && j["n_states"].get<std::size_t>() != mdp.n_states())
        throw Error("policy was produced for a different state space");

    // Remap the file's situation indices onto this compile's codec.
    std::vector<std::size_t> remap;
    for (const auto& names_json : j["situations"]) {
        std::set<std::string> names;
        for (const auto& n : names_json) names.insert(n.get<std::string>());
        const auto idx = mdp.acodec.index_of_names(names);
        if (!idx) {
            std::string text;
            for (const auto& n : names) text += (text.empty() ? "" : ", ") + n;
            throw Error("policy references unknown situation {" + text + "}");
        }
        remap.push_back(*idx);
    }
    auto remapped = [&](std::size_t file_index) {
        if (file_index >= remap.size()) throw Error("policy situation index out of range");
        return remap[file_index];
    };

    PolicyTable p;
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "stationary") {
        p.kind = PolicyTable::Kind::Stationary;
        for (const auto& a : j["choice"]) p.stationary.push_back(remapped(a.get<std::size_t>()));
        if (p.stationary.size() != mdp.n_states())
            throw Error("stationary policy must list one choice per state");
    } else if (kind == "nonstationary") {
        p.kind = PolicyTable::Kind::Nonstationary;
        for (const auto& row : j["choice"]) {
            std::vector<std::size_t> step;
            for (const auto& a : row) step.push_back(remapped(a.get<std::size_t>()));
            if (step.size() != mdp.n_states())
                throw Error("non-stationary policy step must list one choice per state");
            p.steps.push_back(std::move(step));
        }
    } else {
        throw Error("unknown policy kind '" + kind + "'");
    }
    return p;
}

inline Json reward_spec_to_json(const RewardSpec& spec) {
    Json j;
    if (spec.goal.has_value()) {
        Json goal;
        Json cond;
        for (const auto& [f, v] : spec.goal->assignments()) cond[f] = v;
        goal["condition"] = cond;
        goal["reward"] = spec.goal_reward;
        j["goal"] = goal;
    }
    if (!spec.action_costs.empty()) {
        Json costs;
        for (const auto& [a, c] : spec.action_costs) costs[a] = c;
        j["action_costs"] = costs;
    }
    j["step_penalty"] = spec.step_penalty;
    j["discount"] = spec.discount;
    return j;
}

inline RewardSpec reward_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error("reward specification must be a JSON object");
    RewardSpec spec;
    if (j.contains("goal")) {
        const auto& goal = j["goal"];
        if (!goal.is_object() || !goal.contains("condition") || !goal.contains("reward"))
            throw Error("reward goal must carry 'condition' and 'reward'");
        PartialFluentState cond;
        for (const auto& [f, v] : goal["condition"].items()) cond.set(f, v.get<std::string>());
        spec.goal = cond;
        spec.goal_reward = goal["reward"].get<double>();
    }
    if (j.contains("action_costs"))
        for (const auto& [a, c] : j["action_costs"].items())
            spec.action_costs[a] = c.get<double>();
    spec.step_penalty = j.value("step_penalty", 0.0);
    spec.discount = j.value("discount", 1.0);
    return spec;
}

}  // namespace pecmdp
