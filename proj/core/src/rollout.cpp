// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/rollout.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "polenv/error.hpp"
#include "polenv/verifier.hpp"

namespace polenv {

std::string_view to_string(Role r) noexcept {
    switch (r) {
    case Role::User: return "user";
    case Role::AgentText: return "agent_text";
    case Role::AgentTool: return "agent_tool";
    case Role::ToolResult: return "tool_result";
    }
    return "user";
}

std::string_view to_string(Termination t) noexcept {
    switch (t) {
    case Termination::StopSignal: return "stop_signal";
    case Termination::Deviation: return "deviation";
    case Termination::BudgetExhausted: return "budget_exhausted";
    }
    return "deviation";
}

Role role_from_string(std::string_view s) {
    for (auto r : {Role::User, Role::AgentText, Role::AgentTool, Role::ToolResult})
        if (to_string(r) == s) return r;
    throw Error(ErrorCode::InvalidArgument, "unknown role: " + std::string(s));
}

Termination termination_from_string(std::string_view s) {
    for (auto t : {Termination::StopSignal, Termination::Deviation, Termination::BudgetExhausted})
        if (to_string(t) == s) return t;
    throw Error(ErrorCode::InvalidArgument, "unknown termination: " + std::string(s));
}

json Turn::to_json() const {
    return {{"index", index},
            {"role", std::string(polenv::to_string(role))},
            {"payload", payload},
            {"state_digest", state_digest},
            {"proximity", proximity ? json(*proximity) : json(nullptr)},
            {"reward", reward ? json(*reward) : json(nullptr)},
            {"mask_in_loss", mask_in_loss}};
}

Turn Turn::from_json(const json& j) {
    Turn t;
    t.index = j.at("index").get<std::int64_t>();
    t.role = role_from_string(j.at("role").get<std::string>());
    t.payload = j.at("payload");
    t.state_digest = j.at("state_digest").get<std::string>();
    if (!j.at("proximity").is_null()) t.proximity = j["proximity"].get<double>();
    if (!j.at("reward").is_null()) t.reward = j["reward"].get<double>();
    t.mask_in_loss = j.at("mask_in_loss").get<bool>();
    return t;
}

std::optional<std::size_t> Trajectory::result_of(std::size_t i) const {
    if (i + 1 < turns.size() && turns[i].role == Role::AgentTool && turns[i + 1].role == Role::ToolResult)
        return i + 1;
    return std::nullopt;
}

bool Trajectory::is_violation(std::size_t i) const {
    auto r = result_of(i);
    return r && turns[*r].payload.value("status", "") != "success";
}

json Trajectory::header_json() const {
    return {{"type", "header"},
            {"id", id},
            {"package_id", package_id},
            {"seed", seed},
            {"termination", std::string(to_string(termination))},
            {"final_diff", final_diff},
            {"r_final", r_final},
            {"sum_dense", sum_dense},
            {"initial_proximity", initial_proximity},
            {"delta0", delta0},
            {"lambda_err", lambda_err},
            {"epsilon", epsilon},
            {"port_failure", port_failure},
            {"note", note},
            {"turn_count", turns.size()}};
}

bool detect_stop(std::string_view utterance, std::string_view stop_token) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto b = utterance.find_first_not_of(ws);
    if (b == std::string_view::npos) return false;
    const auto e = utterance.find_last_not_of(ws);
    return !stop_token.empty() && utterance.substr(b, e - b + 1) == stop_token;
}

namespace {

class Scorer {
public:
    Scorer(const TaskPackage& pkg, double eps)
        : cfg_(pkg.diff_config), target_(canonicalize(pkg.target_snapshot, cfg_)), eps_(eps) {
        delta0_ = distance(pkg.origin_snapshot);
    }
    std::int64_t distance(const Snapshot& s) const { return diff(canonicalize(s, cfg_), target_).total; }
    double proximity_of(std::int64_t d) const { return proximity(d, delta0_, eps_); }
    std::int64_t delta0() const { return delta0_; }

private:
    DiffConfig cfg_;
    CanonicalRelationSet target_;
    double eps_;
    std::int64_t delta0_ = 0;
};

json history_entry(const Turn& t) { return {{"role", std::string(to_string(t.role))}, {"content", t.payload}}; }

void finish(Trajectory& t, const Scorer& scorer, const Snapshot& final_state) {
    t.final_diff = scorer.distance(final_state);
    t.r_final = t.final_diff == 0 ? 1 : 0;
    t.sum_dense = 0.0;
    for (const auto& turn : t.turns)
        if (turn.reward) t.sum_dense += *turn.reward;
}

} // namespace

Trajectory run_episode(const TaskPackage& pkg, AgentPort& agent, UserPort& user, const RolloutOptions& opts) {
    Trajectory t;
    t.package_id = pkg.name;
    t.seed = opts.seed;
    t.id = pkg.name + "-" + std::to_string(opts.seed);
    t.lambda_err = opts.lambda_err.value_or(pkg.diff_config.lambda_err);
    t.epsilon = opts.epsilon.value_or(pkg.diff_config.epsilon);
    if (!(t.lambda_err > 0) || !(t.epsilon > 0))
        throw Error(ErrorCode::InvalidArgument, "lambda_err and epsilon must be > 0");

    Scorer scorer(pkg, t.epsilon);
    t.delta0 = scorer.delta0();
    t.initial_proximity = scorer.proximity_of(t.delta0);

    auto env = open_environment(pkg);
    json agent_history = json::array();
    json user_history = json::array();
    double p_prev = t.initial_proximity;

    auto push = [&](Role role, json payload, const std::string& digest) -> Turn& {
        Turn turn;
        turn.index = static_cast<std::int64_t>(t.turns.size());
        turn.role = role;
        turn.payload = std::move(payload);
        turn.state_digest = digest;
        turn.mask_in_loss = role == Role::User || role == Role::ToolResult;
        agent_history.push_back(history_entry(turn));
        if (role == Role::User || role == Role::AgentText) user_history.push_back(history_entry(turn));
        t.turns.push_back(std::move(turn));
        return t.turns.back();
    };
    auto port_failed = [&](const char* who, const std::exception& e) {
        t.termination = Termination::Deviation;
        t.port_failure = true;
        t.note = std::string("PortFailure (") + who + "): " + e.what();
    };

    int user_turns = 0;
    bool done = false;
    while (!done) {
        if (user_turns >= pkg.limits.max_turns) {
            t.termination = Termination::BudgetExhausted;
            t.note = "max_turns reached";
            break;
        }
        std::string utterance;
        try {
            utterance = user.next_utterance(UserView{pkg.task_description, &user_history, pkg.limits}, opts.seed);
        } catch (const std::exception& e) {
            port_failed("user", e);
            break;
        }
        ++user_turns;
        push(Role::User, {{"text", utterance}}, env.state_digest());
        if (detect_stop(utterance, pkg.limits.stop_token)) {
            t.termination = Termination::StopSignal;
            break;
        }
        if (opts.verdict && opts.verdict->irrecoverable(t)) {
            t.termination = Termination::Deviation;
            t.note = "deviation verdict";
            break;
        }

        for (int step = 0;; ++step) {
            if (step >= opts.max_agent_steps_per_turn) {
                t.termination = Termination::BudgetExhausted;
                t.note = "agent exceeded " + std::to_string(opts.max_agent_steps_per_turn) + " steps in one turn";
                done = true;
                break;
            }
            AgentAction action;
            try {
                action = agent.next_action(
                    AgentView{pkg.policy_doc, &pkg.env.tool_catalog, &agent_history, pkg.limits}, opts.seed);
            } catch (const std::exception& e) {
                port_failed("agent", e);
                done = true;
                break;
            }
            if (!action.tool_call) {
                push(Role::AgentText, {{"text", action.text.value_or("")}}, env.state_digest());
                break;
            }
            const auto result = env.try_execute(*action.tool_call);
            const std::size_t tool_index = t.turns.size();
            push(Role::AgentTool, action.tool_call->to_json(), result.state_digest);
            push(Role::ToolResult, result.to_json(), result.state_digest);

            const double p = result.success ? scorer.proximity_of(scorer.distance(env.snapshot())) : p_prev;
            t.turns[tool_index].proximity = p;
            t.turns[tool_index].reward = dense_reward(p, p_prev, !result.success, t.lambda_err);
            p_prev = p;
        }
    }

    finish(t, scorer, env.snapshot());
    return t;
}

std::string trajectory_ndjson(const Trajectory& t) {
    std::string out = t.header_json().dump();
    out.push_back('\n');
    for (const auto& turn : t.turns) {
        out += turn.to_json().dump();
        out.push_back('\n');
    }
    return out;
}

Trajectory parse_trajectory_ndjson(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    Trajectory t;
    bool header = false;
    std::size_t line_no = 0;
    try {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            const auto j = json::parse(line);
            if (!header) {
                if (j.value("type", "") != "header") throw Error(ErrorCode::InvalidArgument, "missing header record");
                t.id = j.at("id").get<std::string>();
                t.package_id = j.at("package_id").get<std::string>();
                t.seed = j.at("seed").get<std::uint64_t>();
                t.termination = termination_from_string(j.at("termination").get<std::string>());
                t.final_diff = j.at("final_diff").get<std::int64_t>();
                t.r_final = j.at("r_final").get<int>();
                t.sum_dense = j.at("sum_dense").get<double>();
                t.initial_proximity = j.at("initial_proximity").get<double>();
                t.delta0 = j.at("delta0").get<std::int64_t>();
                t.lambda_err = j.at("lambda_err").get<double>();
                t.epsilon = j.at("epsilon").get<double>();
                t.port_failure = j.at("port_failure").get<bool>();
                t.note = j.at("note").get<std::string>();
                header = true;
                continue;
            }
            t.turns.push_back(Turn::from_json(j));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument,
                    "trajectory line " + std::to_string(line_no) + ": " + std::string(e.what()));
    }
    if (!header) throw Error(ErrorCode::InvalidArgument, "trajectory has no header record");
    return t;
}

void export_trajectory(const Trajectory& t, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    const auto text = trajectory_ndjson(t);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

Trajectory import_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_trajectory_ndjson(text);
}

Trajectory rescore_trajectory(const Trajectory& t, const TaskPackage& pkg) {
    if (t.package_id != pkg.name)
        throw Error(ErrorCode::MixedPackages, "trajectory " + t.id + " belongs to " + t.package_id);
    Trajectory out = t;
    Scorer scorer(pkg, t.epsilon);
    out.delta0 = scorer.delta0();
    out.initial_proximity = scorer.proximity_of(out.delta0);

    auto env = open_environment(pkg);
    auto mismatch = [&](std::size_t i) {
        throw Error(ErrorCode::DigestMismatch, t.id + ": turn " + std::to_string(i) + " does not replay");
    };
    double p_prev = out.initial_proximity;
    for (std::size_t i = 0; i < out.turns.size(); ++i) {
        auto& turn = out.turns[i];
        if (turn.role != Role::AgentTool) {
            if (turn.role != Role::ToolResult && turn.state_digest != env.state_digest()) mismatch(i);
            continue;
        }
        const auto call = ToolCall::from_json(turn.payload);
        const auto result = env.try_execute(call);
        if (result.state_digest != turn.state_digest) mismatch(i);
        if (auto r = t.result_of(i); r && t.turns[*r].state_digest != result.state_digest) mismatch(*r);
        const double p = result.success ? scorer.proximity_of(scorer.distance(env.snapshot())) : p_prev;
        turn.proximity = p;
        turn.reward = dense_reward(p, p_prev, !result.success, t.lambda_err);
        p_prev = p;
    }
    finish(out, scorer, env.snapshot());
    return out;
}

} // namespace polenv
