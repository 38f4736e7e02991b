// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/ports.hpp"

#include "polenv/error.hpp"

namespace polenv {

AgentAction AgentAction::say(std::string text) {
    AgentAction a;
    a.text = std::move(text);
    return a;
}

AgentAction AgentAction::call(ToolCall call) {
    AgentAction a;
    a.tool_call = std::move(call);
    return a;
}

json AgentAction::to_json() const {
    if (tool_call) return {{"tool_call", tool_call->to_json()}};
    return {{"text", text.value_or("")}};
}

AgentAction AgentAction::from_json(const json& j) {
    if (j.is_object() && j.contains("tool_call")) {
        try {
            return call(ToolCall::from_json(j["tool_call"]));
        } catch (const Error& e) {
            throw Error(ErrorCode::PortFailure, std::string("bad tool_call: ") + e.what());
        }
    }
    if (j.is_object() && j.contains("text") && j["text"].is_string()) return say(j["text"].get<std::string>());
    throw Error(ErrorCode::PortFailure, "agent action must be {\"text\": ...} or {\"tool_call\": ...}: " + j.dump());
}

// ── Scripted ────────────────────────────────────────────────────

ScriptedAgentPort::ScriptedAgentPort(const json& script) {
    const json& steps = script.is_array() ? script : script.value("actions", json::array());
    for (const auto& s : steps) actions_.push_back(AgentAction::from_json(s));
    fallback_ = script.is_object() ? script.value("fallback_text", "Is there anything else I can help with?")
                                   : "Is there anything else I can help with?";
}

AgentAction ScriptedAgentPort::next_action(const AgentView&, std::uint64_t) {
    if (cursor_ < actions_.size()) return actions_[cursor_++];
    return AgentAction::say(fallback_);
}

ScriptedUserPort::ScriptedUserPort(const json& script) {
    const json& lines = script.is_array() ? script : script.value("utterances", json::array());
    for (const auto& l : lines) utterances_.push_back(l.get<std::string>());
    const auto mode = script.is_object() ? script.value("when_exhausted", "stop") : std::string("stop");
    if (mode != "stop" && mode != "repeat") throw Error(ErrorCode::InvalidArgument, "when_exhausted: " + mode);
    repeat_ = mode == "repeat";
}

std::string ScriptedUserPort::next_utterance(const UserView& view, std::uint64_t) {
    if (cursor_ < utterances_.size()) return utterances_[cursor_++];
    if (repeat_ && !utterances_.empty()) return utterances_.back();
    return view.limits.stop_token;
}

StubGenerationPort::StubGenerationPort(const json& canned) {
    if (!canned.is_object()) throw Error(ErrorCode::InvalidArgument, "canned outputs must be an object");
    for (const auto& [stage, list] : canned.items()) {
        auto& dst = outputs_[stage];
        const json arr = list.is_array() ? list : json::array({list});
        auto push = [&dst](const json& item) {
            dst.push_back(item.is_string() ? item.get<std::string>() : item.dump());
        };
        // A nested array splices its elements in place.
        for (const auto& item : arr) {
            if (item.is_array())
                for (const auto& sub : item) push(sub);
            else
                push(item);
        }
    }
}

std::string StubGenerationPort::generate(std::string_view stage, const json&, std::uint64_t) {
    auto it = outputs_.find(stage);
    auto& cur = cursor_[std::string(stage)];
    if (it == outputs_.end() || cur >= it->second.size())
        throw Error(ErrorCode::PortFailure, "stub port has no output left for stage " + std::string(stage));
    return it->second[cur++];
}

std::size_t StubGenerationPort::calls(std::string_view stage) const {
    auto it = cursor_.find(stage);
    return it == cursor_.end() ? 0 : it->second;
}

// ── Subprocess ──────────────────────────────────────────────────

LineProtocolClient::LineProtocolClient(const std::vector<std::string>& argv, std::chrono::milliseconds timeout)
    : proc_(argv), timeout_(timeout) {}

json LineProtocolClient::exchange(const json& request) {
    std::lock_guard lock(mu_);
    proc_.write_line(request.dump());
    const auto line = proc_.read_line(timeout_);
    json response;
    try {
        response = json::parse(line);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::PortFailure, proc_.program() + ": response is not JSON: " + e.what());
    }
    if (!response.is_object() || response.value("type", "") != request.value("type", "") ||
        !response.contains("content"))
        throw Error(ErrorCode::PortFailure, proc_.program() + ": response must echo type and carry content");
    return response["content"];
}

json agent_request(const AgentView& view, std::uint64_t seed) {
    json tools = json::array();
    if (view.tools)
        for (const auto& t : *view.tools) tools.push_back(t.to_json());
    return {{"type", "agent_turn"},
            {"history", view.history ? *view.history : json::array()},
            {"limits", view.limits.to_json()},
            {"seed", seed},
            {"context", {{"policy", view.policy_doc}, {"tools", tools}}}};
}

json user_request(const UserView& view, std::uint64_t seed) {
    return {{"type", "user_turn"},
            {"history", view.history ? *view.history : json::array()},
            {"limits", view.limits.to_json()},
            {"seed", seed},
            {"context", {{"task", view.task_description}}}};
}

SubprocessAgentPort::SubprocessAgentPort(const std::vector<std::string>& argv, std::chrono::milliseconds timeout)
    : client_(argv, timeout) {}

AgentAction SubprocessAgentPort::next_action(const AgentView& view, std::uint64_t seed) {
    return AgentAction::from_json(client_.exchange(agent_request(view, seed)));
}

SubprocessUserPort::SubprocessUserPort(const std::vector<std::string>& argv, std::chrono::milliseconds timeout)
    : client_(argv, timeout) {}

std::string SubprocessUserPort::next_utterance(const UserView& view, std::uint64_t seed) {
    auto content = client_.exchange(user_request(view, seed));
    if (content.is_string()) return content.get<std::string>();
    if (content.is_object() && content.contains("text") && content["text"].is_string())
        return content["text"].get<std::string>();
    throw Error(ErrorCode::PortFailure, "user content must be a string");
}

SubprocessGenerationPort::SubprocessGenerationPort(const std::vector<std::string>& argv,
                                                   std::chrono::milliseconds timeout)
    : client_(argv, timeout) {}

std::string SubprocessGenerationPort::generate(std::string_view stage, const json& context, std::uint64_t seed) {
    auto content = client_.exchange({{"type", "generate"}, {"stage", stage}, {"context", context}, {"seed", seed}});
    if (content.is_string()) return content.get<std::string>();
    return content.dump();
}

} // namespace polenv
