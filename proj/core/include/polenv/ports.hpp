// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polenv/executor.hpp"
#include "polenv/package.hpp"
#include "polenv/subprocess.hpp"
#include "polenv/value.hpp"

namespace polenv {

/// What an agent does next: speak to the user, or call one tool.
struct AgentAction {
    std::optional<std::string> text;
    std::optional<ToolCall> tool_call;

    static AgentAction say(std::string text);
    static AgentAction call(ToolCall call);
    json to_json() const;
    /// Accepts {"text": ...} or {"tool_call": {"name", "arguments"}}.
    static AgentAction from_json(const json& j);
};

struct AgentView {
    std::string_view policy_doc;
    const std::vector<ToolSpec>* tools = nullptr;
    const json* history = nullptr;  // every turn so far, role-tagged
    RolloutLimits limits;
};

struct UserView {
    std::string_view task_description;
    const json* history = nullptr;  // user and agent_text turns only
    RolloutLimits limits;
};

class AgentPort {
public:
    virtual ~AgentPort() = default;
    virtual AgentAction next_action(const AgentView& view, std::uint64_t seed) = 0;
    virtual bool deterministic() const { return true; }
};

class UserPort {
public:
    virtual ~UserPort() = default;
    virtual std::string next_utterance(const UserView& view, std::uint64_t seed) = 0;
    virtual bool deterministic() const { return true; }
};

/// Text generation for synthesis stages.
class GenerationPort {
public:
    virtual ~GenerationPort() = default;
    virtual std::string generate(std::string_view stage, const json& context, std::uint64_t seed) = 0;
    virtual bool deterministic() const { return true; }
};

// ── Scripted ports ──────────────────────────────────────────────

/// Replays {"actions": [...], "fallback_text": "..."} (or a bare array).
/// Once the script is spent it keeps answering with the fallback text.
class ScriptedAgentPort final : public AgentPort {
public:
    explicit ScriptedAgentPort(const json& script);
    AgentAction next_action(const AgentView& view, std::uint64_t seed) override;

private:
    std::vector<AgentAction> actions_;
    std::string fallback_;
    std::size_t cursor_ = 0;
};

/// Replays {"utterances": [...], "when_exhausted": "stop" | "repeat"}.
/// "stop" (default) emits the stop token afterwards; "repeat" repeats the
/// last utterance forever.
class ScriptedUserPort final : public UserPort {
public:
    explicit ScriptedUserPort(const json& script);
    std::string next_utterance(const UserView& view, std::uint64_t seed) override;

private:
    std::vector<std::string> utterances_;
    bool repeat_ = false;
    std::size_t cursor_ = 0;
};

/// Canned outputs per stage: {"stage": ["first", "second", ...]}.
/// Non-string entries are serialized compactly. Throws PortFailure once a
/// stage is exhausted.
class StubGenerationPort final : public GenerationPort {
public:
    explicit StubGenerationPort(const json& canned);
    std::string generate(std::string_view stage, const json& context, std::uint64_t seed) override;
    std::size_t calls(std::string_view stage) const;

private:
    std::map<std::string, std::vector<std::string>, std::less<>> outputs_;
    std::map<std::string, std::size_t, std::less<>> cursor_;
};

// ── Subprocess ports ────────────────────────────────────────────

/// One request/response exchange per line:
///   {"type": ..., "history", "limits", "seed", "context"} -> {"type", "content"}
class LineProtocolClient {
public:
    LineProtocolClient(const std::vector<std::string>& argv, std::chrono::milliseconds timeout);
    json exchange(const json& request);

private:
    Subprocess proc_;
    std::chrono::milliseconds timeout_;
    std::mutex mu_;
};

class SubprocessAgentPort final : public AgentPort {
public:
    SubprocessAgentPort(const std::vector<std::string>& argv, std::chrono::milliseconds timeout);
    AgentAction next_action(const AgentView& view, std::uint64_t seed) override;
    bool deterministic() const override { return false; }

private:
    LineProtocolClient client_;
};

class SubprocessUserPort final : public UserPort {
public:
    SubprocessUserPort(const std::vector<std::string>& argv, std::chrono::milliseconds timeout);
    std::string next_utterance(const UserView& view, std::uint64_t seed) override;
    bool deterministic() const override { return false; }

private:
    LineProtocolClient client_;
};

class SubprocessGenerationPort final : public GenerationPort {
public:
    SubprocessGenerationPort(const std::vector<std::string>& argv, std::chrono::milliseconds timeout);
    std::string generate(std::string_view stage, const json& context, std::uint64_t seed) override;
    bool deterministic() const override { return false; }

private:
    LineProtocolClient client_;
};

/// Request records as sent over the line protocol.
json agent_request(const AgentView& view, std::uint64_t seed);
json user_request(const UserView& view, std::uint64_t seed);

} // namespace polenv
