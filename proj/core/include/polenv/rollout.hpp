// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polenv/executor.hpp"
#include "polenv/package.hpp"
#include "polenv/ports.hpp"
#include "polenv/value.hpp"

namespace polenv {

enum class Role { User, AgentText, AgentTool, ToolResult };
enum class Termination { StopSignal, Deviation, BudgetExhausted };

std::string_view to_string(Role r) noexcept;
std::string_view to_string(Termination t) noexcept;
Role role_from_string(std::string_view s);
Termination termination_from_string(std::string_view s);

/// Payload by role: user / agent_text {"text"}, agent_tool {"name",
/// "arguments"}, tool_result the full ToolResult record.
struct Turn {
    std::int64_t index = 0;
    Role role = Role::User;
    json payload;
    std::string state_digest;  // state after this turn
    std::optional<double> proximity;  // agent_tool turns only
    std::optional<double> reward;     // agent_tool turns only
    bool mask_in_loss = true;

    json to_json() const;
    static Turn from_json(const json& j);
    bool operator==(const Turn&) const = default;
};

struct Trajectory {
    std::string id;
    std::string package_id;
    std::uint64_t seed = 0;
    std::vector<Turn> turns;
    Termination termination = Termination::BudgetExhausted;
    std::int64_t final_diff = 0;
    int r_final = 0;
    double sum_dense = 0.0;
    double initial_proximity = 0.0;
    std::int64_t delta0 = 0;
    double lambda_err = 0.1;
    double epsilon = 1e-9;
    bool port_failure = false;
    std::string note;

    /// Index of the tool_result turn answering agent_tool turn `i`, if any.
    std::optional<std::size_t> result_of(std::size_t i) const;
    /// True when the agent_tool turn at `i` was answered with an error.
    bool is_violation(std::size_t i) const;

    json header_json() const;
    bool operator==(const Trajectory&) const = default;
};

/// Exact match after trimming surrounding whitespace.
bool detect_stop(std::string_view utterance, std::string_view stop_token);

/// Pluggable "irrecoverable deviation" verdict, consulted after each user
/// utterance. The default never fires.
class DeviationVerdict {
public:
    virtual ~DeviationVerdict() = default;
    virtual bool irrecoverable(const Trajectory& so_far) = 0;
};

struct RolloutOptions {
    std::uint64_t seed = 0;
    int max_agent_steps_per_turn = 64;
    std::optional<double> lambda_err;  // overrides the package value
    std::optional<double> epsilon;
    DeviationVerdict* verdict = nullptr;
};

/// Port failures do not throw: the partial trajectory comes back with
/// termination deviation, port_failure set and the cause in `note`.
Trajectory run_episode(const TaskPackage& pkg, AgentPort& agent, UserPort& user, const RolloutOptions& opts = {});

std::string trajectory_ndjson(const Trajectory& t);
Trajectory parse_trajectory_ndjson(std::string_view text);
void export_trajectory(const Trajectory& t, const std::filesystem::path& path);
Trajectory import_trajectory(const std::filesystem::path& path);

/// Replays the recorded tool calls from the origin, checks every recorded
/// digest (Error(DigestMismatch) on divergence) and recomputes proximity,
/// rewards and final fields with the trajectory's lambda/epsilon.
Trajectory rescore_trajectory(const Trajectory& t, const TaskPackage& pkg);

} // namespace polenv
