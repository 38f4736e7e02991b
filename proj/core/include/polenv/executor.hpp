// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polenv/database.hpp"
#include "polenv/package.hpp"
#include "polenv/snapshot.hpp"
#include "polenv/value.hpp"

namespace polenv {

inline constexpr std::string_view kUnclassified = "UNCLASSIFIED";

struct ToolCall {
    std::string tool_name;
    json arguments = json::object();

    json to_json() const;
    static ToolCall from_json(const json& j);
    bool operator==(const ToolCall&) const = default;
};

struct ErrorPayload {
    std::string code;
    std::string message;
    std::string violated_rule;
    std::string hint;

    json to_json() const;
    static ErrorPayload from_json(const json& j);
    bool operator==(const ErrorPayload&) const = default;
};

struct ToolResult {
    bool success = true;
    std::vector<json> rows;  // one object per row, column -> value
    std::int64_t affected = 0;
    std::optional<ErrorPayload> error;
    std::string state_digest;
    std::optional<std::int64_t> inserted_id;

    json to_json() const;
    static ToolResult from_json(const json& j);
    bool operator==(const ToolResult&) const = default;
};

/// Total: "[CODE] rest" yields code/violated_rule, anything else UNCLASSIFIED.
ErrorPayload parse_engine_error(std::string_view raw, const std::map<std::string, std::string>& registry);

/// A live, single-writer environment over a private copy of the origin.
class Environment {
public:
    /// Installs the bundle's triggers on a copy of `origin` and compiles
    /// every trigger program. Throws Error(CompileFailure).
    Environment(EnvironmentBundle bundle, Snapshot origin);

    /// Runs one tool call in its own transaction. Engine aborts come back as
    /// error results; tool-layer problems throw UnknownTool,
    /// MalformedArguments or ReadOnlyTable.
    ToolResult execute(const ToolCall& call);

    /// Like execute(), but tool-layer rejections also come back as error
    /// results (code UNCLASSIFIED). Used by rollouts, where the agent's
    /// mistakes are observations rather than faults.
    ToolResult try_execute(const ToolCall& call);

    /// Writes that bypass table permissions but still fire every trigger.
    /// Used to seed states through the same enforcement agents face.
    ToolResult seed_write(const ToolCall& call);

    Snapshot snapshot() const;
    std::string state_digest() const;
    void reset();
    void close() noexcept;

    bool closed() const noexcept { return closed_; }
    std::int64_t turn_counter() const noexcept { return turn_counter_; }
    const EnvironmentBundle& bundle() const noexcept { return bundle_; }
    const SchemaInfo& schema() const noexcept { return schema_; }
    const Snapshot& origin() const noexcept { return origin_; }

private:
    void load_working();
    void require_open() const;
    ToolResult dispatch(const ToolCall& call, bool enforce_permissions);
    ToolResult run_query(const TableInfo& table, const json& args);
    ToolResult run_insert(const TableInfo& table, const json& args);
    ToolResult run_update(const TableInfo& table, const json& args);
    ToolResult run_write(const std::string& sql, const std::vector<Value>& params, bool capture_id);
    ToolResult failure(const EngineFailure& f);

    EnvironmentBundle bundle_;
    Snapshot origin_;
    SchemaInfo schema_;
    Database db_;
    std::int64_t turn_counter_ = 0;
    bool closed_ = false;
};

Environment open_environment(const TaskPackage& pkg);

} // namespace polenv
