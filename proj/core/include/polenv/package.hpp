// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "polenv/snapshot.hpp"
#include "polenv/value.hpp"

namespace polenv {

enum class Permission { ReadOnly, ReadWrite };
enum class ToolKind { Insert, Query, Update, Escalation };
enum class FkMode { Drop, CanonicalRemap };

std::string_view to_string(Permission p) noexcept;
std::string_view to_string(ToolKind k) noexcept;
std::string_view to_string(FkMode m) noexcept;

inline constexpr std::string_view kEscalationTool = "transfer_to_human_agents";
inline constexpr std::string_view kEscalationTable = "escalations";
inline constexpr std::string_view kEscalationDdl =
    "CREATE TABLE escalations (\n"
    "    id INTEGER PRIMARY KEY AUTOINCREMENT,\n"
    "    summary TEXT NOT NULL\n"
    ");\n";

struct ToolSpec {
    std::string name;
    ToolKind kind = ToolKind::Query;
    std::optional<std::string> table;
    json parameter_schema;  // JSON-Schema object presented to agents
    std::string description;
    std::vector<std::string> preconditions;  // from BEFORE triggers
    std::vector<std::string> side_effects;   // from AFTER triggers

    json to_json() const;
    static ToolSpec from_json(const json& j);
};

struct EnvironmentBundle {
    std::string schema_sql;
    std::string triggers_sql;
    std::map<std::string, Permission> permissions;
    std::vector<ToolSpec> tool_catalog;
    std::map<std::string, std::string> error_registry;  // code -> hint

    const ToolSpec* find_tool(std::string_view name) const;
};

struct FloatCompare {
    std::optional<int> decimal_places;  // nullopt: exact
};

struct DiffConfig {
    std::map<std::string, std::set<std::string>> excluded_columns;
    FkMode fk_mode = FkMode::Drop;
    double epsilon = 1e-9;
    double lambda_err = 0.1;
    FloatCompare float_compare;

    bool excluded(std::string_view table, std::string_view column) const;
    json to_json() const;
    static DiffConfig from_json(const json& j);
};

struct RolloutLimits {
    int max_turns = 50;
    std::string stop_token = "###STOP###";

    json to_json() const;
    static RolloutLimits from_json(const json& j);
};

struct TaskPackage {
    std::string name;
    std::string domain;
    std::string policy_doc;
    std::string task_description;
    EnvironmentBundle env;
    Snapshot origin_snapshot;
    Snapshot target_snapshot;
    DiffConfig diff_config;
    RolloutLimits limits;
    std::vector<std::string> redaction_list;

    // Derived at validation time.
    std::int64_t delta0 = 0;   // DIFF(origin, target)
    bool trivial = false;      // delta0 == 0
    std::vector<std::string> warnings;
};

/// Schema DDL with the escalation log table appended when absent.
std::string effective_schema_sql(std::string_view schema_sql);

/// Compiles schema then triggers on a scratch engine, forcing every trigger
/// program to be prepared. Throws Error(CompileFailure) with the engine text.
SchemaInfo compile_environment(std::string_view schema_sql, std::string_view triggers_sql);

/// Prepares one INSERT, DELETE and per-column UPDATE against every table so
/// that each trigger program is compiled. Throws Error(CompileFailure).
void check_trigger_programs(Database& db);

/// Preconditions / side effects per table and write kind, extracted mechanically
/// from trigger DDL.
struct TriggerAnnotations {
    std::map<std::string, std::vector<std::string>> insert_preconditions;
    std::map<std::string, std::vector<std::string>> insert_side_effects;
    std::map<std::string, std::vector<std::string>> update_preconditions;
    std::map<std::string, std::vector<std::string>> update_side_effects;
};

TriggerAnnotations extract_trigger_annotations(std::string_view triggers_sql);

/// One insert/query/update tool per read_write table, one query tool per
/// read_only table (tables without a permission entry count as read_only),
/// then the escalation tool. The escalation log table itself gets no tools.
std::vector<ToolSpec> derive_tools(std::string_view schema_sql,
                                   const std::map<std::string, Permission>& permissions,
                                   const TriggerAnnotations& annotations);

/// Returns the first forbidden token found in `task_description`
/// (case-insensitive substring), or nullopt when the text is clean.
std::optional<std::string> find_spoiler(std::string_view task_description,
                                        const std::vector<ToolSpec>& tool_catalog,
                                        const std::vector<std::string>& redaction_list);

/// Throws Error(SchemaMismatch) naming the first table that is missing,
/// lacks a column, or declares an incompatible type.
void check_conformance(const SchemaInfo& schema, const Snapshot& snapshot);

/// Full validation of an in-memory package; fills delta0/trivial/warnings
/// and regenerates the tool catalog.
void validate_package(TaskPackage& pkg);

TaskPackage load_package(const std::filesystem::path& dir);
void save_package(const TaskPackage& pkg, const std::filesystem::path& dir);

json manifest_json(const TaskPackage& pkg);
json tools_json(const std::vector<ToolSpec>& tools);

} // namespace polenv
