// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/executor.hpp"

#include <cmath>
#include <regex>

#include "polenv/error.hpp"

namespace polenv {

// ── Serialization ───────────────────────────────────────────────

json ToolCall::to_json() const { return {{"name", tool_name}, {"arguments", arguments}}; }

ToolCall ToolCall::from_json(const json& j) {
    if (!j.is_object() || !j.contains("name") || !j["name"].is_string())
        throw Error(ErrorCode::MalformedArguments, "tool call needs a string \"name\"");
    ToolCall c;
    c.tool_name = j["name"].get<std::string>();
    c.arguments = j.value("arguments", json::object());
    return c;
}

json ErrorPayload::to_json() const {
    return {{"code", code}, {"message", message}, {"violated_rule", violated_rule}, {"hint", hint}};
}

ErrorPayload ErrorPayload::from_json(const json& j) {
    return {j.value("code", ""), j.value("message", ""), j.value("violated_rule", ""), j.value("hint", "")};
}

json ToolResult::to_json() const {
    json j;
    j["status"] = success ? "success" : "error";
    j["rows"] = rows;
    j["affected"] = affected;
    j["error"] = error ? error->to_json() : json(nullptr);
    j["state_digest"] = state_digest;
    if (inserted_id) j["inserted_id"] = *inserted_id;
    return j;
}

ToolResult ToolResult::from_json(const json& j) {
    ToolResult r;
    r.success = j.value("status", "") == "success";
    if (j.contains("rows"))
        for (const auto& row : j["rows"]) r.rows.push_back(row);
    r.affected = j.value("affected", std::int64_t{0});
    if (j.contains("error") && !j["error"].is_null()) r.error = ErrorPayload::from_json(j["error"]);
    r.state_digest = j.value("state_digest", "");
    if (j.contains("inserted_id")) r.inserted_id = j["inserted_id"].get<std::int64_t>();
    return r;
}

ErrorPayload parse_engine_error(std::string_view raw, const std::map<std::string, std::string>& registry) {
    static const std::regex pattern(R"(^\[([A-Za-z0-9_]+)\]\s*([\s\S]*)$)");
    ErrorPayload out;
    out.message = std::string(raw);
    std::smatch m;
    if (std::regex_match(out.message, m, pattern)) {
        out.code = m[1].str();
        out.violated_rule = m[2].str();
        if (auto it = registry.find(out.code); it != registry.end()) out.hint = it->second;
        return out;
    }
    out.code = std::string(kUnclassified);
    return out;
}

// ── Argument validation ─────────────────────────────────────────

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedArguments, what); }

Value typed_value(const TableInfo& table, const ColumnInfo& col, const json& v) {
    const auto where = table.name + "." + col.name;
    if (v.is_null()) return std::monostate{};
    if (v.is_array()) malformed(where + ": expected a scalar value");
    if (v.is_object()) {
        if (col.affinity == Affinity::Blob && v.size() == 1 && v.contains("$blob")) return value_from_json(v);
        malformed(where + ": expected a scalar value");
    }
    switch (col.affinity) {
    case Affinity::Integer:
        if (v.is_boolean() || v.is_number_integer()) return value_from_json(v);
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (std::isfinite(d) && d == std::trunc(d)) return static_cast<std::int64_t>(d);
        }
        malformed(where + ": expected an integer");
    case Affinity::Real:
    case Affinity::Numeric:
        if (v.is_boolean() || v.is_number()) return value_from_json(v);
        malformed(where + ": expected a number");
    case Affinity::Text:
        if (v.is_string()) return value_from_json(v);
        malformed(where + ": expected a string");
    case Affinity::Blob:
        break;
    }
    return value_from_json(v);
}

const ColumnInfo& column_of(const TableInfo& table, const std::string& name) {
    const auto* c = table.find_column(name);
    if (!c) malformed("unknown column " + table.name + "." + name);
    return *c;
}

const json& object_field(const json& args, const char* key, bool required) {
    static const json empty = json::object();
    if (!args.contains(key)) {
        if (required) malformed(std::string("missing \"") + key + "\"");
        return empty;
    }
    const auto& f = args[key];
    if (!f.is_object()) malformed(std::string("\"") + key + "\" must be an object");
    return f;
}

json row_object(const Statement& stmt) {
    json row = json::object();
    for (int i = 0; i < stmt.column_count(); ++i) row[stmt.column_name(i)] = to_json(stmt.column(i));
    return row;
}

} // namespace

// ── Environment ─────────────────────────────────────────────────

Environment::Environment(EnvironmentBundle bundle, Snapshot origin)
    : bundle_(std::move(bundle)), origin_(std::move(origin)) {
    if (origin_.empty()) throw Error(ErrorCode::InvalidArgument, "environment needs an origin snapshot");
    load_working();
    try {
        check_trigger_programs(db_);
    } catch (...) {
        db_ = Database{};
        closed_ = true;
        throw;
    }
    schema_ = read_schema(db_);
}

void Environment::load_working() {
    db_ = origin_.open();
    // Images may carry stale trigger definitions; the bundle is authoritative.
    std::vector<std::string> stale;
    {
        auto stmt = db_.prepare("SELECT name FROM sqlite_master WHERE type = 'trigger' ORDER BY name");
        while (stmt.step()) stale.push_back(std::get<std::string>(stmt.column(0)));
    }
    for (const auto& t : stale) db_.exec("DROP TRIGGER " + quote_identifier(t));
    {
        auto stmt = db_.prepare("SELECT 1 FROM sqlite_master WHERE type = 'table' AND name = ?");
        stmt.bind(1, std::string(kEscalationTable));
        if (!stmt.step()) db_.exec(kEscalationDdl);
    }
    if (auto f = db_.try_exec(bundle_.triggers_sql))
        throw Error(ErrorCode::CompileFailure, "triggers: " + f->message);
}

void Environment::require_open() const {
    if (closed_) throw Error(ErrorCode::EnvironmentClosed, "environment is closed");
}

Snapshot Environment::snapshot() const {
    require_open();
    return Snapshot::capture(db_);
}

std::string Environment::state_digest() const {
    require_open();
    return polenv::state_digest(db_);
}

void Environment::reset() {
    require_open();
    load_working();
    turn_counter_ = 0;
}

void Environment::close() noexcept {
    db_ = Database{};
    closed_ = true;
}

ToolResult Environment::execute(const ToolCall& call) {
    require_open();
    ++turn_counter_;
    return dispatch(call, true);
}

ToolResult Environment::try_execute(const ToolCall& call) {
    require_open();
    ++turn_counter_;
    try {
        return dispatch(call, true);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::UnknownTool && e.code() != ErrorCode::MalformedArguments &&
            e.code() != ErrorCode::ReadOnlyTable)
            throw;
        ToolResult r;
        r.success = false;
        r.error = ErrorPayload{std::string(kUnclassified), std::string(to_string(e.code())) + ": " + e.what(),
                               "", "Call only catalog tools with arguments matching their parameter schema."};
        r.state_digest = polenv::state_digest(db_);
        return r;
    }
}

ToolResult Environment::seed_write(const ToolCall& call) {
    require_open();
    return dispatch(call, false);
}

ToolResult Environment::dispatch(const ToolCall& call, bool enforce_permissions) {
    if (!call.arguments.is_object()) malformed("arguments must be an object");

    const auto& name = call.tool_name;
    const ToolSpec* spec = bundle_.find_tool(name);
    std::string table;
    ToolKind kind = ToolKind::Query;
    if (spec) {
        kind = spec->kind;
        table = spec->table.value_or("");
    } else {
        auto split = [&](std::string_view prefix, ToolKind k) {
            if (name.rfind(prefix, 0) != 0) return false;
            table = name.substr(prefix.size());
            kind = k;
            return true;
        };
        const bool write = split("insert_", ToolKind::Insert) || split("update_", ToolKind::Update);
        if (!write && !split("query_", ToolKind::Query)) throw Error(ErrorCode::UnknownTool, name);
        auto perm = bundle_.permissions.find(table);
        const bool read_only = perm == bundle_.permissions.end() || perm->second == Permission::ReadOnly;
        const bool known = schema_.count(table) && table != kEscalationTable;
        if (!known) throw Error(ErrorCode::UnknownTool, name);
        // Seeding reaches every table the schema defines; agents only see the catalog.
        if (enforce_permissions) {
            if (write && read_only) throw Error(ErrorCode::ReadOnlyTable, table);
            throw Error(ErrorCode::UnknownTool, name);
        }
    }

    if (kind == ToolKind::Escalation) {
        const auto& s = call.arguments.contains("summary") ? call.arguments["summary"] : json();
        if (!s.is_string()) malformed("\"summary\" must be a string");
        for (const auto& [k, _] : call.arguments.items())
            if (k != "summary") malformed("unknown argument " + k);
        return run_write("INSERT INTO " + quote_identifier(kEscalationTable) + " (summary) VALUES (?)",
                         {Value(s.get<std::string>())}, true);
    }

    auto it = schema_.find(table);
    if (it == schema_.end()) throw Error(ErrorCode::UnknownTool, name);
    switch (kind) {
    case ToolKind::Query: return run_query(it->second, call.arguments);
    case ToolKind::Insert: return run_insert(it->second, call.arguments);
    case ToolKind::Update: return run_update(it->second, call.arguments);
    case ToolKind::Escalation: break;
    }
    throw Error(ErrorCode::UnknownTool, name);
}

ToolResult Environment::run_query(const TableInfo& table, const json& args) {
    for (const auto& [k, _] : args.items())
        if (k != "filters" && k != "order_by" && k != "descending" && k != "limit")
            malformed("unknown argument " + k);

    std::string sql = "SELECT * FROM " + quote_identifier(table.name);
    std::vector<Value> params;
    std::string where;
    for (const auto& [col, spec] : object_field(args, "filters", false).items()) {
        const auto& c = column_of(table, col);
        std::string op = "=";
        const json* operand = &spec;
        if (spec.is_object()) {
            if (!spec.contains("op") || !spec["op"].is_string() || !spec.contains("value"))
                malformed("filter on " + col + " needs \"op\" and \"value\"");
            op = spec["op"].get<std::string>();
            if (op != "=" && op != "!=" && op != "<" && op != "<=" && op != ">" && op != ">=")
                malformed("unsupported operator " + op);
            operand = &spec["value"];
            for (const auto& [k, _] : spec.items())
                if (k != "op" && k != "value") malformed("unknown filter key " + k);
        }
        auto v = typed_value(table, c, *operand);
        where += where.empty() ? " WHERE " : " AND ";
        if (is_null(v)) {
            if (op == "=") where += quote_identifier(col) + " IS NULL";
            else if (op == "!=") where += quote_identifier(col) + " IS NOT NULL";
            else malformed("operator " + op + " cannot compare with null");
            continue;
        }
        where += quote_identifier(col) + " " + op + " ?";
        params.push_back(std::move(v));
    }
    sql += where;

    if (args.contains("order_by")) {
        if (!args["order_by"].is_string()) malformed("\"order_by\" must be a column name");
        sql += " ORDER BY " + quote_identifier(column_of(table, args["order_by"].get<std::string>()).name);
    } else {
        sql += " ORDER BY rowid";
    }
    if (args.contains("descending")) {
        if (!args["descending"].is_boolean()) malformed("\"descending\" must be a boolean");
        if (args["descending"].get<bool>()) sql += " DESC";
    }
    if (args.contains("limit")) {
        const auto& l = args["limit"];
        if (!l.is_number_integer() || l.get<std::int64_t>() < 1) malformed("\"limit\" must be a positive integer");
        sql += " LIMIT " + std::to_string(l.get<std::int64_t>());
    }

    ToolResult r;
    Statement stmt;
    if (auto f = db_.try_prepare(sql, stmt)) return failure(*f);
    for (std::size_t i = 0; i < params.size(); ++i) stmt.bind(static_cast<int>(i + 1), params[i]);
    bool has_row = false;
    while (true) {
        if (auto f = stmt.try_step(has_row)) return failure(*f);
        if (!has_row) break;
        r.rows.push_back(row_object(stmt));
    }
    r.state_digest = polenv::state_digest(db_);
    return r;
}

ToolResult Environment::run_insert(const TableInfo& table, const json& args) {
    std::string cols, marks;
    std::vector<Value> params;
    for (const auto& [col, v] : args.items()) {
        const auto& c = column_of(table, col);
        if (c.autoincrement) malformed(col + " is assigned by the database");
        params.push_back(typed_value(table, c, v));
        cols += (cols.empty() ? "" : ", ") + quote_identifier(c.name);
        marks += marks.empty() ? "?" : ", ?";
    }
    const auto target = quote_identifier(table.name);
    const auto sql = params.empty() ? "INSERT INTO " + target + " DEFAULT VALUES"
                                    : "INSERT INTO " + target + " (" + cols + ") VALUES (" + marks + ")";
    return run_write(sql, params, true);
}

ToolResult Environment::run_update(const TableInfo& table, const json& args) {
    for (const auto& [k, _] : args.items())
        if (k != "filters" && k != "set") malformed("unknown argument " + k);
    const auto& filters = object_field(args, "filters", true);
    const auto& set = object_field(args, "set", true);
    if (filters.empty()) malformed("\"filters\" must name at least one column");
    if (set.empty()) malformed("\"set\" must name at least one column");

    std::string assignments, where;
    std::vector<Value> params;
    for (const auto& [col, v] : set.items()) {
        const auto& c = column_of(table, col);
        if (c.autoincrement) malformed(col + " is assigned by the database");
        params.push_back(typed_value(table, c, v));
        assignments += (assignments.empty() ? "" : ", ") + quote_identifier(c.name) + " = ?";
    }
    std::vector<Value> filter_params;
    for (const auto& [col, v] : filters.items()) {
        const auto& c = column_of(table, col);
        auto value = typed_value(table, c, v);
        where += where.empty() ? " WHERE " : " AND ";
        if (is_null(value)) {
            where += quote_identifier(c.name) + " IS NULL";
        } else {
            where += quote_identifier(c.name) + " = ?";
            filter_params.push_back(std::move(value));
        }
    }
    params.insert(params.end(), filter_params.begin(), filter_params.end());
    return run_write("UPDATE " + quote_identifier(table.name) + " SET " + assignments + where, params, false);
}

ToolResult Environment::run_write(const std::string& sql, const std::vector<Value>& params, bool capture_id) {
    if (auto f = db_.try_exec("BEGIN IMMEDIATE")) return failure(*f);
    Statement stmt;
    auto abort = [&](const EngineFailure& f) {
        stmt = Statement{};
        db_.try_exec("ROLLBACK");
        return failure(f);
    };
    if (auto f = db_.try_prepare(sql, stmt)) return abort(*f);
    for (std::size_t i = 0; i < params.size(); ++i) stmt.bind(static_cast<int>(i + 1), params[i]);
    bool has_row = false;
    do {
        if (auto f = stmt.try_step(has_row)) return abort(*f);
    } while (has_row);
    ToolResult r;
    r.affected = db_.changes();
    if (capture_id) r.inserted_id = db_.last_insert_rowid();
    stmt = Statement{};
    if (auto f = db_.try_exec("COMMIT")) return abort(*f);
    r.state_digest = polenv::state_digest(db_);
    return r;
}

ToolResult Environment::failure(const EngineFailure& f) {
    ToolResult r;
    r.success = false;
    r.error = parse_engine_error(f.message, bundle_.error_registry);
    r.state_digest = polenv::state_digest(db_);
    return r;
}

Environment open_environment(const TaskPackage& pkg) { return Environment(pkg.env, pkg.origin_snapshot); }

} // namespace polenv
