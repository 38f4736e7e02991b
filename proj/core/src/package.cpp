// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/package.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

#include "polenv/error.hpp"
#include "polenv/sql_text.hpp"
#include "polenv/verifier.hpp"

namespace polenv {

namespace fs = std::filesystem;

std::string_view to_string(Permission p) noexcept {
    return p == Permission::ReadWrite ? "read_write" : "read_only";
}

std::string_view to_string(ToolKind k) noexcept {
    switch (k) {
    case ToolKind::Insert: return "insert";
    case ToolKind::Query: return "query";
    case ToolKind::Update: return "update";
    case ToolKind::Escalation: return "escalation";
    }
    return "query";
}

std::string_view to_string(FkMode m) noexcept {
    return m == FkMode::Drop ? "drop" : "canonical_remap";
}

namespace {

ToolKind tool_kind_from(std::string_view s) {
    if (s == "insert") return ToolKind::Insert;
    if (s == "query") return ToolKind::Query;
    if (s == "update") return ToolKind::Update;
    if (s == "escalation") return ToolKind::Escalation;
    throw Error(ErrorCode::InvalidArgument, "unknown tool kind: " + std::string(s));
}

Permission permission_from(std::string_view s) {
    if (s == "read_write") return Permission::ReadWrite;
    if (s == "read_only") return Permission::ReadOnly;
    throw Error(ErrorCode::InvalidPackage, "unknown permission: " + std::string(s));
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

json column_schema(const ColumnInfo& c) {
    json prop = json::object();
    switch (c.affinity) {
    case Affinity::Integer: prop["type"] = "integer"; break;
    case Affinity::Real:
    case Affinity::Numeric: prop["type"] = "number"; break;
    case Affinity::Text: prop["type"] = "string"; break;
    case Affinity::Blob: break;
    }
    std::string desc = c.declared_type.empty() ? "untyped" : c.declared_type;
    if (c.autoincrement) desc += ", system-assigned key";
    else if (c.primary_key) desc += ", primary key";
    if (c.has_default) desc += ", has default";
    if (c.not_null) desc += ", not null";
    prop["description"] = desc;
    return prop;
}

bool required_on_insert(const ColumnInfo& c) {
    if (!c.not_null || c.has_default) return false;
    // INTEGER PRIMARY KEY aliases the rowid and is assigned when omitted.
    return !(c.primary_key && c.affinity == Affinity::Integer);
}

std::string describe(std::string summary, const std::vector<std::string>& pre, const std::vector<std::string>& post) {
    if (!pre.empty()) {
        summary += "\nPreconditions (enforced by the database):";
        for (const auto& p : pre) summary += "\n- " + p;
    }
    if (!post.empty()) {
        summary += "\nSide effects (applied automatically):";
        for (const auto& p : post) summary += "\n- " + p;
    }
    return summary;
}

const std::vector<std::string>& lookup(const std::map<std::string, std::vector<std::string>>& m,
                                       const std::string& key) {
    static const std::vector<std::string> empty;
    auto it = m.find(key);
    return it == m.end() ? empty : it->second;
}

} // namespace

// ── ToolSpec / config serialization ─────────────────────────────

json ToolSpec::to_json() const {
    json j;
    j["name"] = name;
    j["kind"] = std::string(polenv::to_string(kind));
    j["table"] = table ? json(*table) : json(nullptr);
    j["parameters"] = parameter_schema;
    j["description"] = description;
    j["preconditions"] = preconditions;
    j["side_effects"] = side_effects;
    return j;
}

ToolSpec ToolSpec::from_json(const json& j) {
    ToolSpec t;
    t.name = j.at("name").get<std::string>();
    t.kind = tool_kind_from(j.at("kind").get<std::string>());
    if (j.contains("table") && !j["table"].is_null()) t.table = j["table"].get<std::string>();
    t.parameter_schema = j.value("parameters", json::object());
    t.description = j.value("description", "");
    t.preconditions = j.value("preconditions", std::vector<std::string>{});
    t.side_effects = j.value("side_effects", std::vector<std::string>{});
    return t;
}

const ToolSpec* EnvironmentBundle::find_tool(std::string_view name) const {
    for (const auto& t : tool_catalog)
        if (t.name == name) return &t;
    return nullptr;
}

bool DiffConfig::excluded(std::string_view table, std::string_view column) const {
    auto it = excluded_columns.find(std::string(table));
    return it != excluded_columns.end() && it->second.count(std::string(column)) > 0;
}

json DiffConfig::to_json() const {
    json j;
    json excl = json::object();
    for (const auto& [t, cols] : excluded_columns) excl[t] = std::vector<std::string>(cols.begin(), cols.end());
    j["excluded_columns"] = excl;
    j["fk_mode"] = std::string(polenv::to_string(fk_mode));
    j["epsilon"] = epsilon;
    j["lambda_err"] = lambda_err;
    if (float_compare.decimal_places) j["float_compare"] = json{{"rounded", *float_compare.decimal_places}};
    else j["float_compare"] = "exact";
    return j;
}

DiffConfig DiffConfig::from_json(const json& j) {
    DiffConfig c;
    if (j.contains("excluded_columns")) {
        for (const auto& [t, cols] : j["excluded_columns"].items())
            for (const auto& col : cols) c.excluded_columns[t].insert(col.get<std::string>());
    }
    auto mode = j.value("fk_mode", std::string("drop"));
    if (mode == "drop") c.fk_mode = FkMode::Drop;
    else if (mode == "canonical_remap") c.fk_mode = FkMode::CanonicalRemap;
    else throw Error(ErrorCode::InvalidPackage, "unknown fk_mode: " + mode);
    c.epsilon = j.value("epsilon", 1e-9);
    c.lambda_err = j.value("lambda_err", 0.1);
    if (j.contains("float_compare")) {
        const auto& fc = j["float_compare"];
        if (fc.is_object() && fc.contains("rounded")) c.float_compare.decimal_places = fc["rounded"].get<int>();
        else if (!(fc.is_string() && fc.get<std::string>() == "exact"))
            throw Error(ErrorCode::InvalidPackage, "float_compare must be \"exact\" or {\"rounded\": n}");
    }
    if (!(c.epsilon > 0)) throw Error(ErrorCode::InvalidPackage, "diff_config.epsilon must be > 0");
    if (!(c.lambda_err > 0)) throw Error(ErrorCode::InvalidPackage, "diff_config.lambda_err must be > 0");
    return c;
}

json RolloutLimits::to_json() const { return json{{"max_turns", max_turns}, {"stop_token", stop_token}}; }

RolloutLimits RolloutLimits::from_json(const json& j) {
    RolloutLimits l;
    l.max_turns = j.value("max_turns", 50);
    l.stop_token = j.value("stop_token", std::string("###STOP###"));
    if (l.max_turns < 1) throw Error(ErrorCode::InvalidPackage, "limits.max_turns must be >= 1");
    if (l.stop_token.empty()) throw Error(ErrorCode::InvalidPackage, "limits.stop_token must be non-empty");
    return l;
}

// ── Compilation and derivation ──────────────────────────────────

std::string effective_schema_sql(std::string_view schema_sql) {
    auto db = Database::open_memory();
    std::string out(schema_sql);
    // Probe on a scratch engine rather than grepping the text.
    if (!db.try_exec(schema_sql)) {
        auto schema = read_schema(db);
        if (schema.count(kEscalationTable)) return out;
    }
    if (!out.empty() && out.back() != '\n') out.push_back('\n');
    out += "\n-- System Table: escalation log\n";
    out += kEscalationDdl;
    return out;
}

SchemaInfo compile_environment(std::string_view schema_sql, std::string_view triggers_sql) {
    auto db = Database::open_memory();
    if (auto f = db.try_exec(effective_schema_sql(schema_sql)))
        throw Error(ErrorCode::CompileFailure, "schema: " + f->message);
    if (auto f = db.try_exec(triggers_sql)) throw Error(ErrorCode::CompileFailure, "triggers: " + f->message);
    check_trigger_programs(db);
    return read_schema(db);
}

void check_trigger_programs(Database& db) {
    // Preparing (not running) a write compiles every trigger program that
    // write would fire, which surfaces unresolved tables and columns.
    for (const auto& [name, info] : read_schema(db)) {
        const auto table = quote_identifier(name);
        std::vector<std::string> probes = {"INSERT INTO " + table + " DEFAULT VALUES",
                                           "DELETE FROM " + table};
        for (const auto& c : info.columns) {
            const auto col = quote_identifier(c.name);
            probes.push_back("UPDATE " + table + " SET " + col + " = " + col);
        }
        for (const auto& sql : probes) {
            Statement stmt;
            if (auto f = db.try_prepare(sql, stmt))
                throw Error(ErrorCode::CompileFailure, "triggers on " + name + ": " + f->message);
        }
    }
}

TriggerAnnotations extract_trigger_annotations(std::string_view triggers_sql) {
    TriggerAnnotations out;
    auto append = [](std::vector<std::string>& dst, const std::vector<std::string>& src) {
        for (const auto& s : src)
            if (std::find(dst.begin(), dst.end(), s) == dst.end()) dst.push_back(s);
    };
    for (const auto& trig : sql::parse_triggers(triggers_sql)) {
        const bool before = trig.timing == "BEFORE";
        const bool after = trig.timing == "AFTER";
        auto lines = before ? sql::precondition_lines(trig) : sql::side_effect_lines(trig);
        if (lines.empty() && (before || after)) lines.push_back("Enforced by trigger " + trig.name);
        if (trig.event == "INSERT") {
            if (before) append(out.insert_preconditions[trig.table], lines);
            if (after) append(out.insert_side_effects[trig.table], lines);
        } else if (trig.event == "UPDATE") {
            if (before) append(out.update_preconditions[trig.table], lines);
            if (after) append(out.update_side_effects[trig.table], lines);
        }
    }
    return out;
}

std::vector<ToolSpec> derive_tools(std::string_view schema_sql,
                                   const std::map<std::string, Permission>& permissions,
                                   const TriggerAnnotations& annotations) {
    auto db = Database::open_memory();
    if (auto f = db.try_exec(effective_schema_sql(schema_sql)))
        throw Error(ErrorCode::CompileFailure, "schema: " + f->message);
    auto schema = read_schema(db);

    std::vector<ToolSpec> tools;
    for (const auto& [name, info] : schema) {
        if (name == kEscalationTable) continue;
        auto perm_it = permissions.find(name);
        const auto perm = perm_it == permissions.end() ? Permission::ReadOnly : perm_it->second;

        // System-assigned keys are readable but never written by tools.
        json writable = json::object();
        std::vector<std::string> column_names;
        for (const auto& c : info.columns) {
            if (!c.autoincrement) writable[c.name] = column_schema(c);
            column_names.push_back(c.name);
        }

        if (perm == Permission::ReadWrite) {
            ToolSpec ins;
            ins.name = "insert_" + name;
            ins.kind = ToolKind::Insert;
            ins.table = name;
            json required = json::array();
            for (const auto& c : info.columns)
                if (required_on_insert(c)) required.push_back(c.name);
            ins.parameter_schema = {{"type", "object"}, {"properties", writable}, {"required", required},
                                    {"additionalProperties", false}};
            ins.preconditions = lookup(annotations.insert_preconditions, name);
            ins.side_effects = lookup(annotations.insert_side_effects, name);
            ins.description = describe("Insert one row into " + name + ". Columns with defaults may be "
                                       "omitted; system-assigned keys are set by the database.",
                                       ins.preconditions, ins.side_effects);
            tools.push_back(std::move(ins));
        }

        ToolSpec q;
        q.name = "query_" + name;
        q.kind = ToolKind::Query;
        q.table = name;
        json filter_props = json::object();
        for (const auto& c : info.columns) filter_props[c.name] = json::object();
        q.parameter_schema = {
            {"type", "object"},
            {"properties",
             {{"filters",
               {{"type", "object"},
                {"description", "Conjunctive filters. Each entry maps a column to a value (equality) or to "
                                "{\"op\": one of =, !=, <, <=, >, >=, \"value\": v}."},
                {"properties", filter_props},
                {"additionalProperties", false}}},
              {"order_by", {{"type", "string"}, {"enum", column_names}}},
              {"descending", {{"type", "boolean"}}},
              {"limit", {{"type", "integer"}, {"minimum", 1}}}}},
            {"additionalProperties", false}};
        q.description = "Read rows from " + name + " matching all filters.";
        tools.push_back(std::move(q));

        if (perm == Permission::ReadWrite) {
            ToolSpec up;
            up.name = "update_" + name;
            up.kind = ToolKind::Update;
            up.table = name;
            up.parameter_schema = {
                {"type", "object"},
                {"properties",
                 {{"filters",
                   {{"type", "object"},
                    {"description", "Equality filters selecting the rows to update."},
                    {"properties", filter_props},
                    {"additionalProperties", false},
                    {"minProperties", 1}}},
                  {"set",
                   {{"type", "object"},
                    {"description", "Column values to assign."},
                    {"properties", writable},
                    {"additionalProperties", false},
                    {"minProperties", 1}}}}},
                {"required", {"filters", "set"}},
                {"additionalProperties", false}};
            up.preconditions = lookup(annotations.update_preconditions, name);
            up.side_effects = lookup(annotations.update_side_effects, name);
            up.description = describe("Update rows of " + name + " selected by equality filters. Rows are "
                                      "never deleted; lifecycle changes are status updates.",
                                      up.preconditions, up.side_effects);
            tools.push_back(std::move(up));
        }
    }

    ToolSpec esc;
    esc.name = std::string(kEscalationTool);
    esc.kind = ToolKind::Escalation;
    esc.parameter_schema = {
        {"type", "object"},
        {"properties", {{"summary", {{"type", "string"}, {"description", "Why a human is needed."}}}}},
        {"required", {"summary"}},
        {"additionalProperties", false}};
    esc.description = "Hand the conversation to a human agent. Records the request in the escalation log.";
    esc.side_effects = {"Inserts a row into " + std::string(kEscalationTable)};
    tools.push_back(std::move(esc));
    return tools;
}

std::optional<std::string> find_spoiler(std::string_view task_description,
                                        const std::vector<ToolSpec>& tool_catalog,
                                        const std::vector<std::string>& redaction_list) {
    const auto haystack = lower(task_description);
    auto hit = [&](const std::string& token) {
        return !token.empty() && haystack.find(lower(token)) != std::string::npos;
    };
    for (const auto& t : tool_catalog)
        if (hit(t.name)) return t.name;
    for (const auto& r : redaction_list)
        if (hit(r)) return r;
    return std::nullopt;
}

void check_conformance(const SchemaInfo& schema, const Snapshot& snapshot) {
    for (const auto& [name, info] : schema) {
        const auto* data = snapshot.find(name);
        if (!data) throw Error(ErrorCode::SchemaMismatch, name);
        for (const auto& col : info.columns) {
            const auto* have = data->info.find_column(col.name);
            if (!have) throw Error(ErrorCode::SchemaMismatch, name + " (missing column " + col.name + ")");
            if (have->affinity != col.affinity)
                throw Error(ErrorCode::SchemaMismatch, name + " (column " + col.name + " declared " +
                                                           have->declared_type + ", expected " +
                                                           col.declared_type + ")");
        }
    }
}

void validate_package(TaskPackage& pkg) {
    if (pkg.policy_doc.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(ErrorCode::InvalidPackage, "policy document is empty");

    auto schema = compile_environment(pkg.env.schema_sql, pkg.env.triggers_sql);

    for (const auto& [table, perm] : pkg.env.permissions)
        if (!schema.count(table)) throw Error(ErrorCode::SchemaMismatch, table + " (named in permissions)");

    // The escalation log's key is technical like every other auto key.
    pkg.diff_config.excluded_columns[std::string(kEscalationTable)].insert("id");
    for (const auto& [table, cols] : pkg.diff_config.excluded_columns) {
        auto it = schema.find(table);
        for (const auto& col : cols)
            if (it == schema.end() || !it->second.find_column(col))
                throw Error(ErrorCode::UnknownExcludedColumn, table + "." + col);
    }

    check_conformance(schema, pkg.origin_snapshot);
    check_conformance(schema, pkg.target_snapshot);

    pkg.env.tool_catalog =
        derive_tools(pkg.env.schema_sql, pkg.env.permissions, extract_trigger_annotations(pkg.env.triggers_sql));
    for (const auto& code : sql::raised_codes(sql::parse_triggers(pkg.env.triggers_sql)))
        pkg.env.error_registry.try_emplace(code, "");

    if (auto leak = find_spoiler(pkg.task_description, pkg.env.tool_catalog, pkg.redaction_list))
        throw Error(ErrorCode::SpoilerLeak, *leak);

    pkg.delta0 = diff(pkg.origin_snapshot, pkg.target_snapshot, pkg.diff_config).total;
    pkg.trivial = pkg.delta0 == 0;
    pkg.warnings.clear();
    if (pkg.trivial) pkg.warnings.push_back("trivial task: origin and target snapshots are equivalent");
}

// ── Directory format ────────────────────────────────────────────

namespace {

constexpr const char* kArtifacts[] = {"manifest.json", "policy.md", "task.md", "schema.sql",
                                      "triggers.sql",  "origin.db", "target.db"};

} // namespace

json manifest_json(const TaskPackage& pkg) {
    json j;
    j["name"] = pkg.name;
    j["domain"] = pkg.domain;
    json perms = json::object();
    for (const auto& [t, p] : pkg.env.permissions) perms[t] = std::string(to_string(p));
    j["permissions"] = perms;
    j["diff_config"] = pkg.diff_config.to_json();
    j["limits"] = pkg.limits.to_json();
    j["redaction_list"] = pkg.redaction_list;
    j["error_registry"] = pkg.env.error_registry;
    return j;
}

json tools_json(const std::vector<ToolSpec>& tools) {
    json arr = json::array();
    for (const auto& t : tools) arr.push_back(t.to_json());
    return arr;
}

TaskPackage load_package(const fs::path& dir) {
    for (const char* name : kArtifacts)
        if (!fs::exists(dir / name)) throw Error(ErrorCode::MissingArtifact, (dir / name).string());

    TaskPackage pkg;
    json manifest;
    try {
        manifest = json::parse(read_text(dir / "manifest.json"));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidPackage, std::string("manifest.json: ") + e.what());
    }
    try {
        pkg.name = manifest.value("name", dir.filename().string());
        pkg.domain = manifest.value("domain", "");
        if (manifest.contains("permissions"))
            for (const auto& [t, p] : manifest["permissions"].items())
                pkg.env.permissions[t] = permission_from(p.get<std::string>());
        pkg.diff_config = DiffConfig::from_json(manifest.value("diff_config", json::object()));
        pkg.limits = RolloutLimits::from_json(manifest.value("limits", json::object()));
        pkg.redaction_list = manifest.value("redaction_list", std::vector<std::string>{});
        pkg.env.error_registry =
            manifest.value("error_registry", std::map<std::string, std::string>{});
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidPackage, std::string("manifest.json: ") + e.what());
    }

    pkg.policy_doc = read_text(dir / "policy.md");
    pkg.task_description = read_text(dir / "task.md");
    pkg.env.schema_sql = read_text(dir / "schema.sql");
    pkg.env.triggers_sql = read_text(dir / "triggers.sql");
    pkg.origin_snapshot = Snapshot::from_file(dir / "origin.db");
    pkg.target_snapshot = Snapshot::from_file(dir / "target.db");

    validate_package(pkg);
    return pkg;
}

void save_package(const TaskPackage& pkg, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw Error(ErrorCode::IoFailure, "cannot create package directory " + dir.string() +
                                              (ec ? ": " + ec.message() : ""));
    write_text(dir / "manifest.json", manifest_json(pkg).dump(2) + "\n");
    write_text(dir / "policy.md", pkg.policy_doc);
    write_text(dir / "task.md", pkg.task_description);
    write_text(dir / "schema.sql", pkg.env.schema_sql);
    write_text(dir / "triggers.sql", pkg.env.triggers_sql);
    write_text(dir / "tools.json", tools_json(pkg.env.tool_catalog).dump(2) + "\n");
    pkg.origin_snapshot.save(dir / "origin.db");
    pkg.target_snapshot.save(dir / "target.db");
}

} // namespace polenv
