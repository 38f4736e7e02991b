// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/synthesis.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <set>

#include "polenv/error.hpp"
#include "polenv/rollout.hpp"
#include "polenv/sql_text.hpp"

namespace polenv {

namespace fs = std::filesystem;

std::string_view to_string(CheckStatus s) noexcept {
    switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Skipped: return "skipped";
    }
    return "skipped";
}

json VerificationReport::to_json() const {
    return {{"stage", stage},
            {"physical", std::string(polenv::to_string(physical))},
            {"physical_message", physical_message},
            {"semantic", std::string(polenv::to_string(semantic))},
            {"semantic_message", semantic_message},
            {"attempts", attempts},
            {"warnings", warnings}};
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

// Generators often wrap code in markdown fences.
std::string strip_fences(const std::string& text) {
    const auto open = text.find("```");
    if (open == std::string::npos) return text;
    const auto body = text.find('\n', open);
    const auto close = text.rfind("```");
    if (body == std::string::npos || close <= body) return text;
    return text.substr(body + 1, close - body - 1);
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

json parse_generated_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(strip_fences(text));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::PortFailure, what + " is not JSON: " + e.what());
    }
}

json row_counts(const Snapshot& s) {
    json out = json::object();
    for (const auto& [name, data] : s.tables()) out[name] = data.rows.size();
    return out;
}

json catalog_json(const EnvironmentBundle& bundle) { return tools_json(bundle.tool_catalog); }

VerificationReport check_tables(const std::string& schema_sql) {
    VerificationReport r;
    r.stage = "tables";
    auto db = Database::open_memory();
    if (auto f = db.try_exec(effective_schema_sql(schema_sql))) {
        r.physical = CheckStatus::Fail;
        r.physical_message = f->message;
    } else if (read_schema(db).size() <= 1) {
        r.warnings.push_back("schema defines no tables");
    }
    return r;
}

} // namespace

// ── Architect ───────────────────────────────────────────────────

std::map<std::string, Permission> permissions_from_layers(std::string_view schema_sql) {
    std::map<std::string, Permission> out;
    for (const auto& [table, layer] : sql::table_layers(schema_sql))
        out[table] = layer == sql::TableLayer::Transaction ? Permission::ReadWrite : Permission::ReadOnly;
    return out;
}

VerificationReport verify_environment(const EnvironmentBundle& bundle) {
    VerificationReport r;
    r.stage = "triggers";
    auto fail = [&](std::string msg) {
        r.physical = CheckStatus::Fail;
        r.physical_message = std::move(msg);
        return r;
    };

    auto db = Database::open_memory();
    if (auto f = db.try_exec(effective_schema_sql(bundle.schema_sql))) return fail("schema: " + f->message);
    if (auto f = db.try_exec(bundle.triggers_sql)) return fail("triggers: " + f->message);
    try {
        check_trigger_programs(db);
    } catch (const Error& e) {
        return fail(e.what());
    }
    const auto schema = read_schema(db);
    if (schema.size() <= 1) r.warnings.push_back("schema defines no tables");
    const auto enums = sql::enum_domains(bundle.schema_sql);

    for (const auto& [table, perm] : bundle.permissions) {
        if (perm != Permission::ReadWrite) continue;
        auto it = schema.find(table);
        if (it == schema.end()) return fail("permissions name missing table " + table);
        const auto& info = it->second;

        std::vector<const ColumnInfo*> required;
        for (const auto& c : info.columns)
            if (c.not_null && !c.has_default && !(c.primary_key && c.affinity == Affinity::Integer))
                required.push_back(&c);

        auto probe = [&](bool valid) -> std::optional<std::string> {
            std::string cols, vals;
            for (const auto* c : required) {
                cols += (cols.empty() ? "" : ", ") + quote_identifier(c->name);
                std::string v = "NULL";
                if (valid) {
                    auto e = enums.find(table);
                    const std::vector<std::string>* domain = nullptr;
                    if (e != enums.end())
                        if (auto d = e->second.find(c->name); d != e->second.end()) domain = &d->second;
                    if (domain) v = render(Value(domain->front()));
                    else if (c->affinity == Affinity::Text) v = "'probe'";
                    else v = "1";
                }
                vals += (vals.empty() ? "" : ", ") + v;
            }
            db.exec("SAVEPOINT verify_probe");
            auto f = db.try_exec("INSERT INTO " + quote_identifier(table) + " (" + cols + ") VALUES (" + vals + ")");
            db.exec("ROLLBACK TO verify_probe");
            db.exec("RELEASE verify_probe");
            if (!f) {
                if (!valid) return "invalid write into " + table + " was accepted";
                return std::nullopt;
            }
            if (!f->is_constraint()) return table + ": " + f->message;
            if (valid) r.warnings.push_back("plausible write into " + table + " rejected: " + f->message);
            return std::nullopt;
        };
        if (required.empty()) {
            r.warnings.push_back("no write probe derivable for " + table);
            continue;
        }
        if (auto bad = probe(false)) return fail(*bad);
        if (auto bad = probe(true)) return fail(*bad);
    }
    return r;
}

ArchitectResult architect_compile(std::string_view seed_domain, GenerationPort& port, const ArchitectOptions& opts) {
    if (opts.max_attempts < 1)
        throw Error(ErrorCode::CompilationExhausted, "stage tables: max_attempts must be >= 1");
    if (blank(seed_domain)) throw Error(ErrorCode::InvalidArgument, "seed domain is empty");

    ArchitectResult out;
    out.analysis = port.generate("analyze", {{"seed_domain", seed_domain}}, opts.seed);
    out.policy_doc =
        port.generate("policy", {{"seed_domain", seed_domain}, {"analysis", out.analysis}}, opts.seed);
    VerificationReport policy_report;
    policy_report.stage = "policy";
    policy_report.attempts = 1;
    if (blank(out.policy_doc)) {
        policy_report.physical = CheckStatus::Fail;
        policy_report.physical_message = "policy document is empty";
        throw Error(ErrorCode::CompilationExhausted, "stage policy: " + policy_report.to_json().dump());
    }
    out.reports.push_back(policy_report);

    // Check-Fix-Verify: each failed attempt is fed back with the engine text.
    auto run_stage = [&](const std::string& stage, json ctx, auto&& check) {
        VerificationReport last;
        for (int attempt = 1; attempt <= opts.max_attempts; ++attempt) {
            auto text = strip_fences(port.generate(stage, ctx, opts.seed));
            last = check(text);
            last.stage = stage;
            last.attempts = attempt;
            if (last.physical == CheckStatus::Pass && opts.semantic_check) {
                const auto verdict = port.generate(
                    "semantic_check", {{"stage", stage}, {"ddl", text}, {"policy", out.policy_doc}}, opts.seed);
                const auto trimmed = verdict.substr(0, 4);
                last.semantic = trimmed == "PASS" ? CheckStatus::Pass : CheckStatus::Fail;
                if (last.semantic == CheckStatus::Fail) last.semantic_message = verdict;
            }
            if (last.accepted()) {
                out.reports.push_back(last);
                return text;
            }
            ctx["previous_output"] = text;
            ctx["feedback"] = last.to_json();
            ctx["attempt"] = attempt + 1;
        }
        throw Error(ErrorCode::CompilationExhausted, "stage " + stage + ": " + last.to_json().dump());
    };

    json base = {{"seed_domain", seed_domain}, {"analysis", out.analysis}, {"policy", out.policy_doc}};
    out.bundle.schema_sql = run_stage("tables", base, check_tables);
    out.bundle.permissions = permissions_from_layers(out.bundle.schema_sql);

    base["schema"] = out.bundle.schema_sql;
    out.bundle.triggers_sql = run_stage("triggers", base, [&](const std::string& text) {
        EnvironmentBundle candidate = out.bundle;
        candidate.triggers_sql = text;
        return verify_environment(candidate);
    });

    out.bundle.tool_catalog = derive_tools(out.bundle.schema_sql, out.bundle.permissions,
                                           extract_trigger_annotations(out.bundle.triggers_sql));
    for (const auto& code : sql::raised_codes(sql::parse_triggers(out.bundle.triggers_sql)))
        out.bundle.error_registry.try_emplace(code, "");
    return out;
}

// ── Set designer ────────────────────────────────────────────────

SeedStrategy SeedStrategy::from_json(const json& j) {
    SeedStrategy s;
    if (!j.is_object()) return s;
    const auto& seeding = j.contains("seeding") ? j["seeding"] : j;
    if (seeding.contains("phases"))
        for (const auto& p : seeding["phases"])
            s.phases.push_back({p.at("phase").get<std::string>(), p.value("tags", std::vector<std::string>{})});
    s.required_tables = seeding.value("required_tables", std::vector<std::string>{});
    s.probe_budget = j.value("probe_budget", std::int64_t{32});
    return s;
}

Snapshot empty_snapshot(const EnvironmentBundle& bundle) {
    return Snapshot::from_sql(effective_schema_sql(bundle.schema_sql));
}

SeedOutcome seed_initial_state(const EnvironmentBundle& bundle, const SeedStrategy& strategy, GenerationPort& port,
                               std::uint64_t seed) {
    Environment env(bundle, empty_snapshot(bundle));
    SeedOutcome out;
    out.report.stage = "seed_state";
    out.report.attempts = 1;

    const auto layers = sql::table_layers(bundle.schema_sql);
    std::vector<std::string> reference_tables;
    for (const auto& [t, layer] : layers)
        if (layer == sql::TableLayer::Reference) reference_tables.push_back(t);

    std::vector<SeedPhase> phases{{"reference", {}}};
    phases.insert(phases.end(), strategy.phases.begin(), strategy.phases.end());

    for (const auto& phase : phases) {
        json ctx = {{"phase", phase.name},
                    {"tags", phase.tags},
                    {"schema", bundle.schema_sql},
                    {"row_counts", row_counts(env.snapshot())}};
        if (phase.name == "reference") ctx["tables"] = reference_tables;
        const auto doc = parse_generated_json(port.generate("seed", ctx, seed), "seed output (" + phase.name + ")");
        const json& ops = doc.is_array() ? doc : doc.value("ops", json::array());
        if (!ops.is_array()) throw Error(ErrorCode::SeedRejected, phase.name + ": \"ops\" must be a list");

        for (const auto& op : ops) {
            json entry = {{"phase", phase.name}, {"tag", op.value("tag", "")}, {"op", op}};
            try {
                ToolCall call{op.at("tool").get<std::string>(), op.value("arguments", json::object())};
                const auto r = env.seed_write(call);
                entry["accepted"] = r.success;
                if (!r.success) entry["error"] = r.error->to_json();
            } catch (const Error& e) {
                entry["accepted"] = false;
                entry["error"] = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
            } catch (const json::exception& e) {
                entry["accepted"] = false;
                entry["error"] = {{"code", "MalformedArguments"}, {"message", e.what()}};
            }
            entry["accepted"].get<bool>() ? ++out.accepted : ++out.rejected;
            out.log.push_back(std::move(entry));
        }
    }

    out.snapshot = env.snapshot();
    for (const auto& table : strategy.required_tables) {
        const auto* data = out.snapshot.find(table);
        if (!data || data->rows.empty())
            throw Error(ErrorCode::SeedRejected, "no accepted rows for required table " + table);
    }
    if (out.rejected > 0) out.report.warnings.push_back(std::to_string(out.rejected) + " seed proposals rejected");
    return out;
}

json BoundaryProbe::to_json() const {
    return {{"kind", kind}, {"tool_call", call.to_json()}, {"outcome", rejected ? "rejected" : "accepted"},
            {"code", code}};
}

json BoundaryProbeResult::to_json() const {
    json arr = json::array();
    for (const auto& p : probes) arr.push_back(p.to_json());
    return {{"probes", arr}, {"adjacency_score", adjacency_score}};
}

BoundaryProbeResult probe_boundary_adjacency(const EnvironmentBundle& bundle, const Snapshot& s,
                                             std::int64_t probe_budget) {
    BoundaryProbeResult out;
    Environment env(bundle, s);
    std::int64_t used = 0;
    auto run = [&](const ToolCall& call, const char* kind, bool fresh) {
        if (fresh) env.reset();
        BoundaryProbe p;
        p.call = call;
        p.kind = kind;
        const auto r = env.seed_write(call);
        p.rejected = !r.success;
        if (r.error) p.code = r.error->code;
        out.probes.push_back(p);
        ++used;
        return r.success;
    };

    for (const auto& rule : sql::detect_quota_rules(sql::parse_triggers(bundle.triggers_sql))) {
        const auto* parent = s.find(rule.parent_table);
        const auto* child = s.find(rule.child_table);
        if (!parent || !child || child->rows.empty()) continue;
        const auto key_col = parent->info.column_index(rule.parent_key);
        if (key_col == std::string::npos || !child->info.find_column(rule.fk_column)) continue;

        // Clone the required fields of an existing child row.
        json args = json::object();
        const auto& tmpl = child->rows.front();
        for (std::size_t i = 0; i < child->info.columns.size(); ++i) {
            const auto& c = child->info.columns[i];
            if (c.not_null && !c.has_default && !(c.primary_key && c.affinity == Affinity::Integer))
                args[c.name] = to_json(tmpl[i]);
        }
        for (const auto& row : parent->rows) {
            if (used >= probe_budget) break;
            args[rule.fk_column] = to_json(row[key_col]);
            const ToolCall call{"insert_" + rule.child_table, args};
            if (run(call, "quota", true) && used < probe_budget) run(call, "quota_follow_up", false);
        }
    }

    const auto enums = sql::enum_domains(bundle.schema_sql);
    for (const auto& [table, perm] : bundle.permissions) {
        if (perm != Permission::ReadWrite) continue;
        const auto* data = s.find(table);
        auto e = enums.find(table);
        if (!data || e == enums.end()) continue;
        auto domain = e->second.find("status");
        const auto status_col = data->info.column_index("status");
        if (domain == e->second.end() || status_col == std::string::npos) continue;
        std::size_t pk = std::string::npos;
        for (std::size_t i = 0; i < data->info.columns.size(); ++i)
            if (data->info.columns[i].primary_key) pk = i;
        if (pk == std::string::npos) continue;
        for (const auto& row : data->rows) {
            for (const auto& value : domain->second) {
                if (used >= probe_budget) break;
                if (row[status_col] == Value(value)) continue;
                const ToolCall call{"update_" + table,
                                    {{"filters", {{data->info.columns[pk].name, to_json(row[pk])}}},
                                     {"set", {{"status", value}}}}};
                run(call, "status_transition", true);
            }
        }
    }

    std::int64_t rejected = 0;
    for (const auto& p : out.probes) rejected += p.rejected ? 1 : 0;
    out.adjacency_score =
        out.probes.empty() ? 0.0 : static_cast<double>(rejected) / static_cast<double>(out.probes.size());
    return out;
}

// ── Explorer ────────────────────────────────────────────────────

json RawEpisode::to_json() const {
    json lines = json::array();
    for (const auto& l : transcript) lines.push_back({{"speaker", l.speaker}, {"text", l.text}});
    json acts = json::array();
    for (const auto& a : actions) acts.push_back({{"tool_call", a.call.to_json()}, {"result", a.result.to_json()}});
    return {{"menu", menu},
            {"goal", goal},
            {"transcript", lines},
            {"actions", acts},
            {"target_digest", s_target.empty() ? "" : s_target.digest()},
            {"diverged", diverged}};
}

std::vector<ToolCall> episode_calls(const json& episode) {
    std::vector<ToolCall> out;
    for (const auto& a : episode.at("actions")) out.push_back(ToolCall::from_json(a.at("tool_call")));
    return out;
}

RawEpisode explore_episode(const EnvironmentBundle& bundle, const std::string& policy_doc, const Snapshot& s_origin,
                           GenerationPort& client, GenerationPort& consultant, const RolloutLimits& limits,
                           const ExploreOptions& opts) {
    Environment env(bundle, s_origin);
    RawEpisode ep;
    const auto tools = catalog_json(bundle);

    auto transcript_json = [&] {
        json arr = json::array();
        for (const auto& l : ep.transcript) arr.push_back({{"speaker", l.speaker}, {"text", l.text}});
        return arr;
    };

    ep.menu = consultant.generate("menu", {{"policy", policy_doc}, {"tools", tools},
                                           {"row_counts", row_counts(s_origin)}},
                                  opts.seed);
    ep.goal = client.generate("goal", {{"menu", ep.menu}}, opts.seed);

    std::optional<ToolCall> last_rejected;
    int repeats = 0;
    bool confirmed = false;
    json last_result = nullptr;
    for (int turn = 0; turn < limits.max_turns && !confirmed; ++turn) {
        const auto utterance =
            client.generate("client", {{"goal", ep.goal}, {"transcript", transcript_json()}}, opts.seed);
        if (detect_stop(utterance, limits.stop_token)) {
            confirmed = true;
            break;
        }
        ep.transcript.push_back({"client", utterance});

        bool replied = false;
        for (int step = 0; step < opts.max_consultant_steps; ++step) {
            const auto raw = consultant.generate("consultant",
                                                 {{"policy", policy_doc},
                                                  {"tools", tools},
                                                  {"transcript", transcript_json()},
                                                  {"last_result", last_result}},
                                                 opts.seed);
            const auto action = AgentAction::from_json(parse_generated_json(raw, "consultant output"));
            if (!action.tool_call) {
                ep.transcript.push_back({"consultant", action.text.value_or("")});
                replied = true;
                break;
            }
            auto result = env.try_execute(*action.tool_call);
            last_result = result.to_json();
            if (result.success) {
                repeats = 0;
                last_rejected.reset();
            } else {
                repeats = last_rejected && *last_rejected == *action.tool_call ? repeats + 1 : 1;
                last_rejected = *action.tool_call;
            }
            ep.actions.push_back({*action.tool_call, std::move(result)});
            if (repeats >= opts.repetition_threshold)
                throw Error(ErrorCode::ExplorationDiverged,
                            "consultant repeated a rejected " + action.tool_call->tool_name + " call " +
                                std::to_string(repeats) + " times");
        }
        if (!replied)
            throw Error(ErrorCode::ExplorationDiverged,
                        "consultant took " + std::to_string(opts.max_consultant_steps) + " steps without replying");
    }
    if (!confirmed)
        throw Error(ErrorCode::ExplorationDiverged,
                    "goal not confirmed within " + std::to_string(limits.max_turns) + " turns");
    ep.s_target = env.snapshot();
    return ep;
}

std::vector<std::string> build_redaction_list(const EnvironmentBundle& bundle, const std::vector<std::string>& extras) {
    std::set<std::string> tokens(extras.begin(), extras.end());
    for (const auto& t : bundle.tool_catalog) tokens.insert(t.name);
    auto db = Database::open_memory();
    db.exec(effective_schema_sql(bundle.schema_sql));
    for (const auto& [name, info] : read_schema(db)) {
        if (name.find('_') != std::string::npos) tokens.insert(name);
        for (const auto& c : info.columns)
            if (c.name.find('_') != std::string::npos) tokens.insert(c.name);
    }
    tokens.erase("");
    return {tokens.begin(), tokens.end()};
}

std::string project_user_view(const RawEpisode& ep, const std::vector<std::string>& redaction_list,
                              GenerationPort* rewrite, std::uint64_t seed) {
    std::string text;
    auto append = [&](const std::string& part) {
        if (blank(part)) return;
        if (!text.empty()) text += "\n\n";
        text += part;
    };
    append(ep.goal);
    for (const auto& l : ep.transcript)
        if (l.speaker == "client") append(l.text);

    std::vector<std::string> tokens;
    for (const auto& t : redaction_list)
        if (!t.empty()) tokens.push_back(t);
    std::stable_sort(tokens.begin(), tokens.end(),
                     [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    for (const auto& token : tokens) {
        const auto needle = lower(token);
        std::string out;
        const auto hay = lower(text);
        std::size_t pos = 0;
        for (auto hit = hay.find(needle); hit != std::string::npos; hit = hay.find(needle, pos)) {
            out.append(text, pos, hit - pos);
            out += "[redacted]";
            pos = hit + needle.size();
        }
        out.append(text, pos, std::string::npos);
        text = std::move(out);
    }

    auto post_check = [&](const std::string& candidate) {
        if (auto leak = find_spoiler(candidate, {}, tokens))
            throw Error(ErrorCode::RedactionIncomplete, "token survived redaction: " + *leak);
    };
    post_check(text);
    if (rewrite) {
        text = rewrite->generate("rewrite", {{"text", text}}, seed);
        post_check(text);
    }
    return text;
}

TaskPackage assemble_package(const EnvironmentBundle& bundle, const std::string& policy_doc, const Snapshot& s_origin,
                             const RawEpisode& ep, const std::string& task_text, const AssembleOptions& opts) {
    if (ep.diverged) throw Error(ErrorCode::ExplorationDiverged, "episode is marked diverged");
    TaskPackage pkg;
    pkg.name = opts.name;
    pkg.domain = opts.domain;
    pkg.policy_doc = policy_doc;
    pkg.task_description = task_text;
    pkg.env = bundle;
    for (const auto& [code, hint] : opts.error_hints) pkg.env.error_registry[code] = hint;
    pkg.origin_snapshot = s_origin;
    pkg.target_snapshot = ep.s_target;
    pkg.limits = opts.limits;
    pkg.diff_config.fk_mode = FkMode::Drop;
    for (const auto& [name, info] : s_origin.schema())
        for (const auto& c : info.columns)
            if (c.autoincrement) pkg.diff_config.excluded_columns[name].insert(c.name);
    pkg.redaction_list = build_redaction_list(bundle, opts.extra_redactions);
    validate_package(pkg);
    return pkg;
}

// ── Orchestration ───────────────────────────────────────────────

json load_canned_outputs(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    auto resolve = [&](auto&& self, json& node) -> void {
        if (node.is_object() && node.size() == 1 && node.contains("$file") && node["$file"].is_string()) {
            fs::path p = node["$file"].get<std::string>();
            node = read_file(p.is_absolute() ? p : base / p);
            return;
        }
        if (node.is_object() && node.contains("$json") && node["$json"].is_string()) {
            fs::path p = node["$json"].get<std::string>();
            const auto pointer = node.value("pointer", std::string());
            try {
                node = json::parse(read_file(p.is_absolute() ? p : base / p)).at(json::json_pointer(pointer));
            } catch (const json::exception& e) {
                throw Error(ErrorCode::InvalidArgument, p.string() + ": " + e.what());
            }
            return;
        }
        if (node.is_structured())
            for (auto& child : node) self(self, child);
    };
    resolve(resolve, doc);
    return doc;
}

SynthesisOutcome run_synthesis(std::string_view seed_domain, GenerationPort& port, const fs::path& out_dir,
                               const SynthesisOptions& opts) {
    const auto& strategy = opts.strategy;
    SynthesisOutcome out;
    json stages = json::array();
    auto stage = [&](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const Error& e) {
            const std::string msg = e.what();
            if (msg.rfind("stage ", 0) == 0) throw;
            throw Error(e.code(), std::string("stage ") + name + ": " + msg);
        }
    };

    ArchitectOptions aopts;
    aopts.max_attempts = opts.max_attempts;
    aopts.seed = opts.seed;
    aopts.semantic_check = strategy.value("architect", json::object()).value("semantic_check", false);
    auto arch = stage("architect", [&] { return architect_compile(seed_domain, port, aopts); });
    for (const auto& r : arch.reports) stages.push_back(r.to_json());

    const auto gate = verify_environment(arch.bundle);
    if (!gate.accepted())
        throw Error(ErrorCode::CompileFailure, "stage verify: " + gate.physical_message);

    const auto seed_strategy = SeedStrategy::from_json(strategy);
    auto seeded = stage("seed", [&] { return seed_initial_state(arch.bundle, seed_strategy, port, opts.seed); });
    stages.push_back(seeded.report.to_json());

    const auto probes = stage("probe", [&] {
        return probe_boundary_adjacency(arch.bundle, seeded.snapshot, seed_strategy.probe_budget);
    });

    const auto pkg_cfg = strategy.value("package", json::object());
    const auto explore_cfg = strategy.value("explore", json::object());
    RolloutLimits limits = RolloutLimits::from_json(pkg_cfg.value("limits", json::object()));
    ExploreOptions eopts;
    eopts.repetition_threshold = explore_cfg.value("repetition_threshold", 3);
    eopts.seed = opts.seed;
    out.episode = stage("explore", [&] {
        return explore_episode(arch.bundle, arch.policy_doc, seeded.snapshot, port, port, limits, eopts);
    });

    AssembleOptions asm_opts;
    asm_opts.name = pkg_cfg.value("name", "synthesized");
    asm_opts.domain = pkg_cfg.value("domain", "");
    asm_opts.limits = limits;
    asm_opts.error_hints = pkg_cfg.value("error_registry", std::map<std::string, std::string>{});
    asm_opts.extra_redactions = pkg_cfg.value("redaction_extras", std::vector<std::string>{});

    const bool rewrite = explore_cfg.value("rewrite", false);
    const auto task_text = stage("project", [&] {
        EnvironmentBundle view = arch.bundle;
        return project_user_view(out.episode, build_redaction_list(view, asm_opts.extra_redactions),
                                 rewrite ? &port : nullptr, opts.seed);
    });

    out.package = stage("assemble", [&] {
        return assemble_package(arch.bundle, arch.policy_doc, seeded.snapshot, out.episode, task_text, asm_opts);
    });

    // Replaying the executed actions must land exactly on the recorded target.
    VerificationReport episode_report;
    episode_report.stage = "episode";
    episode_report.attempts = 1;
    {
        Environment replay(out.package.env, out.package.origin_snapshot);
        for (const auto& a : out.episode.actions) replay.try_execute(a.call);
        if (replay.state_digest() != out.package.target_snapshot.digest()) {
            episode_report.physical = CheckStatus::Fail;
            episode_report.physical_message = "replayed actions do not reproduce the target";
        }
    }
    stages.push_back(episode_report.to_json());
    if (!episode_report.accepted()) throw Error(ErrorCode::ExplorationDiverged, "stage episode: " +
                                                                                    episode_report.physical_message);

    out.log = {{"stages", stages},
               {"seed", {{"accepted", seeded.accepted}, {"rejected", seeded.rejected}, {"proposals", seeded.log}}},
               {"probe", probes.to_json()},
               {"adjacency_score", probes.adjacency_score},
               {"episode", {{"actions", out.episode.actions.size()}, {"transcript", out.episode.transcript.size()}}},
               {"package",
                {{"name", out.package.name},
                 {"delta0", out.package.delta0},
                 {"trivial", out.package.trivial},
                 {"warnings", out.package.warnings}}}};

    stage("write", [&] {
        save_package(out.package, out_dir);
        write_file(out_dir / "episode.json", out.episode.to_json().dump(2) + "\n");
        write_file(out_dir / "synthesis_log.json", out.log.dump(2) + "\n");
        return 0;
    });
    return out;
}

} // namespace polenv
