// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>

#include "polenv/error.hpp"
#include "polenv/package.hpp"
#include "polenv/verifier.hpp"
#include "test_support.hpp"

using namespace polenv;
namespace fs = std::filesystem;
namespace t = polenv::test;

namespace {

fs::path copy_fixture(const std::string& name) {
    const auto dir = t::fresh_dir(name);
    fs::copy(t::fixture_dir(), dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    return dir;
}

ErrorCode load_error(const fs::path& dir, std::string* message = nullptr) {
    try {
        load_package(dir);
    } catch (const Error& e) {
        if (message) *message = e.what();
        return e.code();
    }
    FAIL("package unexpectedly loaded");
    return ErrorCode::InvalidArgument;
}

std::map<ToolKind, int> kinds(const std::vector<ToolSpec>& tools) {
    std::map<ToolKind, int> out;
    for (const auto& t : tools) ++out[t.kind];
    return out;
}

const ToolSpec& tool(const TaskPackage& pkg, std::string_view name) {
    const auto* t = pkg.env.find_tool(name);
    REQUIRE(t != nullptr);
    return *t;
}

} // namespace

TEST_SUITE("package") {

TEST_CASE("fixture loads with its tables, tools and delta0") {
    const auto& pkg = t::fixture();
    CHECK(pkg.name == "corporate_travel");
    CHECK(pkg.origin_snapshot.tables().size() == 10);  // nine domain tables plus the escalation log
    CHECK(pkg.env.tool_catalog.size() == 18);
    const auto k = kinds(pkg.env.tool_catalog);
    CHECK(k.at(ToolKind::Query) == 9);
    CHECK(k.at(ToolKind::Insert) == 4);
    CHECK(k.at(ToolKind::Update) == 4);
    CHECK(k.at(ToolKind::Escalation) == 1);
    CHECK(pkg.env.find_tool("update_users") == nullptr);
    CHECK(pkg.env.find_tool("transfer_to_human_agents") != nullptr);

    const auto oracle = t::oracle_diff(pkg.origin_snapshot.image(), pkg.target_snapshot.image(),
                                       pkg.diff_config.excluded_columns);
    CHECK(oracle == 4);
    CHECK(pkg.delta0 == oracle);
    CHECK_FALSE(pkg.trivial);
}

TEST_CASE("escalation log key is excluded automatically") {
    CHECK(t::fixture().diff_config.excluded("escalations", "id"));
}

TEST_CASE("raised codes without a hint are registered with an empty hint") {
    const auto& reg = t::fixture().env.error_registry;
    CHECK(reg.size() == 14);
    CHECK(reg.at("QUOTA_EXCEEDED").find("maximum") != std::string::npos);
}

TEST_CASE("missing artifact is named") {
    const auto dir = copy_fixture("missing");
    fs::remove(dir / "task.md");
    std::string msg;
    CHECK(load_error(dir, &msg) == ErrorCode::MissingArtifact);
    CHECK(msg.find("task.md") != std::string::npos);
}

TEST_CASE("task text naming a tool is a spoiler leak") {
    const auto dir = copy_fixture("spoiler");
    t::write_file(dir / "task.md", "Please just call insert_flight_bookings for me.");
    std::string msg;
    CHECK(load_error(dir, &msg) == ErrorCode::SpoilerLeak);
    CHECK(msg.find("insert_flight_bookings") != std::string::npos);
}

TEST_CASE("spoiler search is case-insensitive and covers the redaction list") {
    const auto& pkg = t::fixture();
    CHECK(find_spoiler("QUERY_USERS please", pkg.env.tool_catalog, {}).value() == "query_users");
    CHECK(find_spoiler("my Trip_Purpose is x", pkg.env.tool_catalog, pkg.redaction_list).value() == "trip_purpose");
    CHECK_FALSE(find_spoiler(pkg.task_description, pkg.env.tool_catalog, pkg.redaction_list).has_value());
}

TEST_CASE("origin snapshot without approvals is a schema mismatch naming the table") {
    const auto dir = copy_fixture("no-approvals");
    auto db = t::fixture().origin_snapshot.open();
    db.exec("DROP TABLE approvals");
    Snapshot::capture(db).save(dir / "origin.db");
    std::string msg;
    CHECK(load_error(dir, &msg) == ErrorCode::SchemaMismatch);
    CHECK(msg.find("approvals") != std::string::npos);
}

TEST_CASE("trigger referencing a missing table fails to compile with the engine message") {
    const auto dir = copy_fixture("bad-trigger");
    auto triggers = t::read_file(dir / "triggers.sql");
    const std::string from = "SELECT vendor_type FROM preferred_vendors WHERE id = NEW.hotel_vendor_id";
    const auto pos = triggers.find(from);
    REQUIRE(pos != std::string::npos);
    triggers.replace(pos, from.size(), "SELECT vendor_type FROM vendor_catalog WHERE id = NEW.hotel_vendor_id");
    t::write_file(dir / "triggers.sql", triggers);
    std::string msg;
    CHECK(load_error(dir, &msg) == ErrorCode::CompileFailure);
    CHECK(msg.find("no such table") != std::string::npos);
}

TEST_CASE("diff config is validated") {
    const auto dir = copy_fixture("bad-config");
    auto manifest = t::read_json(dir / "manifest.json");
    SUBCASE("non-positive epsilon") {
        manifest["diff_config"]["epsilon"] = 0;
        t::write_file(dir / "manifest.json", manifest.dump());
        CHECK(load_error(dir) == ErrorCode::InvalidPackage);
    }
    SUBCASE("excluded column that does not exist") {
        manifest["diff_config"]["excluded_columns"]["users"] = {"nickname"};
        t::write_file(dir / "manifest.json", manifest.dump());
        CHECK(load_error(dir) == ErrorCode::UnknownExcludedColumn);
    }
    SUBCASE("manifest that is not JSON") {
        t::write_file(dir / "manifest.json", "{not json");
        CHECK(load_error(dir) == ErrorCode::InvalidPackage);
    }
}

TEST_CASE("identical origin and target make a trivial task with a warning") {
    const auto dir = copy_fixture("trivial");
    fs::copy_file(dir / "origin.db", dir / "target.db", fs::copy_options::overwrite_existing);
    const auto pkg = load_package(dir);
    CHECK(pkg.delta0 == 0);
    CHECK(pkg.trivial);
    REQUIRE(pkg.warnings.size() == 1);
    CHECK(pkg.warnings[0].find("trivial") != std::string::npos);
}

TEST_CASE("derive_tools on an empty schema yields only the escalation tool") {
    const auto tools = derive_tools("", {}, {});
    REQUIRE(tools.size() == 1);
    CHECK(tools[0].name == "transfer_to_human_agents");
    CHECK(tools[0].parameter_schema["required"] == json::array({"summary"}));
}

TEST_CASE("insert tool carries trigger preconditions and side effects") {
    const auto& ins = tool(t::fixture(), "insert_flight_bookings");
    const auto has = [](const std::vector<std::string>& lines, std::string_view needle) {
        return std::any_of(lines.begin(), lines.end(),
                           [&](const auto& l) { return l.find(needle) != std::string::npos; });
    };
    CHECK(has(ins.preconditions, "Maximum 3 flight bookings per travel request"));
    CHECK(has(ins.preconditions, "Only DIRECTOR/VP level can book non-ECONOMY class"));
    CHECK(has(ins.side_effects, "approvals"));
    CHECK(ins.description.find("Maximum 3 flight bookings") != std::string::npos);
    // Preconditions of update-only triggers stay off the insert tool.
    CHECK_FALSE(has(ins.preconditions, "TICKETED flights cannot be cancelled"));
    CHECK(has(tool(t::fixture(), "update_flight_bookings").preconditions, "TICKETED flights cannot be cancelled"));
}

TEST_CASE("parameter schemas follow column types and constraints") {
    const auto& ins = tool(t::fixture(), "insert_flight_bookings").parameter_schema;
    CHECK(ins["additionalProperties"] == false);
    std::vector<std::string> required = ins["required"];
    std::sort(required.begin(), required.end());
    CHECK(required == std::vector<std::string>{"booking_step", "class", "cost", "departure_step", "flight_code",
                                               "travel_request_id"});
    CHECK(ins["properties"]["cost"]["type"] == "integer");
    CHECK(ins["properties"]["flight_code"]["type"] == "string");
    CHECK_FALSE(ins["properties"].contains("id"));  // autoincrement keys are never agent-supplied

    const auto& q = tool(t::fixture(), "query_users").parameter_schema;
    CHECK(q["properties"].contains("filters"));
    CHECK(q["properties"]["order_by"]["enum"].size() == 4);

    const auto& u = tool(t::fixture(), "update_approvals").parameter_schema;
    CHECK(u["required"] == json::array({"filters", "set"}));
    CHECK(u["properties"]["set"]["properties"].contains("status"));
    CHECK_FALSE(u["properties"]["set"]["properties"].contains("id"));
}

TEST_CASE("save then load round-trips artifacts and snapshots") {
    const auto dir = t::fresh_dir("roundtrip") / "pkg";
    save_package(t::fixture(), dir);
    const auto again = load_package(dir);
    for (const char* f : {"policy.md", "task.md", "schema.sql", "triggers.sql"})
        CHECK(t::read_file(dir / f) == t::read_file(t::fixture_dir() / f));
    CHECK(diff(again.origin_snapshot, t::fixture().origin_snapshot, again.diff_config).total == 0);
    CHECK(diff(again.target_snapshot, t::fixture().target_snapshot, again.diff_config).total == 0);
    CHECK(again.delta0 == t::fixture().delta0);
    CHECK(manifest_json(again) == manifest_json(t::fixture()));
}

TEST_CASE("single-row edits after a round trip are counted like the oracle counts them") {
    const auto dir = t::fresh_dir("edit") / "pkg";
    save_package(t::fixture(), dir);
    const auto& original = t::fixture().origin_snapshot;
    const auto& cfg = t::fixture().diff_config;

    SUBCASE("insert one row") {
        auto db = original.open();
        db.exec("INSERT INTO companies (id, name, active) VALUES ('comp_gamma', 'Gamma', 1)");
        Snapshot::capture(db).save(dir / "origin.db");
        const auto reloaded = load_package(dir);
        const auto d = diff(original, reloaded.origin_snapshot, cfg).total;
        CHECK(d == 1);
        CHECK(d == t::oracle_diff(original.image(), reloaded.origin_snapshot.image(), cfg.excluded_columns));
    }
    SUBCASE("change one field of one row") {
        auto db = original.open();
        db.exec("UPDATE companies SET name = 'Alpha Holdings' WHERE id = 'comp_alpha'");
        Snapshot::capture(db).save(dir / "origin.db");
        const auto reloaded = load_package(dir);
        const auto d = diff(original, reloaded.origin_snapshot, cfg).total;
        CHECK(d == t::oracle_diff(original.image(), reloaded.origin_snapshot.image(), cfg.excluded_columns));
        CHECK(d == 2);  // the old tuple leaves the multiset and the new one enters
    }
}

TEST_CASE("saving below a regular file is an IO failure") {
    const auto dir = t::fresh_dir("io");
    t::write_file(dir / "blocker", "x");
    try {
        save_package(t::fixture(), dir / "blocker" / "pkg");
        FAIL("expected IoFailure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoFailure);
    }
}

TEST_CASE("check_conformance rejects incompatible column types") {
    auto db = Database::open_memory();
    db.exec(effective_schema_sql(t::fixture().env.schema_sql));
    const auto schema = read_schema(db);
    auto other = Database::open_memory();
    other.exec(effective_schema_sql(t::fixture().env.schema_sql));
    other.exec("DROP TABLE escalations; CREATE TABLE escalations (id INTEGER PRIMARY KEY, summary BLOB)");
    try {
        check_conformance(schema, Snapshot::capture(other));
        FAIL("expected SchemaMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaMismatch);
        CHECK(std::string(e.what()).find("escalations") != std::string::npos);
    }
}

}
