// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>

#include "polenv/snapshot.hpp"
#include "polenv/synthesis.hpp"
#include "test_support.hpp"

using namespace polenv;
namespace t = polenv::test;
namespace fs = std::filesystem;

namespace {

fs::path copy_fixture(const std::string& name) {
    const auto dir = t::fresh_dir(name) / "pkg";
    fs::copy(t::fixture_dir(), dir, fs::copy_options::recursive);
    return dir;
}

json parse_json_output(const t::CommandResult& r) {
    json doc;
    REQUIRE_NOTHROW(doc = json::parse(r.out));
    return doc;
}

/// Rolls out one script-driven agent and returns the export path.
fs::path rollout_one(const std::string& agent, int seed, const fs::path& out) {
    const auto r = t::run_cli({"rollout", t::fixture_dir().string(), "--agent", t::agent_cmd(agent), "--user",
                               t::user_cmd("oracle_user"), "--k", "1", "--seed", std::to_string(seed), "--out",
                               out.string()});
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    return out / ("corporate_travel-" + std::to_string(seed) + ".ndjson");
}

struct Group {
    fs::path oracle_a, partial, idle, oracle_b;
};

const Group& group() {
    static const Group g = [] {
        const auto dir = t::fresh_dir("cli-group");
        return Group{rollout_one("oracle_agent", 1, dir), rollout_one("partial_agent", 2, dir),
                     rollout_one("idle_agent", 3, dir), rollout_one("oracle_agent", 4, dir)};
    }();
    return g;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("validate reports the package") {
    const auto r = t::run_cli({"validate", t::fixture_dir().string(), "--json"});
    CHECK(r.exit_code == 0);
    const auto doc = parse_json_output(r);
    CHECK(doc["ok"] == true);
    CHECK(doc["command"] == "polenv validate");
    CHECK(doc["delta0"] == 4);
    CHECK(doc["tool_count"] == 18);
    CHECK(doc["tools_by_kind"]["query"] == 9);
    CHECK(doc["trivial"] == false);

    const auto text = t::run_cli({"validate", t::fixture_dir().string()});
    CHECK(text.exit_code == 0);
    CHECK(text.out.find("corporate_travel") != std::string::npos);
}

TEST_CASE("validate failures") {
    SUBCASE("broken trigger") {
        const auto dir = copy_fixture("cli-broken-trigger");
        t::write_file(dir / "triggers.sql", t::read_file(dir / "triggers.sql") +
                                                "\nCREATE TRIGGER broken AFTER INSERT ON nowhere BEGIN SELECT 1; END;\n");
        const auto r = t::run_cli({"validate", dir.string(), "--json"});
        CHECK(r.exit_code == 1);
        CHECK(parse_json_output(r)["error"]["code"] == "CompileFailure");
        CHECK(r.err.find("CompileFailure") != std::string::npos);
    }
    SUBCASE("missing directory") {
        const auto r = t::run_cli({"validate", "/nonexistent/package"});
        CHECK(r.exit_code == 2);
    }
    SUBCASE("no subcommand") {
        CHECK(t::run_cli({}).exit_code == 2);
        CHECK(t::run_cli({"frobnicate"}).exit_code == 2);
    }
}

TEST_CASE("rollout runs k episodes and reports pass metrics") {
    const auto out = t::fresh_dir("cli-rollout");
    const auto r = t::run_cli({"rollout", t::fixture_dir().string(), "--agent", t::agent_cmd("oracle_agent"),
                               "--user", t::user_cmd("oracle_user"), "--k", "4", "--seed", "7", "--parallel", "2",
                               "--out", out.string(), "--json"});
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const auto doc = parse_json_output(r);
    REQUIRE(doc["episodes"].size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& ep = doc["episodes"][i];
        CHECK(ep["seed"] == 7 + i);
        CHECK(ep["termination"] == "stop_signal");
        CHECK(ep["r_final"] == 1);
        CHECK(fs::exists(ep["path"].get<std::string>()));
    }
    CHECK(doc["pass_hat_k"]["1"] == 1.0);
    CHECK(doc["pass_hat_k"]["4"] == 1.0);
    CHECK(doc["pass_at_k"]["4"] == 1.0);
}

TEST_CASE("rollout argument and port errors") {
    const auto out = t::fresh_dir("cli-rollout-errors");
    const auto k0 = t::run_cli({"rollout", t::fixture_dir().string(), "--agent", t::agent_cmd("oracle_agent"),
                                "--user", t::user_cmd("oracle_user"), "--k", "0", "--out", out.string()});
    CHECK(k0.exit_code == 2);

    const auto missing = t::run_cli({"rollout", t::fixture_dir().string(), "--user", t::user_cmd("oracle_user")});
    CHECK(missing.exit_code == 2);

    const auto dead = t::run_cli({"rollout", t::fixture_dir().string(), "--agent", "/nonexistent/agent", "--user",
                                  t::user_cmd("oracle_user"), "--k", "1", "--out", out.string(), "--json"});
    CHECK(dead.exit_code == 1);
    const auto doc = parse_json_output(dead);
    CHECK(doc["episodes"][0]["port_failure"] == true);
    CHECK(doc["error"]["code"] == "PortFailure");
}

TEST_CASE("an idle agent fails the task but the command succeeds") {
    const auto r = t::run_cli({"rollout", t::fixture_dir().string(), "--agent", t::agent_cmd("idle_agent"), "--user",
                               t::user_cmd("oracle_user"), "--k", "1", "--out",
                               t::fresh_dir("cli-idle").string(), "--json"});
    CHECK(r.exit_code == 0);
    const auto doc = parse_json_output(r);
    CHECK(doc["episodes"][0]["r_final"] == 0);
    CHECK(doc["episodes"][0]["final_diff"] == 4);
    CHECK(doc["pass_at_k"]["1"] == 0.0);
}

TEST_CASE("verify diffs snapshots") {
    const auto origin = (t::fixture_dir() / "origin.db").string();
    const auto target = (t::fixture_dir() / "target.db").string();
    const auto pkg = t::fixture_dir().string();

    const auto same = t::run_cli({"verify", origin, origin, "--package", pkg, "--json"});
    CHECK(same.exit_code == 0);
    CHECK(parse_json_output(same)["total"] == 0);

    const auto r = t::run_cli({"verify", origin, target, "--package", pkg, "--json"});
    CHECK(r.exit_code == 0);
    const auto doc = parse_json_output(r);
    CHECK(doc["total"] == t::oracle_diff(t::fixture().origin_snapshot.image(), t::fixture().target_snapshot.image(),
                                         t::fixture().diff_config.excluded_columns));
    CHECK(doc["total"] == 4);
    CHECK(doc["r_final"] == 0);
    CHECK(doc["tables"]["flight_bookings"]["added"].size() == 1);
    CHECK(doc["tables"]["flight_bookings"]["removed"].empty());

    const auto text = t::run_cli({"verify", origin, target, "--package", pkg});
    CHECK(text.out.find("flight_bookings") != std::string::npos);

    const auto other = t::fresh_dir("cli-verify") / "other.db";
    Snapshot::from_sql("CREATE TABLE unrelated (a INTEGER);").save(other);
    const auto bad = t::run_cli({"verify", origin, other.string(), "--package", pkg, "--json"});
    CHECK(bad.exit_code == 1);
    CHECK(parse_json_output(bad)["error"]["code"] == "SchemaMismatch");
}

TEST_CASE("score computes group and turn advantages") {
    const auto& g = group();
    const auto out = t::fresh_dir("cli-score") / "advantages.ndjson";
    const auto r = t::run_cli({"score", g.oracle_a.string(), g.partial.string(), g.idle.string(),
                               g.oracle_b.string(), "--package", t::fixture_dir().string(), "--out", out.string(),
                               "--json"});
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const auto doc = parse_json_output(r);
    CHECK(doc["rewards"] == json::array({1.0, 0.0, 0.0, 1.0}));
    const std::vector<double> expected{1.0, -1.0, -1.0, 1.0};
    for (std::size_t i = 0; i < 4; ++i) CHECK(doc["advantages"][i].get<double>() == doctest::Approx(expected[i]));

    int violations = 0;
    for (const auto& e : doc["entries"]) {
        const double a_i = e["A_i"], r_t = e["r_t"], a_it = e["A_it"];
        if (r_t < 0) {
            ++violations;
            CHECK(a_it == doctest::Approx(a_i - 0.1));
        } else {
            CHECK(a_it == doctest::Approx(a_i));
        }
    }
    CHECK(violations >= 2);
    REQUIRE(fs::exists(out));
    const auto text = t::read_file(out);
    CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == doc["entries"].size());
}

TEST_CASE("score edge cases") {
    const auto& g = group();
    const auto single = t::run_cli({"score", g.partial.string(), "--package", t::fixture_dir().string(), "--json"});
    CHECK(single.exit_code == 0);
    CHECK(parse_json_output(single)["advantages"][0] == 0.0);

    const auto dir = t::fresh_dir("cli-score-mixed");
    auto text = t::read_file(g.idle);
    const auto pos = text.find("\"package_id\":\"corporate_travel\"");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, std::string("\"package_id\":\"corporate_travel\"").size(), "\"package_id\":\"elsewhere\"");
    t::write_file(dir / "foreign.ndjson", text);
    const auto mixed = t::run_cli({"score", g.oracle_a.string(), (dir / "foreign.ndjson").string(), "--package",
                                   t::fixture_dir().string(), "--json"});
    CHECK(mixed.exit_code == 2);
    CHECK(parse_json_output(mixed)["error"]["code"] == "MixedPackages");

    const auto missing =
        t::run_cli({"score", (dir / "nope.ndjson").string(), "--package", t::fixture_dir().string()});
    CHECK(missing.exit_code == 2);
}

TEST_CASE("synthesize with canned outputs yields a replayable package") {
    const auto src = t::fixture_src() / "synthesis";
    const auto out = t::fresh_dir("cli-synth") / "pkg";
    const auto r = t::run_cli({"synthesize", (src / "seed_domain.md").string(), out.string(), "--stub",
                               (src / "canned.json").string(), "--strategy", (src / "strategy.json").string(),
                               "--json"});
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const auto doc = parse_json_output(r);
    CHECK(doc["delta0"] == 4);
    CHECK(doc["episode_actions"] == t::script_tool_calls("oracle_agent"));

    const auto v = t::run_cli({"validate", out.string(), "--json"});
    CHECK(v.exit_code == 0);
    const auto replay = t::run_cli({"rollout", out.string(), "--agent", t::agent_cmd("oracle_agent"), "--user",
                                    t::user_cmd("oracle_user"), "--k", "1", "--out",
                                    t::fresh_dir("cli-synth-rollout").string(), "--json"});
    REQUIRE(replay.exit_code == 0);
    CHECK(parse_json_output(replay)["episodes"][0]["final_diff"] == 0);
}

TEST_CASE("synthesize argument and stage errors") {
    const auto src = t::fixture_src() / "synthesis";
    const auto seed = (src / "seed_domain.md").string();
    CHECK(t::run_cli({"synthesize", seed, t::fresh_dir("cli-synth-none").string()}).exit_code == 2);
    CHECK(t::run_cli({"synthesize", seed, t::fresh_dir("cli-synth-both").string(), "--stub",
                      (src / "canned.json").string(), "--port", "cat"})
              .exit_code == 2);

    json canned = load_canned_outputs(src / "canned.json");
    canned["triggers"] = json::array({"CREATE TRIGGER broken AFTER INSERT ON nowhere BEGIN SELECT 1; END;"});
    const auto dir = t::fresh_dir("cli-synth-broken");
    t::write_file(dir / "canned.json", canned.dump());
    const auto r = t::run_cli({"synthesize", seed, (dir / "pkg").string(), "--stub", (dir / "canned.json").string(),
                               "--strategy", (src / "strategy.json").string(), "--max-attempts", "1", "--json"});
    CHECK(r.exit_code == 1);
    const auto doc = parse_json_output(r);
    CHECK(doc["error"]["code"] == "CompilationExhausted");
    CHECK(doc["error"]["message"].get<std::string>().find("stage triggers") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "pkg" / "manifest.json"));
}

}
