// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "polenv/error.hpp"
#include "polenv/executor.hpp"
#include "polenv/verifier.hpp"
#include "test_support.hpp"

using namespace polenv;
namespace t = polenv::test;

namespace {

ToolCall call(std::string name, json args) { return {std::move(name), std::move(args)}; }

json flight(std::int64_t request, std::string code, std::int64_t cost, std::string cls, std::int64_t dep,
            std::int64_t booked, std::string approval = "NOT_REQUIRED") {
    return {{"travel_request_id", request}, {"flight_code", code},       {"cost", cost},
            {"class", cls},                 {"departure_step", dep},     {"booking_step", booked},
            {"approval_status", approval}};
}

ErrorCode tool_error(Environment& env, const ToolCall& c) {
    try {
        env.execute(c);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a tool-layer error for " << c.tool_name);
    return ErrorCode::InvalidArgument;
}

std::int64_t diff_to_origin(const Environment& env) {
    return diff(env.snapshot(), t::fixture().origin_snapshot, t::fixture().diff_config).total;
}

} // namespace

TEST_SUITE("executor") {

TEST_CASE("a fresh environment equals the origin") {
    auto env = open_environment(t::fixture());
    CHECK(diff_to_origin(env) == 0);
    CHECK(env.state_digest() == t::fixture().origin_snapshot.digest());
    CHECK(env.turn_counter() == 0);
}

TEST_CASE("two handles are isolated") {
    auto a = open_environment(t::fixture());
    auto b = open_environment(t::fixture());
    const auto r = a.execute(call("insert_hotel_bookings",
                                  {{"travel_request_id", 4}, {"hotel_vendor_id", "hv_summit"}, {"cost", 250},
                                   {"booking_step", 25}}));
    REQUIRE(r.success);
    CHECK(diff_to_origin(a) >= 1);
    CHECK(diff_to_origin(b) == 0);
}

TEST_CASE("fourth flight on a full request is rejected by the quota rule") {
    auto env = open_environment(t::fixture());
    const auto before = env.state_digest();
    const auto r = env.execute(call("insert_flight_bookings", flight(1, "UA-104", 200, "ECONOMY", 30, 12)));
    CHECK_FALSE(r.success);
    REQUIRE(r.error);
    CHECK(r.error->code == "QUOTA_EXCEEDED");
    CHECK(r.error->message.find("Maximum 3 flight bookings per travel request") != std::string::npos);
    CHECK(r.error->hint == t::fixture().env.error_registry.at("QUOTA_EXCEEDED"));
    CHECK(r.state_digest == before);
    CHECK(env.state_digest() == before);
}

TEST_CASE("short-notice flight is accepted and flagged by the system") {
    auto env = open_environment(t::fixture());
    const auto r = env.execute(call("insert_flight_bookings", flight(4, "BA-300", 300, "ECONOMY", 26, 25)));
    REQUIRE(r.success);
    CHECK(r.affected == 1);
    REQUIRE(r.inserted_id);
    const auto q = env.execute(call("query_flight_bookings", {{"filters", {{"id", *r.inserted_id}}}}));
    REQUIRE(q.rows.size() == 1);
    CHECK(q.rows[0]["policy_violation_flag"] == 1);
    const auto req = env.execute(call("query_travel_requests", {{"filters", {{"id", 4}}}}));
    CHECK(req.rows[0]["flight_booking_count"] == 2);
}

TEST_CASE("flights above the limit open an approval record") {
    auto env = open_environment(t::fixture());
    // A manager's flight over 1000 with enough notice needs approval.
    auto r = env.execute(call("insert_flight_bookings", flight(2, "DL-311", 1100, "ECONOMY", 30, 15)));
    REQUIRE_FALSE(r.success);
    CHECK(r.error->code == "POLICY_VIOLATION");
    r = env.execute(call("insert_flight_bookings", flight(2, "DL-311", 1100, "ECONOMY", 30, 15, "PENDING")));
    REQUIRE(r.success);
    const auto approvals = env.execute(call("query_approvals", {{"filters", {{"flight_booking_id", *r.inserted_id}}}}));
    REQUIRE(approvals.rows.size() == 1);
    CHECK(approvals.rows[0]["status"] == "PENDING");
    CHECK(approvals.rows[0]["approver_id"].is_null());
}

TEST_CASE("documented rejection codes") {
    auto env = open_environment(t::fixture());
    SUBCASE("cancelling a ticketed flight is irreversible") {
        const auto r = env.execute(call("update_flight_bookings",
                                        {{"filters", {{"id", 5}}},
                                         {"set", {{"status", "CANCELLED"}, {"cancellation_step", 21},
                                                  {"refund_amount", 480}}}}));
        REQUIRE(r.error);
        CHECK(r.error->code == "IRREVERSIBLE");
        CHECK(r.error->violated_rule == "TICKETED flights cannot be cancelled");
    }
    SUBCASE("staff cannot book business class") {
        const auto req = env.execute(call("insert_travel_requests",
                                          {{"user_id", "u_staff_02"}, {"trip_purpose", "Site visit"},
                                           {"current_step", 30}}));
        REQUIRE(req.success);
        const auto r = env.execute(
            call("insert_flight_bookings", flight(*req.inserted_id, "UA-500", 400, "BUSINESS", 40, 30)));
        REQUIRE(r.error);
        CHECK(r.error->code == "POLICY_VIOLATION");
        CHECK(r.error->message.find("non-ECONOMY") != std::string::npos);
    }
    SUBCASE("wrong refund is a calculation error") {
        const auto r = env.execute(call("update_flight_bookings",
                                        {{"filters", {{"id", 1}}},
                                         {"set", {{"status", "CANCELLED"}, {"cancellation_step", 13},
                                                  {"refund_amount", 100}}}}));
        REQUIRE(r.error);
        CHECK(r.error->code == "CALCULATION_ERROR");
    }
    SUBCASE("correct early refund cancels and frees a quota slot") {
        const auto r = env.execute(call("update_flight_bookings",
                                        {{"filters", {{"id", 1}}},
                                         {"set", {{"status", "CANCELLED"}, {"cancellation_step", 13},
                                                  {"refund_amount", 300}}}}));
        REQUIRE(r.success);
        const auto req = env.execute(call("query_travel_requests", {{"filters", {{"id", 1}}}}));
        CHECK(req.rows[0]["flight_booking_count"] == 2);
    }
    SUBCASE("self-approval is a conflict of interest") {
        const auto r = env.execute(
            call("update_approvals", {{"filters", {{"id", 1}}}, {"set", {{"approver_id", "u_mgr_03"}}}}));
        REQUIRE(r.error);
        CHECK(r.error->code == "CONFLICT_OF_INTEREST");
    }
    SUBCASE("approval by a director tickets the flight") {
        const auto r = env.execute(call("update_approvals", {{"filters", {{"id", 1}}},
                                                             {"set", {{"approver_id", "u_history_01"},
                                                                      {"status", "APPROVED"}}}}));
        REQUIRE(r.success);
        const auto f = env.execute(call("query_flight_bookings", {{"filters", {{"id", 4}}}}));
        CHECK(f.rows[0]["status"] == "TICKETED");
        CHECK(f.rows[0]["approval_status"] == "APPROVED");
    }
}

TEST_CASE("read-only tables reject writes before the engine") {
    auto env = open_environment(t::fixture());
    CHECK(tool_error(env, call("update_users", {{"filters", {{"id", "u_staff_02"}}}, {"set", {{"active", 0}}}})) ==
          ErrorCode::ReadOnlyTable);
    CHECK(tool_error(env, call("insert_companies", {{"id", "x"}, {"name", "X"}})) == ErrorCode::ReadOnlyTable);
    const auto r = env.try_execute(call("update_users", {{"filters", {{"id", "u_staff_02"}}}, {"set", {{"active", 0}}}}));
    CHECK_FALSE(r.success);
    CHECK(r.error->code == kUnclassified);
    CHECK(r.error->message.find("ReadOnlyTable") != std::string::npos);
    CHECK(diff_to_origin(env) == 0);
}

TEST_CASE("unknown tools and malformed arguments") {
    auto env = open_environment(t::fixture());
    CHECK(tool_error(env, call("delete_flight_bookings", {{"filters", {{"id", 1}}}})) == ErrorCode::UnknownTool);
    CHECK(tool_error(env, call("book_everything", json::object())) == ErrorCode::UnknownTool);
    CHECK(tool_error(env, call("insert_flight_bookings", {{"travel_request_id", "four"}})) ==
          ErrorCode::MalformedArguments);
    CHECK(tool_error(env, call("insert_flight_bookings", {{"seat", "12A"}})) == ErrorCode::MalformedArguments);
    CHECK(tool_error(env, call("query_users", {{"filters", {{"nickname", "x"}}}})) == ErrorCode::MalformedArguments);
    CHECK(tool_error(env, call("query_users", {{"limit", 0}})) == ErrorCode::MalformedArguments);
    CHECK(tool_error(env, call("update_approvals", {{"filters", json::object()}, {"set", {{"status", "DENIED"}}}})) ==
          ErrorCode::MalformedArguments);
    CHECK(tool_error(env, call("insert_flight_bookings", {{"cost", json::array({1})}})) ==
          ErrorCode::MalformedArguments);
    CHECK(tool_error(env, call("insert_flight_bookings", {{"id", 99}, {"travel_request_id", 4}})) ==
          ErrorCode::MalformedArguments);
    CHECK(tool_error(env, call("update_approvals", {{"filters", {{"id", 1}}}, {"set", {{"id", 99}}}})) ==
          ErrorCode::MalformedArguments);
    const auto r = env.try_execute(call("update_hotel_bookings", {{"filters", {{"id", 1}}}, {"set", {{"id", 7}}}}));
    CHECK_FALSE(r.success);
    CHECK(r.error->code == kUnclassified);
    CHECK(diff_to_origin(env) == 0);
}

TEST_CASE("queries") {
    auto env = open_environment(t::fixture());
    SUBCASE("equality with no match") {
        const auto r = env.execute(call("query_users", {{"filters", {{"id", "nobody"}}}}));
        CHECK(r.success);
        CHECK(r.rows.empty());
        CHECK(r.affected == 0);
    }
    SUBCASE("operators, ordering and limits") {
        const auto r = env.execute(call("query_flight_bookings", {{"filters", {{"cost", {{"op", ">="}, {"value", 320}}}}},
                                                                 {"order_by", "cost"},
                                                                 {"descending", true},
                                                                 {"limit", 2}}));
        REQUIRE(r.rows.size() == 2);
        CHECK(r.rows[0]["cost"] == 1200);
        CHECK(r.rows[1]["cost"] == 480);
    }
    SUBCASE("null equality") {
        const auto r = env.execute(call("query_approvals", {{"filters", {{"approver_id", nullptr}}}}));
        CHECK(r.rows.size() == 1);
    }
    SUBCASE("integral floats are accepted for integer columns") {
        const auto r = env.execute(call("query_travel_requests", {{"filters", {{"id", 4.0}}}}));
        CHECK(r.rows.size() == 1);
    }
}

TEST_CASE("parse_engine_error") {
    const std::map<std::string, std::string> reg{{"IRREVERSIBLE", "final"}};
    auto p = parse_engine_error("[IRREVERSIBLE] TICKETED flights cannot be cancelled", reg);
    CHECK(p.code == "IRREVERSIBLE");
    CHECK(p.violated_rule == "TICKETED flights cannot be cancelled");
    CHECK(p.hint == "final");
    p = parse_engine_error("disk I/O error", reg);
    CHECK(p.code == kUnclassified);
    CHECK(p.message == "disk I/O error");
    p = parse_engine_error("[CALCULATION_ERROR] Late flight cancellation (>2 steps from booking) gets 50", reg);
    CHECK(p.code == "CALCULATION_ERROR");
    CHECK(p.hint.empty());
}

TEST_CASE("snapshots are immutable copies") {
    auto env = open_environment(t::fixture());
    const auto before = env.snapshot();
    CHECK(diff(before, t::fixture().origin_snapshot, t::fixture().diff_config).total == 0);
    REQUIRE(env.execute(call("transfer_to_human_agents", {{"summary", "Traveler disputes policy"}})).success);
    const auto after = env.snapshot();
    CHECK(diff(before, after, t::fixture().diff_config).total >= 1);
    CHECK(diff(before, t::fixture().origin_snapshot, t::fixture().diff_config).total == 0);
    CHECK(after.find("escalations")->rows.size() == 1);
}

TEST_CASE("reset returns to the origin") {
    auto env = open_environment(t::fixture());
    SUBCASE("after a write") {
        REQUIRE(env.execute(call("insert_flight_bookings", flight(4, "BA-300", 300, "ECONOMY", 40, 25))).success);
        env.reset();
        CHECK(diff_to_origin(env) == 0);
    }
    SUBCASE("on a fresh environment") {
        env.reset();
        CHECK(diff_to_origin(env) == 0);
        CHECK(env.state_digest() == t::fixture().origin_snapshot.digest());
    }
    SUBCASE("after an error result") {
        REQUIRE_FALSE(env.execute(call("insert_flight_bookings", flight(1, "UA-104", 200, "ECONOMY", 30, 12))).success);
        env.reset();
        CHECK(diff_to_origin(env) == 0);
    }
}

TEST_CASE("closed environments refuse work") {
    auto env = open_environment(t::fixture());
    env.close();
    CHECK(env.closed());
    CHECK(tool_error(env, call("query_users", json::object())) == ErrorCode::EnvironmentClosed);
}

TEST_CASE("seed writes bypass permissions but not triggers") {
    auto env = open_environment(t::fixture());
    auto r = env.seed_write(call("insert_users", {{"id", "u_new"}, {"company_id", "comp_alpha"}, {"user_level", "VP"}}));
    CHECK(r.success);
    r = env.seed_write(call("insert_travel_requests",
                            {{"user_id", "u_inactive_06"}, {"trip_purpose", "x"}, {"current_step", 1}}));
    REQUIRE(r.error);
    CHECK(r.error->code == "PREREQ_FAIL");
}

TEST_CASE("the oracle script's calls reach the target") {
    auto env = open_environment(t::fixture());
    int violations = 0;
    const auto script = t::script("oracle_agent");
    for (const auto& a : script["actions"]) {
        if (!a.contains("tool_call")) continue;
        const auto r = env.execute(ToolCall::from_json(a["tool_call"]));
        if (!r.success) ++violations;
    }
    CHECK(violations == 1);
    CHECK(diff(env.snapshot(), t::fixture().target_snapshot, t::fixture().diff_config).total == 0);
}

TEST_CASE("tool results round-trip through JSON") {
    auto env = open_environment(t::fixture());
    const auto r = env.execute(call("insert_flight_bookings", flight(1, "UA-104", 200, "ECONOMY", 30, 12)));
    CHECK(ToolResult::from_json(r.to_json()) == r);
    const auto q = env.execute(call("query_companies", json::object()));
    CHECK(ToolResult::from_json(q.to_json()) == q);
}

}
