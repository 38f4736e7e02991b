// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>

#include "polenv/sql_text.hpp"
#include "test_support.hpp"

using namespace polenv;
namespace t = polenv::test;

TEST_SUITE("sql_text") {

TEST_CASE("split_statements keeps trigger bodies whole") {
    const auto stmts = sql::split_statements(
        "CREATE TABLE a (x INTEGER); -- note; here\n"
        "CREATE TRIGGER tr AFTER INSERT ON a BEGIN UPDATE a SET x = 1; SELECT 'a;b'; END;\n"
        "INSERT INTO a VALUES (1);");
    REQUIRE(stmts.size() == 3);
    CHECK(stmts[1].find("SELECT 'a;b'") != std::string::npos);
    CHECK(stmts[1].find("END") != std::string::npos);
}

TEST_CASE("split_statements closes an unterminated trigger at END") {
    const auto stmts = sql::split_statements(
        "CREATE TRIGGER t1 AFTER INSERT ON a BEGIN SELECT 1; END\n"
        "CREATE TRIGGER t2 AFTER INSERT ON a BEGIN SELECT 2; END;");
    CHECK(stmts.size() == 2);
}

TEST_CASE("fixture triggers parse with their tables and events") {
    const auto defs = sql::parse_triggers(t::fixture().env.triggers_sql);
    CHECK(defs.size() == 17);
    auto find = [&](std::string_view name) {
        return std::find_if(defs.begin(), defs.end(), [&](const auto& d) { return d.name == name; });
    };
    auto quota = find("enforce_flight_booking_quota");
    REQUIRE(quota != defs.end());
    CHECK(quota->timing == "BEFORE");
    CHECK(quota->event == "INSERT");
    CHECK(quota->table == "flight_bookings");
    REQUIRE(quota->raises.size() == 1);
    CHECK(quota->raises[0].code == "QUOTA_EXCEEDED");

    auto cancel = find("validate_flight_cancellation");
    REQUIRE(cancel != defs.end());
    CHECK(cancel->event == "UPDATE");
    CHECK(cancel->update_columns == std::vector<std::string>{"status"});
}

TEST_CASE("raised codes are the bracketed tokens, sorted and unique") {
    const auto codes = sql::raised_codes(sql::parse_triggers(t::fixture().env.triggers_sql));
    const std::vector<std::string> expected{"AUTHORITY_ERROR",   "CALCULATION_ERROR", "CALCULATION_REQUIRED",
                                            "CONFLICT_OF_INTEREST", "IMMUTABLE",     "IRREVERSIBLE",
                                            "LOGIC_ERROR",       "POLICY_VIOLATION",  "PREREQ_FAIL",
                                            "PROVENANCE_REQUIRED", "QUOTA_EXCEEDED", "REQUIRED_FIELD",
                                            "SYSTEM_CONTROL",    "SYSTEM_ERROR"};
    CHECK(codes == expected);
}

TEST_CASE("quota rules are detected for both booking tables") {
    const auto rules = sql::detect_quota_rules(sql::parse_triggers(t::fixture().env.triggers_sql));
    REQUIRE(rules.size() == 2);
    for (const auto& r : rules) {
        CHECK(r.parent_table == "travel_requests");
        CHECK(r.parent_key == "id");
        CHECK(r.fk_column == "travel_request_id");
        CHECK(r.code == "QUOTA_EXCEEDED");
        if (r.child_table == "flight_bookings") {
            CHECK(r.capacity == 3);
            CHECK(r.count_column == "flight_booking_count");
        } else {
            CHECK(r.child_table == "hotel_bookings");
            CHECK(r.capacity == 2);
            CHECK(r.count_column == "hotel_booking_count");
        }
    }
}

TEST_CASE("side effect lines name the written table and columns") {
    const auto defs = sql::parse_triggers(t::fixture().env.triggers_sql);
    auto it = std::find_if(defs.begin(), defs.end(),
                           [](const auto& d) { return d.name == "recalc_flight_quota_after_status_change"; });
    REQUIRE(it != defs.end());
    const auto lines = sql::side_effect_lines(*it);
    REQUIRE(lines.size() == 1);
    CHECK(lines[0].find("travel_requests") != std::string::npos);
    CHECK(lines[0].find("flight_booking_count") != std::string::npos);
}

TEST_CASE("enum domains and layers come from the DDL text") {
    const auto& schema = t::fixture().env.schema_sql;
    const auto domains = sql::enum_domains(schema);
    CHECK(domains.at("flight_bookings").at("status") ==
          std::vector<std::string>{"PENDING", "APPROVED", "TICKETED", "CANCELLED"});
    CHECK(domains.at("preferred_vendors").at("vendor_type") == std::vector<std::string>{"PREFERRED", "STANDARD"});

    const auto layers = sql::table_layers(schema);
    CHECK(layers.size() == 9);
    CHECK(layers.at("flight_classes") == sql::TableLayer::Reference);
    CHECK(layers.at("users") == sql::TableLayer::Entity);
    CHECK(layers.at("approvals") == sql::TableLayer::Transaction);
}

TEST_CASE("tokenizer handles quoted identifiers and escaped quotes") {
    const auto toks = sql::tokenize("SELECT \"a b\", 'it''s' FROM x -- c\n/* d */ ;");
    REQUIRE(toks.size() == 7);
    CHECK(toks[1].kind == sql::TokenKind::QuotedIdent);
    CHECK(toks[1].text == "a b");
    CHECK(toks[3].kind == sql::TokenKind::String);
    CHECK(toks[3].text == "it's");
}

}
