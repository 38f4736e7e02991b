// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Lexical helpers over DDL text: statement splitting, trigger parsing,
// and the mechanical annotation / probe extraction built on top of them.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace polenv::sql {

enum class TokenKind { Word, QuotedIdent, String, Number, Punct };

struct Token {
    TokenKind kind;
    std::string text;  // unquoted for String / QuotedIdent
    std::size_t begin = 0;
    std::size_t end = 0;

    bool is_word(std::string_view upper_word) const;  // case-insensitive keyword test
    bool is_punct(std::string_view p) const { return kind == TokenKind::Punct && text == p; }
    bool is_identifier() const { return kind == TokenKind::Word || kind == TokenKind::QuotedIdent; }
};

std::vector<Token> tokenize(std::string_view sql);

/// Splits a script into top-level statements. Trigger bodies stay intact,
/// and a trigger whose END lacks a terminating ';' still closes there.
std::vector<std::string> split_statements(std::string_view sql);

struct RaiseMessage {
    std::string code;  // bracketed token, empty when the message has none
    std::string text;  // full literal text
};

struct TriggerDef {
    std::string name;
    std::string timing;  // BEFORE | AFTER | INSTEAD OF
    std::string event;   // INSERT | UPDATE | DELETE
    std::vector<std::string> update_columns;
    std::string table;
    std::string sql;
    std::vector<Token> body;  // tokens between BEGIN and the closing END
    std::vector<RaiseMessage> raises;
};

std::vector<TriggerDef> parse_triggers(std::string_view sql);

/// Precondition lines: one per RAISE message literal, in source order.
std::vector<std::string> precondition_lines(const TriggerDef& trigger);

/// Side-effect lines: one per write statement in the body,
/// e.g. "Updates travel_requests.flight_booking_count".
std::vector<std::string> side_effect_lines(const TriggerDef& trigger);

/// Bracketed codes raised anywhere in `triggers`, sorted and unique.
std::vector<std::string> raised_codes(const std::vector<TriggerDef>& triggers);

/// A count/threshold comparison guarding inserts into `child_table`:
///   (SELECT count_column FROM parent_table WHERE parent_key = NEW.fk_column) >= capacity
struct QuotaRule {
    std::string trigger;
    std::string child_table;
    std::string parent_table;
    std::string parent_key;
    std::string count_column;
    std::string fk_column;
    std::int64_t capacity = 0;
    std::string code;
};

std::vector<QuotaRule> detect_quota_rules(const std::vector<TriggerDef>& triggers);

/// Literal enumerations declared as CHECK(col IN ('a', 'b', ...)),
/// keyed by table then column, in declaration order.
using EnumDomains = std::map<std::string, std::map<std::string, std::vector<std::string>>>;
EnumDomains enum_domains(std::string_view schema_sql);

enum class TableLayer { Reference, Entity, Transaction };

/// Reads "-- L0_REFERENCE Table: name" style layer comments from DDL.
std::map<std::string, TableLayer> table_layers(std::string_view schema_sql);

} // namespace polenv::sql
