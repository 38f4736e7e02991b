// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polenv/value.hpp"

struct sqlite3;
struct sqlite3_stmt;

namespace polenv {

/// A failed engine call: primary/extended result codes plus the message.
struct EngineFailure {
    int code = 0;
    int extended_code = 0;
    std::string message;

    /// True when the failure is a constraint or trigger abort rather than a
    /// resolution/IO problem.
    bool is_constraint() const noexcept;
};

class Statement {
public:
    Statement() = default;
    Statement(sqlite3* db, sqlite3_stmt* stmt) : db_(db), stmt_(stmt) {}
    ~Statement();
    Statement(const Statement&) = delete;
    Statement& operator=(const Statement&) = delete;
    Statement(Statement&& o) noexcept;
    Statement& operator=(Statement&& o) noexcept;

    void bind(int index, const Value& v);
    /// Advances the cursor. Returns true while a row is available.
    /// Throws Error(EngineError) on failure; use try_step for recoverable paths.
    bool step();
    /// Like step(), but reports failure instead of throwing.
    std::optional<EngineFailure> try_step(bool& has_row);

    int column_count() const;
    std::string column_name(int i) const;
    Value column(int i) const;

    sqlite3_stmt* get() const noexcept { return stmt_; }

private:
    sqlite3* db_ = nullptr;
    sqlite3_stmt* stmt_ = nullptr;
};

/// Owning handle to one SQLite connection. Connections here are always
/// in-memory; images move in and out through serialize/deserialize.
class Database {
public:
    static Database open_memory();
    static Database from_image(std::span<const std::uint8_t> image);

    Database() = default;
    ~Database();
    Database(const Database&) = delete;
    Database& operator=(const Database&) = delete;
    Database(Database&& o) noexcept;
    Database& operator=(Database&& o) noexcept;

    void exec(std::string_view sql);
    std::optional<EngineFailure> try_exec(std::string_view sql);

    Statement prepare(std::string_view sql);
    std::optional<EngineFailure> try_prepare(std::string_view sql, Statement& out);

    std::vector<std::uint8_t> serialize() const;

    std::int64_t changes() const;
    std::int64_t last_insert_rowid() const;
    EngineFailure last_failure() const;

    sqlite3* handle() const noexcept { return db_; }
    explicit operator bool() const noexcept { return db_ != nullptr; }

private:
    explicit Database(sqlite3* db) : db_(db) {}
    sqlite3* db_ = nullptr;
};

/// Double-quotes an identifier for safe interpolation into SQL.
std::string quote_identifier(std::string_view name);

} // namespace polenv
