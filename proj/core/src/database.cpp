// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/database.hpp"

#include <cstring>
#include <utility>

#include <sqlite3.h>

#include "polenv/error.hpp"

namespace polenv {

bool EngineFailure::is_constraint() const noexcept {
    return code == SQLITE_CONSTRAINT;
}

// ── Statement ───────────────────────────────────────────────────

Statement::~Statement() {
    if (stmt_) sqlite3_finalize(stmt_);
}

Statement::Statement(Statement&& o) noexcept
    : db_(std::exchange(o.db_, nullptr)), stmt_(std::exchange(o.stmt_, nullptr)) {}

Statement& Statement::operator=(Statement&& o) noexcept {
    if (this != &o) {
        if (stmt_) sqlite3_finalize(stmt_);
        db_ = std::exchange(o.db_, nullptr);
        stmt_ = std::exchange(o.stmt_, nullptr);
    }
    return *this;
}

void Statement::bind(int index, const Value& v) {
    int rc = SQLITE_OK;
    switch (v.index()) {
    case 0: rc = sqlite3_bind_null(stmt_, index); break;
    case 1: rc = sqlite3_bind_int64(stmt_, index, std::get<std::int64_t>(v)); break;
    case 2: rc = sqlite3_bind_double(stmt_, index, std::get<double>(v)); break;
    case 3: {
        const auto& s = std::get<std::string>(v);
        rc = sqlite3_bind_text64(stmt_, index, s.data(), s.size(), SQLITE_TRANSIENT, SQLITE_UTF8);
        break;
    }
    case 4: {
        const auto& b = std::get<Blob>(v).bytes;
        rc = sqlite3_bind_blob64(stmt_, index, b.data(), b.size(), SQLITE_TRANSIENT);
        break;
    }
    }
    if (rc != SQLITE_OK) throw Error(ErrorCode::EngineError, sqlite3_errmsg(db_));
}

bool Statement::step() {
    bool has_row = false;
    if (auto failure = try_step(has_row)) throw Error(ErrorCode::EngineError, failure->message);
    return has_row;
}

std::optional<EngineFailure> Statement::try_step(bool& has_row) {
    int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) {
        has_row = true;
        return std::nullopt;
    }
    has_row = false;
    if (rc == SQLITE_DONE) return std::nullopt;
    EngineFailure f;
    f.code = rc & 0xff;
    f.extended_code = sqlite3_extended_errcode(db_);
    f.message = sqlite3_errmsg(db_);
    sqlite3_reset(stmt_);
    return f;
}

int Statement::column_count() const { return sqlite3_column_count(stmt_); }

std::string Statement::column_name(int i) const {
    const char* name = sqlite3_column_name(stmt_, i);
    return name ? name : "";
}

Value Statement::column(int i) const {
    switch (sqlite3_column_type(stmt_, i)) {
    case SQLITE_INTEGER: return static_cast<std::int64_t>(sqlite3_column_int64(stmt_, i));
    case SQLITE_FLOAT: return sqlite3_column_double(stmt_, i);
    case SQLITE_TEXT: {
        const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, i));
        return std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, i)));
    }
    case SQLITE_BLOB: {
        const auto* p = static_cast<const std::uint8_t*>(sqlite3_column_blob(stmt_, i));
        auto n = static_cast<std::size_t>(sqlite3_column_bytes(stmt_, i));
        return Blob{std::vector<std::uint8_t>(p, p + n)};
    }
    default: return std::monostate{};
    }
}

// ── Database ────────────────────────────────────────────────────

Database Database::open_memory() {
    sqlite3* db = nullptr;
    int rc = sqlite3_open_v2(":memory:", &db, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
        sqlite3_close(db);
        throw Error(ErrorCode::EngineError, msg);
    }
    Database out(db);
    out.exec("PRAGMA foreign_keys = ON");
    return out;
}

Database Database::from_image(std::span<const std::uint8_t> image) {
    Database out = open_memory();
    if (image.empty()) return out;
    auto* buf = static_cast<unsigned char*>(sqlite3_malloc64(image.size()));
    if (!buf) throw Error(ErrorCode::EngineError, "out of memory");
    std::memcpy(buf, image.data(), image.size());
    int rc = sqlite3_deserialize(out.db_, "main", buf, static_cast<sqlite3_int64>(image.size()),
                                 static_cast<sqlite3_int64>(image.size()),
                                 SQLITE_DESERIALIZE_FREEONCLOSE | SQLITE_DESERIALIZE_RESIZEABLE);
    if (rc != SQLITE_OK) throw Error(ErrorCode::EngineError, sqlite3_errmsg(out.db_));
    // Touch the schema so corrupt images fail here, not on first use.
    if (auto f = out.try_exec("SELECT count(*) FROM sqlite_master"))
        throw Error(ErrorCode::EngineError, "not a database image: " + f->message);
    out.exec("PRAGMA foreign_keys = ON");
    return out;
}

Database::~Database() {
    if (db_) sqlite3_close_v2(db_);
}

Database::Database(Database&& o) noexcept : db_(std::exchange(o.db_, nullptr)) {}

Database& Database::operator=(Database&& o) noexcept {
    if (this != &o) {
        if (db_) sqlite3_close_v2(db_);
        db_ = std::exchange(o.db_, nullptr);
    }
    return *this;
}

void Database::exec(std::string_view sql) {
    if (auto f = try_exec(sql)) throw Error(ErrorCode::EngineError, f->message);
}

std::optional<EngineFailure> Database::try_exec(std::string_view sql) {
    std::string owned(sql);
    char* err = nullptr;
    int rc = sqlite3_exec(db_, owned.c_str(), nullptr, nullptr, &err);
    if (rc == SQLITE_OK) return std::nullopt;
    EngineFailure f;
    f.code = rc & 0xff;
    f.extended_code = sqlite3_extended_errcode(db_);
    f.message = err ? err : sqlite3_errmsg(db_);
    sqlite3_free(err);
    return f;
}

Statement Database::prepare(std::string_view sql) {
    Statement out;
    if (auto f = try_prepare(sql, out)) throw Error(ErrorCode::EngineError, f->message);
    return out;
}

std::optional<EngineFailure> Database::try_prepare(std::string_view sql, Statement& out) {
    sqlite3_stmt* stmt = nullptr;
    int rc = sqlite3_prepare_v2(db_, sql.data(), static_cast<int>(sql.size()), &stmt, nullptr);
    if (rc != SQLITE_OK) {
        sqlite3_finalize(stmt);
        return last_failure();
    }
    out = Statement(db_, stmt);
    return std::nullopt;
}

std::vector<std::uint8_t> Database::serialize() const {
    sqlite3_int64 size = 0;
    unsigned char* data = sqlite3_serialize(db_, "main", &size, 0);
    if (!data) {
        // An untouched in-memory database has no pages yet.
        if (size == 0) return {};
        throw Error(ErrorCode::EngineError, "sqlite3_serialize failed");
    }
    std::vector<std::uint8_t> out(data, data + size);
    sqlite3_free(data);
    return out;
}

std::int64_t Database::changes() const { return sqlite3_changes64(db_); }

std::int64_t Database::last_insert_rowid() const { return sqlite3_last_insert_rowid(db_); }

EngineFailure Database::last_failure() const {
    EngineFailure f;
    f.extended_code = sqlite3_extended_errcode(db_);
    f.code = f.extended_code & 0xff;
    f.message = sqlite3_errmsg(db_);
    return f;
}

std::string quote_identifier(std::string_view name) {
    std::string out = "\"";
    for (char c : name) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace polenv
