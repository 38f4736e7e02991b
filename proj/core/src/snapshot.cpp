// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/snapshot.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>

#include <sqlite3.h>

#include "polenv/digest.hpp"
#include "polenv/error.hpp"

namespace polenv {

namespace {

std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::string text_or_empty(const Value& v) {
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    return {};
}

std::vector<std::string> table_names(const Database& db) {
    auto& mut = const_cast<Database&>(db);
    auto stmt = mut.prepare(
        "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' "
        "ORDER BY name");
    std::vector<std::string> out;
    while (stmt.step()) out.push_back(text_or_empty(stmt.column(0)));
    return out;
}

} // namespace

const ColumnInfo* TableInfo::find_column(std::string_view column) const {
    for (const auto& c : columns)
        if (c.name == column) return &c;
    return nullptr;
}

std::size_t TableInfo::column_index(std::string_view column) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == column) return i;
    return static_cast<std::size_t>(-1);
}

Affinity affinity_of(std::string_view declared_type) {
    auto t = upper(declared_type);
    if (t.find("INT") != std::string::npos) return Affinity::Integer;
    if (t.find("CHAR") != std::string::npos || t.find("CLOB") != std::string::npos ||
        t.find("TEXT") != std::string::npos)
        return Affinity::Text;
    if (t.empty() || t.find("BLOB") != std::string::npos) return Affinity::Blob;
    if (t.find("REAL") != std::string::npos || t.find("FLOA") != std::string::npos ||
        t.find("DOUB") != std::string::npos)
        return Affinity::Real;
    return Affinity::Numeric;
}

SchemaInfo read_schema(const Database& db) {
    auto& mut = const_cast<Database&>(db);
    SchemaInfo schema;
    for (const auto& name : table_names(db)) {
        TableInfo info;
        info.name = name;
        auto cols = mut.prepare("PRAGMA table_info(" + quote_identifier(name) + ")");
        while (cols.step()) {
            ColumnInfo c;
            c.name = text_or_empty(cols.column(1));
            c.declared_type = text_or_empty(cols.column(2));
            c.affinity = affinity_of(c.declared_type);
            c.not_null = std::get<std::int64_t>(cols.column(3)) != 0;
            c.has_default = !is_null(cols.column(4));
            c.primary_key = std::get<std::int64_t>(cols.column(5)) != 0;
            int autoinc = 0;
            sqlite3_table_column_metadata(db.handle(), "main", name.c_str(), c.name.c_str(), nullptr,
                                          nullptr, nullptr, nullptr, &autoinc);
            c.autoincrement = autoinc != 0;
            info.columns.push_back(std::move(c));
        }
        auto fks = mut.prepare("PRAGMA foreign_key_list(" + quote_identifier(name) + ")");
        while (fks.step()) {
            ForeignKey fk;
            fk.parent_table = text_or_empty(fks.column(2));
            fk.column = text_or_empty(fks.column(3));
            fk.parent_column = text_or_empty(fks.column(4));
            info.foreign_keys.push_back(std::move(fk));
        }
        schema.emplace(name, std::move(info));
    }
    // Implicit REFERENCES parent(...) targets the parent's primary key.
    for (auto& [name, info] : schema) {
        for (auto& fk : info.foreign_keys) {
            if (!fk.parent_column.empty()) continue;
            auto parent = schema.find(fk.parent_table);
            if (parent == schema.end()) continue;
            for (const auto& c : parent->second.columns)
                if (c.primary_key) fk.parent_column = c.name;
        }
    }
    return schema;
}

std::map<std::string, TableData, std::less<>> read_tables(const Database& db) {
    auto& mut = const_cast<Database&>(db);
    std::map<std::string, TableData, std::less<>> out;
    for (auto& [name, info] : read_schema(db)) {
        TableData data;
        data.info = info;
        std::string select = "SELECT ";
        for (std::size_t i = 0; i < info.columns.size(); ++i) {
            if (i) select += ", ";
            select += quote_identifier(info.columns[i].name);
        }
        select += " FROM " + quote_identifier(name);
        // WITHOUT ROWID tables have no rowid; fall back to the primary key order.
        Statement stmt;
        if (mut.try_prepare(select + " ORDER BY rowid", stmt)) stmt = mut.prepare(select + " ORDER BY 1");
        const int n = static_cast<int>(info.columns.size());
        while (stmt.step()) {
            Row row;
            row.reserve(n);
            for (int i = 0; i < n; ++i) row.push_back(stmt.column(i));
            data.rows.push_back(std::move(row));
        }
        out.emplace(name, std::move(data));
    }
    return out;
}

namespace {

std::string canonical_dump_digest(const std::map<std::string, TableData, std::less<>>& tables) {
    std::string dump;
    for (const auto& [name, data] : tables) {
        append_encoded(dump, Value{name});
        append_encoded(dump, Value{static_cast<std::int64_t>(data.info.columns.size())});
        for (const auto& c : data.info.columns) append_encoded(dump, Value{c.name});
        std::vector<std::string> rows;
        rows.reserve(data.rows.size());
        for (const auto& r : data.rows) rows.push_back(encode_row(r));
        std::sort(rows.begin(), rows.end());
        append_encoded(dump, Value{static_cast<std::int64_t>(rows.size())});
        for (const auto& r : rows) append_encoded(dump, Value{r});
    }
    return sha256_hex(dump);
}

} // namespace

std::string state_digest(const Database& db) { return canonical_dump_digest(read_tables(db)); }

struct Snapshot::State {
    std::vector<std::uint8_t> image;
    std::map<std::string, TableData, std::less<>> tables;
    std::string digest;
};

Snapshot Snapshot::from_image(std::vector<std::uint8_t> image) {
    auto db = Database::from_image(image);
    auto state = std::make_shared<State>();
    state->tables = read_tables(db);
    state->digest = canonical_dump_digest(state->tables);
    state->image = std::move(image);
    Snapshot out;
    out.state_ = std::move(state);
    return out;
}

Snapshot Snapshot::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open snapshot " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return from_image(std::move(bytes));
    } catch (const Error& e) {
        throw Error(ErrorCode::IoFailure, path.string() + ": " + e.what());
    }
}

Snapshot Snapshot::capture(const Database& db) {
    auto state = std::make_shared<State>();
    state->image = db.serialize();
    state->tables = read_tables(db);
    state->digest = canonical_dump_digest(state->tables);
    Snapshot out;
    out.state_ = std::move(state);
    return out;
}

Snapshot Snapshot::from_sql(std::string_view script) {
    auto db = Database::open_memory();
    db.exec(script);
    return capture(db);
}

void Snapshot::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write snapshot " + path.string());
    const auto& bytes = image();
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

const std::vector<std::uint8_t>& Snapshot::image() const {
    static const std::vector<std::uint8_t> empty;
    return state_ ? state_->image : empty;
}

const std::map<std::string, TableData, std::less<>>& Snapshot::tables() const {
    static const std::map<std::string, TableData, std::less<>> empty;
    return state_ ? state_->tables : empty;
}

const TableData* Snapshot::find(std::string_view table) const {
    const auto& t = tables();
    auto it = t.find(table);
    return it == t.end() ? nullptr : &it->second;
}

SchemaInfo Snapshot::schema() const {
    SchemaInfo out;
    for (const auto& [name, data] : tables()) out.emplace(name, data.info);
    return out;
}

Database Snapshot::open() const { return Database::from_image(image()); }

const std::string& Snapshot::digest() const {
    static const std::string empty_digest = canonical_dump_digest({});
    return state_ ? state_->digest : empty_digest;
}

} // namespace polenv
