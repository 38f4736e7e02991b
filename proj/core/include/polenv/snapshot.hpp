// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "polenv/database.hpp"
#include "polenv/value.hpp"

namespace polenv {

enum class Affinity { Integer, Real, Numeric, Text, Blob };

struct ColumnInfo {
    std::string name;
    std::string declared_type;
    Affinity affinity = Affinity::Blob;
    bool not_null = false;
    bool has_default = false;
    bool primary_key = false;
    bool autoincrement = false;
};

struct ForeignKey {
    std::string column;
    std::string parent_table;
    std::string parent_column;  // resolved to the parent's primary key when implicit
};

struct TableInfo {
    std::string name;
    std::vector<ColumnInfo> columns;
    std::vector<ForeignKey> foreign_keys;

    const ColumnInfo* find_column(std::string_view column) const;
    std::size_t column_index(std::string_view column) const;  // npos when absent
};

/// Table definitions keyed by name, sqlite internals excluded.
using SchemaInfo = std::map<std::string, TableInfo, std::less<>>;

/// SQLite's affinity rules applied to a declared column type.
Affinity affinity_of(std::string_view declared_type);

SchemaInfo read_schema(const Database& db);

struct TableData {
    TableInfo info;
    std::vector<Row> rows;  // physical (rowid) order
};

/// An immutable relational database image. Copies share storage.
class Snapshot {
public:
    Snapshot() = default;

    static Snapshot from_image(std::vector<std::uint8_t> image);
    static Snapshot from_file(const std::filesystem::path& path);
    static Snapshot capture(const Database& db);
    /// Runs `script` against a fresh in-memory database and captures it.
    static Snapshot from_sql(std::string_view script);

    void save(const std::filesystem::path& path) const;

    const std::vector<std::uint8_t>& image() const;
    const std::map<std::string, TableData, std::less<>>& tables() const;
    const TableData* find(std::string_view table) const;
    SchemaInfo schema() const;

    /// Writable in-memory copy of this image.
    Database open() const;

    /// SHA-256 over the canonical dump: tables sorted by name, rows sorted
    /// by full-tuple byte order.
    const std::string& digest() const;

    bool empty() const noexcept { return !state_; }

private:
    struct State;
    std::shared_ptr<const State> state_;
};

/// Canonical-dump digest computed directly against a live connection.
std::string state_digest(const Database& db);

std::map<std::string, TableData, std::less<>> read_tables(const Database& db);

} // namespace polenv
