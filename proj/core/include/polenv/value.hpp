// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace polenv {

using json = nlohmann::json;

struct Blob {
    std::vector<std::uint8_t> bytes;
    auto operator<=>(const Blob&) const = default;
};

/// A single cell value, one alternative per SQLite storage class.
/// std::monostate is SQL NULL.
using Value = std::variant<std::monostate, std::int64_t, double, std::string, Blob>;
using Row = std::vector<Value>;

inline bool is_null(const Value& v) noexcept { return std::holds_alternative<std::monostate>(v); }

json to_json(const Value& v);
Value value_from_json(const json& j);

/// Order-preserving byte encoding of a value. Distinct storage classes never
/// collide, so NULL only equals NULL.
void append_encoded(std::string& out, const Value& v);
std::string encode_row(const Row& row);

/// Human-readable SQL-literal rendering, used in diff reports.
std::string render(const Value& v);

} // namespace polenv
