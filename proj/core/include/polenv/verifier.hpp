// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "polenv/package.hpp"
#include "polenv/snapshot.hpp"
#include "polenv/value.hpp"

namespace polenv {

/// One canonical row: normalized values plus their order-preserving encoding.
struct CanonicalTuple {
    std::string key;
    Row values;
};

struct CanonicalTable {
    std::vector<std::string> columns;    // surviving columns, schema order
    std::vector<CanonicalTuple> tuples;  // sorted by key; duplicates kept
};

using CanonicalRelationSet = std::map<std::string, CanonicalTable, std::less<>>;

/// Storage-class normalization: integral reals become integers, reals are
/// rounded first when the config asks for it.
Value normalize_value(const Value& v, const FloatCompare& fc);

/// Throws Error(UnknownExcludedColumn) for exclusions the snapshot lacks.
CanonicalRelationSet canonicalize(const Snapshot& s, const DiffConfig& cfg);

/// Re-normalizes and re-sorts an already canonical set (idempotent).
CanonicalRelationSet canonicalize(const CanonicalRelationSet& c, const DiffConfig& cfg);

struct TableDiff {
    std::vector<Row> added;    // present in b only
    std::vector<Row> removed;  // present in a only
};

struct SnapshotDiff {
    std::map<std::string, std::vector<std::string>> columns;
    std::map<std::string, TableDiff> per_table;  // only tables with changes
    std::int64_t total = 0;
};

/// Multiset symmetric difference per table. Throws Error(SchemaMismatch) when
/// the two sides disagree on tables or surviving columns.
SnapshotDiff diff(const CanonicalRelationSet& a, const CanonicalRelationSet& b);
SnapshotDiff diff(const Snapshot& a, const Snapshot& b, const DiffConfig& cfg);

int final_reward(const SnapshotDiff& d) noexcept;
double proximity(std::int64_t d_t, std::int64_t delta0, double eps) noexcept;
double dense_reward(double p_t, double p_prev, bool violation, double lambda_err) noexcept;

json diff_to_json(const SnapshotDiff& d);
std::string diff_to_text(const SnapshotDiff& d);

} // namespace polenv
