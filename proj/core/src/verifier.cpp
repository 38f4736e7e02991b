// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "polenv/digest.hpp"
#include "polenv/error.hpp"

namespace polenv {

Value normalize_value(const Value& v, const FloatCompare& fc) {
    const auto* d = std::get_if<double>(&v);
    if (!d) return v;
    double x = *d;
    if (fc.decimal_places) {
        const double scale = std::pow(10.0, *fc.decimal_places);
        x = std::round(x * scale) / scale;
    }
    // 2^63 is exactly representable; anything below it fits in int64.
    constexpr double kLimit = 9223372036854775808.0;
    if (std::isfinite(x) && x == std::trunc(x) && x >= -kLimit && x < kLimit)
        return static_cast<std::int64_t>(x);
    return x;
}

namespace {

bool tuple_less(const CanonicalTuple& a, const CanonicalTuple& b) { return a.key < b.key; }

struct Remapper {
    const Snapshot& snap;
    const DiffConfig& cfg;
    // Per table: which column indices survive, and which are remapped FKs.
    struct Plan {
        std::vector<std::size_t> keep;
        std::map<std::size_t, const ForeignKey*> remap;
    };
    std::map<std::string, Plan, std::less<>> plans;
    std::map<std::pair<std::string, std::size_t>, std::string> memo;
    std::set<std::pair<std::string, std::size_t>> active;

    Row project(const std::string& table, std::size_t row_index) {
        const auto& data = *snap.find(table);
        const auto& plan = plans.at(table);
        const auto& row = data.rows[row_index];
        Row out;
        out.reserve(plan.keep.size());
        for (auto col : plan.keep) {
            auto it = plan.remap.find(col);
            if (it == plan.remap.end() || is_null(row[col])) {
                out.push_back(normalize_value(row[col], cfg.float_compare));
                continue;
            }
            out.emplace_back(reference_token(*it->second, row[col]));
        }
        return out;
    }

    std::string reference_token(const ForeignKey& fk, const Value& value) {
        const auto* parent = snap.find(fk.parent_table);
        if (!parent) return "<dangling>";
        const auto pcol = parent->info.column_index(fk.parent_column);
        if (pcol == std::string::npos) return "<dangling>";
        const auto want = normalize_value(value, cfg.float_compare);
        for (std::size_t i = 0; i < parent->rows.size(); ++i) {
            if (normalize_value(parent->rows[i][pcol], cfg.float_compare) != want) continue;
            return row_hash(fk.parent_table, i);
        }
        return "<dangling>";
    }

    std::string row_hash(const std::string& table, std::size_t row_index) {
        auto key = std::make_pair(table, row_index);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        if (!active.insert(key).second) return "<cycle>";
        auto h = "#" + sha256_hex(table + '\0' + encode_row(project(table, row_index)));
        active.erase(key);
        memo.emplace(key, h);
        return h;
    }
};

} // namespace

CanonicalRelationSet canonicalize(const Snapshot& s, const DiffConfig& cfg) {
    for (const auto& [table, cols] : cfg.excluded_columns) {
        const auto* data = s.find(table);
        for (const auto& col : cols)
            if (!data || !data->info.find_column(col))
                throw Error(ErrorCode::UnknownExcludedColumn, table + "." + col);
    }

    Remapper rm{s, cfg, {}, {}, {}};
    for (const auto& [name, data] : s.tables()) {
        Remapper::Plan plan;
        const auto& cols = data.info.columns;
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (cfg.excluded(name, cols[i].name)) continue;
            const ForeignKey* target = nullptr;
            for (const auto& fk : data.info.foreign_keys)
                if (fk.column == cols[i].name && cfg.excluded(fk.parent_table, fk.parent_column)) target = &fk;
            if (target && cfg.fk_mode == FkMode::Drop) continue;
            if (target) plan.remap.emplace(i, target);
            plan.keep.push_back(i);
        }
        rm.plans.emplace(name, std::move(plan));
    }

    CanonicalRelationSet out;
    for (const auto& [name, data] : s.tables()) {
        CanonicalTable t;
        for (auto i : rm.plans.at(name).keep) t.columns.push_back(data.info.columns[i].name);
        t.tuples.reserve(data.rows.size());
        for (std::size_t r = 0; r < data.rows.size(); ++r) {
            auto values = rm.project(name, r);
            auto key = encode_row(values);
            t.tuples.push_back({std::move(key), std::move(values)});
        }
        std::sort(t.tuples.begin(), t.tuples.end(), tuple_less);
        out.emplace(name, std::move(t));
    }
    return out;
}

CanonicalRelationSet canonicalize(const CanonicalRelationSet& c, const DiffConfig& cfg) {
    CanonicalRelationSet out;
    for (const auto& [name, table] : c) {
        CanonicalTable t;
        t.columns = table.columns;
        for (const auto& tuple : table.tuples) {
            Row values;
            for (const auto& v : tuple.values) values.push_back(normalize_value(v, cfg.float_compare));
            auto key = encode_row(values);
            t.tuples.push_back({std::move(key), std::move(values)});
        }
        std::sort(t.tuples.begin(), t.tuples.end(), tuple_less);
        out.emplace(name, std::move(t));
    }
    return out;
}

SnapshotDiff diff(const CanonicalRelationSet& a, const CanonicalRelationSet& b) {
    for (const auto& [name, _] : a)
        if (!b.count(name)) throw Error(ErrorCode::SchemaMismatch, name);
    for (const auto& [name, _] : b)
        if (!a.count(name)) throw Error(ErrorCode::SchemaMismatch, name);

    SnapshotDiff out;
    for (const auto& [name, ta] : a) {
        const auto& tb = b.find(name)->second;
        if (ta.columns != tb.columns) throw Error(ErrorCode::SchemaMismatch, name + " (column sets differ)");
        out.columns[name] = ta.columns;

        TableDiff td;
        std::size_t i = 0, j = 0;
        while (i < ta.tuples.size() || j < tb.tuples.size()) {
            if (j == tb.tuples.size() || (i < ta.tuples.size() && ta.tuples[i].key < tb.tuples[j].key)) {
                td.removed.push_back(ta.tuples[i++].values);
            } else if (i == ta.tuples.size() || tb.tuples[j].key < ta.tuples[i].key) {
                td.added.push_back(tb.tuples[j++].values);
            } else {
                ++i;
                ++j;
            }
        }
        const auto n = static_cast<std::int64_t>(td.added.size() + td.removed.size());
        if (n > 0) {
            out.total += n;
            out.per_table.emplace(name, std::move(td));
        }
    }
    return out;
}

SnapshotDiff diff(const Snapshot& a, const Snapshot& b, const DiffConfig& cfg) {
    return diff(canonicalize(a, cfg), canonicalize(b, cfg));
}

int final_reward(const SnapshotDiff& d) noexcept { return d.total == 0 ? 1 : 0; }

double proximity(std::int64_t d_t, std::int64_t delta0, double eps) noexcept {
    if (delta0 == 0) return d_t == 0 ? 1.0 : 0.0;
    if (d_t == 0) return 1.0;
    const double capped = static_cast<double>(std::min(d_t, delta0));
    const double p = 1.0 - capped / (static_cast<double>(delta0) + eps);
    return std::clamp(p, 0.0, 1.0);
}

double dense_reward(double p_t, double p_prev, bool violation, double lambda_err) noexcept {
    return violation ? -lambda_err : p_t - p_prev;
}

json diff_to_json(const SnapshotDiff& d) {
    json tables = json::object();
    for (const auto& [name, td] : d.per_table) {
        auto rows = [](const std::vector<Row>& src) {
            json arr = json::array();
            for (const auto& r : src) {
                json row = json::array();
                for (const auto& v : r) row.push_back(to_json(v));
                arr.push_back(std::move(row));
            }
            return arr;
        };
        tables[name] = {{"columns", d.columns.at(name)},
                        {"added", rows(td.added)},
                        {"removed", rows(td.removed)}};
    }
    return {{"total", d.total}, {"r_final", final_reward(d)}, {"tables", tables}};
}

std::string diff_to_text(const SnapshotDiff& d) {
    std::ostringstream os;
    auto line = [&](char sign, const Row& r) {
        os << "  " << sign << " (";
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? ", " : "") << render(r[i]);
        os << ")\n";
    };
    for (const auto& [name, td] : d.per_table) {
        os << name << ": +" << td.added.size() << " -" << td.removed.size() << "\n";
        os << "  columns: ";
        const auto& cols = d.columns.at(name);
        for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? ", " : "") << cols[i];
        os << "\n";
        for (const auto& r : td.removed) line('-', r);
        for (const auto& r : td.added) line('+', r);
    }
    os << "total: " << d.total << "\n";
    os << "r_final: " << final_reward(d) << "\n";
    return os.str();
}

} // namespace polenv
