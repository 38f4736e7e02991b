// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Builds a loadable task package from text sources:
//   schema.sql triggers.sql origin_seed.sql target_delta.sql
//   manifest.json policy.md task.md
// origin.db is the schema plus origin_seed.sql; target.db additionally applies
// target_delta.sql. Both are written without triggers installed.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "polenv/error.hpp"
#include "polenv/package.hpp"
#include "polenv/snapshot.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw polenv::Error(polenv::ErrorCode::MissingArtifact, p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: polenv-make-fixture <source-dir> <out-dir>\n";
        return 2;
    }
    const fs::path src = argv[1];
    const fs::path out = argv[2];
    try {
        fs::create_directories(out);
        for (const char* f : {"manifest.json", "policy.md", "task.md", "schema.sql", "triggers.sql"})
            fs::copy_file(src / f, out / f, fs::copy_options::overwrite_existing);

        const auto schema = polenv::effective_schema_sql(slurp(src / "schema.sql"));
        const auto seed = slurp(src / "origin_seed.sql");
        const auto delta = slurp(src / "target_delta.sql");
        polenv::Snapshot::from_sql(schema + "\n" + seed).save(out / "origin.db");
        polenv::Snapshot::from_sql(schema + "\n" + seed + "\n" + delta).save(out / "target.db");

        auto pkg = polenv::load_package(out);
        polenv::save_package(pkg, out);
        std::cout << pkg.name << ": " << pkg.env.tool_catalog.size() << " tools, delta0 " << pkg.delta0 << "\n";
        return 0;
    } catch (const polenv::Error& e) {
        std::cerr << "polenv-make-fixture: " << to_string(e.code()) << ": " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "polenv-make-fixture: " << e.what() << "\n";
    }
    return 1;
}
