// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace polenv::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kTaskFailure = 1;
inline constexpr int kUsage = 2;
inline constexpr int kInternal = 3;

/// Parses argv and runs one subcommand. Reports go to `out`, diagnostics to
/// `err`; with --json exactly one JSON document is written to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace polenv::cli
