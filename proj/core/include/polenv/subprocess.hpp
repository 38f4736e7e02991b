// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

namespace polenv {

/// Splits a command line into argv: whitespace separated, with '...' and
/// "..." quoting and backslash escapes. No shell is involved.
std::vector<std::string> split_command(std::string_view command);

/// POLENV_PORT_TIMEOUT_SECONDS, or 120 s when unset or invalid.
std::chrono::milliseconds default_port_timeout();

/// A child process spoken to in newline-delimited records over its
/// standard streams. stderr is inherited. Failures throw Error(PortFailure).
class Subprocess {
public:
    explicit Subprocess(const std::vector<std::string>& argv);
    ~Subprocess();
    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;

    void write_line(std::string_view line);
    /// Blocks until one full line arrives or `timeout` elapses.
    std::string read_line(std::chrono::milliseconds timeout);

    const std::string& program() const noexcept { return program_; }

private:
    void shutdown() noexcept;

    std::string program_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

} // namespace polenv
