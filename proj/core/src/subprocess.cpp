// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "polenv/error.hpp"

extern char** environ;

namespace polenv {

std::vector<std::string> split_command(std::string_view command) {
    std::vector<std::string> out;
    std::string cur;
    bool in_word = false;
    char quote = 0;
    for (std::size_t i = 0; i < command.size(); ++i) {
        const char c = command[i];
        if (quote) {
            if (c == quote) {
                quote = 0;
            } else if (c == '\\' && quote == '"' && i + 1 < command.size()) {
                cur.push_back(command[++i]);
            } else {
                cur.push_back(c);
            }
            continue;
        }
        if (c == '\'' || c == '"') {
            quote = c;
            in_word = true;
        } else if (c == '\\' && i + 1 < command.size()) {
            cur.push_back(command[++i]);
            in_word = true;
        } else if (c == ' ' || c == '\t' || c == '\n') {
            if (in_word) out.push_back(std::move(cur));
            cur.clear();
            in_word = false;
        } else {
            cur.push_back(c);
            in_word = true;
        }
    }
    if (quote) throw Error(ErrorCode::InvalidArgument, "unterminated quote in command");
    if (in_word) out.push_back(std::move(cur));
    return out;
}

std::chrono::milliseconds default_port_timeout() {
    if (const char* v = std::getenv("POLENV_PORT_TIMEOUT_SECONDS")) {
        char* end = nullptr;
        const double s = std::strtod(v, &end);
        if (end != v && *end == '\0' && s > 0) return std::chrono::milliseconds(static_cast<long long>(s * 1000));
    }
    return std::chrono::seconds(120);
}

namespace {

[[noreturn]] void port_failure(const std::string& what) { throw Error(ErrorCode::PortFailure, what); }

} // namespace

Subprocess::Subprocess(const std::vector<std::string>& argv) {
    if (argv.empty()) port_failure("empty port command");
    program_ = argv.front();

    int in_pipe[2], out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0) port_failure("pipe: " + std::string(std::strerror(errno)));
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        port_failure("pipe: " + std::string(std::strerror(errno)));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    const int rc = posix_spawnp(&pid_, program_.c_str(), &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(in_pipe[0]);
    close(out_pipe[1]);
    if (rc != 0) {
        close(in_pipe[1]);
        close(out_pipe[0]);
        pid_ = -1;
        port_failure("cannot start " + program_ + ": " + std::strerror(rc));
    }
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
}

Subprocess::~Subprocess() { shutdown(); }

void Subprocess::shutdown() noexcept {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
        // Give a well-behaved child a moment to exit on EOF, then insist.
        int status = 0;
        for (int i = 0; i < 50; ++i) {
            if (waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                return;
            }
            usleep(2000);
        }
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
        pid_ = -1;
    }
}

void Subprocess::write_line(std::string_view line) {
    std::string data(line);
    data.push_back('\n');
    std::size_t off = 0;
    // A child that died would otherwise kill us with SIGPIPE.
    std::signal(SIGPIPE, SIG_IGN);
    while (off < data.size()) {
        const auto n = write(to_child_, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            port_failure(program_ + ": write failed: " + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

std::string Subprocess::read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) port_failure(program_ + ": timed out after " + std::to_string(timeout.count()) + " ms");
        pollfd pfd{from_child_, POLLIN, 0};
        const int pr = poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
        if (pr < 0) {
            if (errno == EINTR) continue;
            port_failure(program_ + ": poll failed: " + std::strerror(errno));
        }
        if (pr == 0) continue;
        char chunk[4096];
        const auto n = read(from_child_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            port_failure(program_ + ": read failed: " + std::strerror(errno));
        }
        if (n == 0) port_failure(program_ + ": closed its output");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

} // namespace polenv
