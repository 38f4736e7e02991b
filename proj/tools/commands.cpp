// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "polenv/advantage.hpp"
#include "polenv/error.hpp"
#include "polenv/metrics.hpp"
#include "polenv/package.hpp"
#include "polenv/ports.hpp"
#include "polenv/rollout.hpp"
#include "polenv/subprocess.hpp"
#include "polenv/synthesis.hpp"
#include "polenv/verifier.hpp"

namespace fs = std::filesystem;

namespace polenv::cli {

namespace {

/// Failure with an explicit exit code (usage errors and mapped codes).
struct CommandError {
    int exit_code;
    std::string code;
    std::string message;
};

struct Outcome {
    int exit_code = kOk;
    json doc;
    std::string text;
};

void require_path(const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw CommandError{kUsage, "NotFound", std::string(what) + " not found: " + p.string()};
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw CommandError{kUsage, "NotFound", "cannot read " + p.string()};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::setprecision(6) << v;
    return ss.str();
}

// ── validate ────────────────────────────────────────────────────

Outcome cmd_validate(const fs::path& dir) {
    require_path(dir, "package");
    const auto pkg = load_package(dir);
    std::map<std::string, int> kinds;
    for (const auto& t : pkg.env.tool_catalog) ++kinds[std::string(to_string(t.kind))];
    std::vector<std::string> names;
    for (const auto& t : pkg.env.tool_catalog) names.push_back(t.name);

    Outcome o;
    o.doc = {{"package", pkg.name},  {"domain", pkg.domain},     {"tool_count", pkg.env.tool_catalog.size()},
             {"tools_by_kind", kinds}, {"tools", names},         {"delta0", pkg.delta0},
             {"trivial", pkg.trivial}, {"warnings", pkg.warnings}, {"error_codes", pkg.env.error_registry.size()}};
    std::ostringstream ss;
    ss << "package " << pkg.name << " is valid\n";
    ss << "  tools: " << pkg.env.tool_catalog.size();
    for (const auto& [k, n] : kinds) ss << "  " << k << "=" << n;
    ss << "\n  delta0: " << pkg.delta0 << "\n";
    for (const auto& w : pkg.warnings) ss << "  warning: " << w << "\n";
    o.text = ss.str();
    return o;
}

// ── rollout ─────────────────────────────────────────────────────

struct RolloutArgs {
    fs::path package;
    std::string agent_cmd;
    std::string user_cmd;
    std::uint64_t seed = 0;
    int k = 1;
    int parallel = 1;
    fs::path out_dir = "rollouts";
    std::optional<double> lambda_err;
    std::optional<double> epsilon;
};

Trajectory port_failure_trajectory(const TaskPackage& pkg, std::uint64_t seed, const std::string& note) {
    Trajectory t;
    t.id = pkg.name + "-" + std::to_string(seed);
    t.package_id = pkg.name;
    t.seed = seed;
    t.termination = Termination::Deviation;
    t.delta0 = pkg.delta0;
    t.final_diff = pkg.delta0;
    t.lambda_err = pkg.diff_config.lambda_err;
    t.epsilon = pkg.diff_config.epsilon;
    t.port_failure = true;
    t.note = note;
    return t;
}

Outcome cmd_rollout(const RolloutArgs& a) {
    require_path(a.package, "package");
    if (a.k < 1) throw CommandError{kUsage, "InvalidArgument", "--k must be at least 1"};
    const auto agent_argv = split_command(a.agent_cmd);
    const auto user_argv = split_command(a.user_cmd);
    if (agent_argv.empty() || user_argv.empty())
        throw CommandError{kUsage, "InvalidArgument", "--agent and --user need a command"};
    const auto pkg = load_package(a.package);
    const auto timeout = default_port_timeout();

    std::vector<Trajectory> results(static_cast<std::size_t>(a.k));
    auto run_one = [&](std::size_t i) {
        const auto seed = a.seed + i;
        try {
            SubprocessAgentPort agent(agent_argv, timeout);
            SubprocessUserPort user(user_argv, timeout);
            RolloutOptions opts;
            opts.seed = seed;
            opts.lambda_err = a.lambda_err;
            opts.epsilon = a.epsilon;
            results[i] = run_episode(pkg, agent, user, opts);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::PortFailure) throw;
            results[i] = port_failure_trajectory(pkg, seed, e.what());
        }
    };

    const auto workers = std::clamp(a.parallel, 1, a.k);
    if (workers == 1) {
        for (std::size_t i = 0; i < results.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (auto i = next++; i < results.size(); i = next++) run_one(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    fs::create_directories(a.out_dir);
    json episodes = json::array();
    std::int64_t successes = 0;
    bool port_failed = false;
    std::ostringstream ss;
    for (const auto& t : results) {
        const auto path = a.out_dir / (t.id + ".ndjson");
        export_trajectory(t, path);
        successes += t.r_final;
        port_failed = port_failed || t.port_failure;
        episodes.push_back({{"id", t.id},
                            {"seed", t.seed},
                            {"termination", std::string(to_string(t.termination))},
                            {"r_final", t.r_final},
                            {"final_diff", t.final_diff},
                            {"sum_dense", t.sum_dense},
                            {"turns", t.turns.size()},
                            {"port_failure", t.port_failure},
                            {"note", t.note},
                            {"path", path.string()}});
        ss << t.id << "  termination=" << to_string(t.termination) << "  r_final=" << t.r_final
           << "  diff=" << t.final_diff << "  turns=" << t.turns.size();
        if (t.port_failure) ss << "  port_failure: " << t.note;
        ss << "\n";
    }

    json pass_at = json::object();
    json pass_hat = json::object();
    const std::vector<TaskOutcome> outcomes{{pkg.name, successes, a.k}};
    for (int j = 1; j <= a.k; ++j) {
        const auto m = compute_metrics(outcomes, j);
        pass_at[std::to_string(j)] = m.pass_at_k;
        pass_hat[std::to_string(j)] = m.pass_hat_k;
        ss << "pass@" << j << "=" << fmt(m.pass_at_k) << "  pass^" << j << "=" << fmt(m.pass_hat_k) << "\n";
    }

    Outcome o;
    o.exit_code = port_failed ? kTaskFailure : kOk;
    o.doc = {{"package", pkg.name}, {"k", a.k},          {"seed", a.seed},         {"out_dir", a.out_dir.string()},
             {"episodes", episodes}, {"pass_at_k", pass_at}, {"pass_hat_k", pass_hat}};
    if (port_failed) o.doc["error"] = {{"code", "PortFailure"}, {"message", "one or more episodes lost a port"}};
    o.text = ss.str();
    return o;
}

// ── verify ──────────────────────────────────────────────────────

Outcome cmd_verify(const fs::path& a, const fs::path& b, const fs::path& package) {
    require_path(a, "snapshot");
    require_path(b, "snapshot");
    require_path(package, "package");
    const auto pkg = load_package(package);
    const auto sa = Snapshot::from_file(a);
    const auto sb = Snapshot::from_file(b);
    const auto schema = compile_environment(pkg.env.schema_sql, pkg.env.triggers_sql);
    check_conformance(schema, sa);
    check_conformance(schema, sb);
    const auto d = diff(sa, sb, pkg.diff_config);

    Outcome o;
    o.doc = diff_to_json(d);
    o.doc["package"] = pkg.name;
    o.text = diff_to_text(d);
    return o;
}

// ── score ───────────────────────────────────────────────────────

Outcome cmd_score(const std::vector<fs::path>& paths, const fs::path& package, const std::optional<fs::path>& out) {
    require_path(package, "package");
    for (const auto& p : paths) require_path(p, "trajectory");
    const auto pkg = load_package(package);

    std::vector<Trajectory> group;
    try {
        for (const auto& p : paths) group.push_back(rescore_trajectory(import_trajectory(p), pkg));
        const auto table = build_advantage_table(group);
        if (out) {
            std::ofstream f(*out, std::ios::binary);
            if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + out->string());
            f << table.to_ndjson();
        }

        Outcome o;
        json trajs = json::array();
        std::ostringstream ss;
        ss << "group " << table.group_id << "\n";
        for (std::size_t i = 0; i < group.size(); ++i) {
            const auto& t = group[i];
            trajs.push_back({{"id", t.id},
                             {"r_final", t.r_final},
                             {"sum_dense", t.sum_dense},
                             {"termination", std::string(to_string(t.termination))},
                             {"A_i", table.advantages[i]}});
            ss << t.id << "  r_final=" << t.r_final << "  sum_dense=" << fmt(t.sum_dense)
               << "  A_i=" << fmt(table.advantages[i]) << "\n";
        }
        json entries = json::array();
        for (const auto& e : table.entries) entries.push_back(e.to_json());
        ss << table.entries.size() << " turn advantages";
        if (out) ss << " written to " << out->string();
        ss << "\n";
        o.doc = {{"package", pkg.name},
                 {"group_id", table.group_id},
                 {"rewards", table.rewards},
                 {"advantages", table.advantages},
                 {"trajectories", trajs},
                 {"entries", entries}};
        o.text = ss.str();
        return o;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MixedPackages) throw CommandError{kUsage, "MixedPackages", e.what()};
        throw;
    }
}

// ── synthesize ──────────────────────────────────────────────────

struct SynthesizeArgs {
    fs::path seed_domain;
    fs::path out_dir;
    std::optional<fs::path> stub;
    std::optional<std::string> port_cmd;
    std::optional<fs::path> strategy;
    int max_attempts = 3;
    std::uint64_t seed = 0;
};

Outcome cmd_synthesize(const SynthesizeArgs& a) {
    require_path(a.seed_domain, "seed domain");
    if (!a.stub && !a.port_cmd)
        throw CommandError{kUsage, "InvalidArgument", "a generation port is required (--port or --stub)"};
    if (a.stub && a.port_cmd) throw CommandError{kUsage, "InvalidArgument", "--port and --stub are exclusive"};

    SynthesisOptions opts;
    opts.max_attempts = a.max_attempts;
    opts.seed = a.seed;
    if (a.strategy) {
        require_path(*a.strategy, "strategy");
        opts.strategy = load_canned_outputs(*a.strategy);
    }

    std::unique_ptr<GenerationPort> port;
    if (a.stub) {
        require_path(*a.stub, "canned outputs");
        port = std::make_unique<StubGenerationPort>(load_canned_outputs(*a.stub));
    } else {
        const auto argv = split_command(*a.port_cmd);
        if (argv.empty()) throw CommandError{kUsage, "InvalidArgument", "--port command is empty"};
        try {
            port = std::make_unique<SubprocessGenerationPort>(argv, default_port_timeout());
        } catch (const Error& e) {
            throw CommandError{kUsage, "PortFailure", e.what()};
        }
    }

    const auto result = run_synthesis(read_file(a.seed_domain), *port, a.out_dir, opts);
    Outcome o;
    o.doc = {{"package", result.package.name},
             {"out_dir", a.out_dir.string()},
             {"delta0", result.package.delta0},
             {"tool_count", result.package.env.tool_catalog.size()},
             {"episode_actions", result.episode.actions.size()},
             {"adjacency_score", result.log.value("adjacency_score", 0.0)},
             {"stages", result.log.value("stages", json::array())}};
    std::ostringstream ss;
    ss << "synthesized " << result.package.name << " into " << a.out_dir.string() << "\n";
    for (const auto& s : result.log.value("stages", json::array()))
        ss << "  stage " << s.value("stage", "?") << ": attempts=" << s.value("attempts", 0) << "\n";
    ss << "  delta0: " << result.package.delta0 << "  episode actions: " << result.episode.actions.size()
       << "  adjacency: " << fmt(result.log.value("adjacency_score", 0.0)) << "\n";
    o.text = ss.str();
    return o;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    bool json_mode = false;
    for (int i = 1; i < argc; ++i)
        if (std::string_view(argv[i]) == "--json") json_mode = true;

    std::string command = "polenv";
    auto fail = [&](int code, const std::string& name, const std::string& message) {
        err << command << ": " << name << ": " << message << "\n";
        if (json_mode)
            out << json{{"command", command},
                        {"ok", false},
                        {"exit_code", code},
                        {"error", {{"code", name}, {"message", message}}}}
                       .dump(2)
                << "\n";
        return code;
    };

    CLI::App app{"polenv: policy-compiled tool-use environments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "polenv 0.1.0");

    auto* validate = app.add_subcommand("validate", "Load and validate a task package");
    fs::path validate_path;
    validate->add_option("package", validate_path, "Package directory")->required();

    auto* rollout = app.add_subcommand("rollout", "Run k episodes against subprocess agent/user ports");
    RolloutArgs ra;
    double lambda_err = 0.0;
    double epsilon = 0.0;
    rollout->add_option("package", ra.package, "Package directory")->required();
    rollout->add_option("--agent", ra.agent_cmd, "Agent port command")->required();
    rollout->add_option("--user", ra.user_cmd, "User simulator port command")->required();
    rollout->add_option("--k", ra.k, "Episodes to run");
    rollout->add_option("--seed", ra.seed, "Seed of the first episode");
    rollout->add_option("--parallel", ra.parallel, "Concurrent episodes")->check(CLI::PositiveNumber);
    rollout->add_option("--out", ra.out_dir, "Directory for trajectory exports");
    auto* lambda_opt = rollout->add_option("--lambda-err", lambda_err, "Violation penalty override");
    auto* eps_opt = rollout->add_option("--epsilon", epsilon, "Proximity epsilon override");

    auto* verify = app.add_subcommand("verify", "Diff two snapshots under a package's diff config");
    fs::path snap_a, snap_b, verify_pkg;
    verify->add_option("snapshot_a", snap_a, "First snapshot")->required();
    verify->add_option("snapshot_b", snap_b, "Second snapshot")->required();
    verify->add_option("--package", verify_pkg, "Package directory")->required();

    auto* score = app.add_subcommand("score", "Rescore trajectories and compute group advantages");
    std::vector<fs::path> score_paths;
    fs::path score_pkg;
    std::optional<fs::path> score_out;
    score->add_option("trajectories", score_paths, "Trajectory exports forming one group")->required();
    score->add_option("--package", score_pkg, "Package directory")->required();
    score->add_option("--out", score_out, "Write the advantage table export here");

    auto* synth = app.add_subcommand("synthesize", "Synthesize a task package from a seed domain");
    SynthesizeArgs sa;
    synth->add_option("seed_domain", sa.seed_domain, "Seed domain description")->required();
    synth->add_option("out_dir", sa.out_dir, "Output package directory")->required();
    synth->add_option("--port", sa.port_cmd, "Generation port command");
    synth->add_option("--stub", sa.stub, "Canned outputs for the stub port");
    synth->add_option("--strategy", sa.strategy, "Strategy configuration");
    synth->add_option("--max-attempts", sa.max_attempts, "Check-Fix-Verify attempts per stage");
    synth->add_option("--seed", sa.seed, "Generation seed");

    for (auto* sub : {validate, rollout, verify, score, synth}) sub->add_flag("--json", "Emit one JSON document");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << "polenv 0.1.0\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        for (auto* sub : app.get_subcommands()) command = "polenv " + sub->get_name();
        return fail(kUsage, "UsageError", e.what());
    }

    auto* active = app.get_subcommands().front();
    command = "polenv " + active->get_name();
    if (*lambda_opt) ra.lambda_err = lambda_err;
    if (*eps_opt) ra.epsilon = epsilon;

    try {
        Outcome o;
        if (active == validate) o = cmd_validate(validate_path);
        else if (active == rollout) o = cmd_rollout(ra);
        else if (active == verify) o = cmd_verify(snap_a, snap_b, verify_pkg);
        else if (active == score) o = cmd_score(score_paths, score_pkg, score_out);
        else o = cmd_synthesize(sa);

        if (json_mode) {
            o.doc["command"] = command;
            o.doc["ok"] = o.exit_code == kOk;
            o.doc["exit_code"] = o.exit_code;
            out << o.doc.dump(2) << "\n";
        } else {
            out << o.text;
        }
        if (o.exit_code != kOk && o.doc.contains("error"))
            err << command << ": " << o.doc["error"].value("message", "") << "\n";
        return o.exit_code;
    } catch (const CommandError& e) {
        return fail(e.exit_code, e.code, e.message);
    } catch (const Error& e) {
        return fail(kTaskFailure, std::string(to_string(e.code())), e.what());
    } catch (const std::exception& e) {
        return fail(kInternal, "InternalError", e.what());
    }
}

} // namespace polenv::cli
