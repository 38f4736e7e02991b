// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "polenv/executor.hpp"
#include "polenv/package.hpp"
#include "polenv/ports.hpp"
#include "polenv/snapshot.hpp"
#include "polenv/value.hpp"

namespace polenv {

enum class CheckStatus { Pass, Fail, Skipped };
std::string_view to_string(CheckStatus s) noexcept;

struct VerificationReport {
    std::string stage;  // policy | tables | triggers | seed_state | episode
    CheckStatus physical = CheckStatus::Pass;
    std::string physical_message;  // engine text on failure
    CheckStatus semantic = CheckStatus::Skipped;
    std::string semantic_message;
    int attempts = 0;
    std::vector<std::string> warnings;

    bool accepted() const noexcept { return physical == CheckStatus::Pass && semantic != CheckStatus::Fail; }
    json to_json() const;
};

// ── Architect ───────────────────────────────────────────────────

struct ArchitectOptions {
    int max_attempts = 3;
    std::uint64_t seed = 0;
    bool semantic_check = false;  // ask the port to review each DDL stage
};

struct ArchitectResult {
    EnvironmentBundle bundle;
    std::string policy_doc;
    std::string analysis;
    std::vector<VerificationReport> reports;
};

/// Table permissions from "-- L<n>_... Table: name" comments: L0/L1 are
/// read_only, L2 and above read_write. Unannotated tables are read_only.
std::map<std::string, Permission> permissions_from_layers(std::string_view schema_sql);

/// Analyze -> policy -> tables -> triggers, with Check-Fix-Verify on the two
/// DDL stages. Throws Error(CompilationExhausted) naming the stage and
/// carrying the last report.
ArchitectResult architect_compile(std::string_view seed_domain, GenerationPort& port, const ArchitectOptions& opts);

/// Physical executability: compile, prepare every trigger program, then per
/// read_write table one invalid write (NULL into NOT NULL columns) and one
/// plausible write inside a rolled-back savepoint. Constraint aborts are
/// expected outcomes; anything else fails the report.
VerificationReport verify_environment(const EnvironmentBundle& bundle);

// ── Set designer ────────────────────────────────────────────────

struct SeedPhase {
    std::string name;
    std::vector<std::string> tags;
};

struct SeedStrategy {
    std::vector<SeedPhase> phases;  // run after the reference phase, in order
    std::vector<std::string> required_tables;
    std::int64_t probe_budget = 32;

    static SeedStrategy from_json(const json& j);
};

struct SeedOutcome {
    Snapshot snapshot;
    std::int64_t accepted = 0;
    std::int64_t rejected = 0;
    json log = json::array();  // one record per proposal
    VerificationReport report;
};

/// Empty schema instance for a bundle (escalation log included).
Snapshot empty_snapshot(const EnvironmentBundle& bundle);

/// Asks the port for seed operations per phase ("reference" first) and
/// applies each through the executor with triggers active. Throws
/// Error(SeedRejected) when a required table ends up without rows.
SeedOutcome seed_initial_state(const EnvironmentBundle& bundle, const SeedStrategy& strategy, GenerationPort& port,
                               std::uint64_t seed = 0);

struct BoundaryProbe {
    ToolCall call;
    bool rejected = false;
    std::string code;  // error code when rejected
    std::string kind;  // quota | quota_follow_up | status_transition

    json to_json() const;
};

struct BoundaryProbeResult {
    std::vector<BoundaryProbe> probes;
    double adjacency_score = 0.0;  // rejected / probes, 0 with no probes

    json to_json() const;
};

/// Candidate single-step writes derived from quota triggers and status
/// enumerations, each on a scratch copy of `s`. An accepted quota probe is
/// followed by the same insert on that copy to expose an N-1 boundary.
BoundaryProbeResult probe_boundary_adjacency(const EnvironmentBundle& bundle, const Snapshot& s,
                                             std::int64_t probe_budget);

// ── Explorer ────────────────────────────────────────────────────

struct TranscriptLine {
    std::string speaker;  // client | consultant
    std::string text;
};

struct EpisodeAction {
    ToolCall call;
    ToolResult result;
};

struct RawEpisode {
    std::string menu;
    std::string goal;
    std::vector<TranscriptLine> transcript;
    std::vector<EpisodeAction> actions;
    Snapshot s_target;
    bool diverged = false;

    json to_json() const;
};

struct ExploreOptions {
    int repetition_threshold = 3;
    int max_consultant_steps = 64;
    std::uint64_t seed = 0;
};

/// Client utterances and consultant actions alternate; consultant tool calls
/// run through the executor and their results are fed back verbatim. The
/// client confirming its goal means emitting the stop token. Throws
/// Error(ExplorationDiverged) on repeated identical rejections or when the
/// turn limit passes without confirmation.
RawEpisode explore_episode(const EnvironmentBundle& bundle, const std::string& policy_doc, const Snapshot& s_origin,
                           GenerationPort& client, GenerationPort& consultant, const RolloutLimits& limits,
                           const ExploreOptions& opts = {});

/// Tool names, plus table and column names shaped like identifiers
/// (containing '_'), plus `extras`. Sorted and unique.
std::vector<std::string> build_redaction_list(const EnvironmentBundle& bundle, const std::vector<std::string>& extras);

/// Goal and client utterances, blank-line separated, with every listed
/// token replaced by "[redacted]" (case-insensitive, longest first). An
/// optional port rewrites the result for fluency. Throws
/// Error(RedactionIncomplete) if any token survives.
std::string project_user_view(const RawEpisode& ep, const std::vector<std::string>& redaction_list,
                              GenerationPort* rewrite = nullptr, std::uint64_t seed = 0);

struct AssembleOptions {
    std::string name = "synthesized";
    std::string domain;
    RolloutLimits limits;
    std::map<std::string, std::string> error_hints;
    std::vector<std::string> extra_redactions;
};

/// Builds and validates a package whose target is the episode's executed
/// final state. Autoincrement keys are excluded and FK columns that point at
/// them dropped.
TaskPackage assemble_package(const EnvironmentBundle& bundle, const std::string& policy_doc, const Snapshot& s_origin,
                             const RawEpisode& ep, const std::string& task_text, const AssembleOptions& opts);

// ── Orchestration ───────────────────────────────────────────────

struct SynthesisOptions {
    int max_attempts = 3;
    std::uint64_t seed = 0;
    json strategy = json::object();
};

struct SynthesisOutcome {
    TaskPackage package;
    RawEpisode episode;
    json log;
};

/// Architect -> verify -> seed -> probe -> explore -> project -> assemble,
/// then writes the package plus episode.json and synthesis_log.json into
/// `out_dir`. Errors carry the failing stage name in their message.
SynthesisOutcome run_synthesis(std::string_view seed_domain, GenerationPort& port,
                               const std::filesystem::path& out_dir, const SynthesisOptions& opts);

/// Canned stub outputs from a JSON file. Entries of the form
/// {"$file": "path"} are replaced by that file's text (relative paths
/// resolve against the JSON file's directory). Entries of the form
/// {"$json": "path", "pointer": "/a/b"} are replaced by that part of the
/// parsed file.
json load_canned_outputs(const std::filesystem::path& path);

/// Tool calls recorded in an episode.json document, in order.
std::vector<ToolCall> episode_calls(const json& episode);

} // namespace polenv
