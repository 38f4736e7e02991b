// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace polenv {

enum class ErrorCode {
    InvalidArgument,
    IoFailure,
    EngineError,
    // package_model
    MissingArtifact,
    SchemaMismatch,
    SpoilerLeak,
    CompileFailure,
    InvalidPackage,
    // policy_executor
    UnknownTool,
    MalformedArguments,
    ReadOnlyTable,
    EnvironmentClosed,
    // state_verifier
    UnknownExcludedColumn,
    // rollout_engine
    PortFailure,
    InsufficientTrials,
    DigestMismatch,
    // advantage_engine
    EmptyGroup,
    LengthMismatch,
    MixedPackages,
    // synthesis_pipeline
    CompilationExhausted,
    SeedRejected,
    ExplorationDiverged,
    RedactionIncomplete,
};

/// Stable identifier used in CLI reports, e.g. "SchemaMismatch".
std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace polenv
