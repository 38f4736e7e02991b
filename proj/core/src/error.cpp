// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/error.hpp"

namespace polenv {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::EngineError: return "EngineError";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::SpoilerLeak: return "SpoilerLeak";
    case ErrorCode::CompileFailure: return "CompileFailure";
    case ErrorCode::InvalidPackage: return "InvalidPackage";
    case ErrorCode::UnknownTool: return "UnknownTool";
    case ErrorCode::MalformedArguments: return "MalformedArguments";
    case ErrorCode::ReadOnlyTable: return "ReadOnlyTable";
    case ErrorCode::EnvironmentClosed: return "EnvironmentClosed";
    case ErrorCode::UnknownExcludedColumn: return "UnknownExcludedColumn";
    case ErrorCode::PortFailure: return "PortFailure";
    case ErrorCode::InsufficientTrials: return "InsufficientTrials";
    case ErrorCode::DigestMismatch: return "DigestMismatch";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MixedPackages: return "MixedPackages";
    case ErrorCode::CompilationExhausted: return "CompilationExhausted";
    case ErrorCode::SeedRejected: return "SeedRejected";
    case ErrorCode::ExplorationDiverged: return "ExplorationDiverged";
    case ErrorCode::RedactionIncomplete: return "RedactionIncomplete";
    }
    return "Unknown";
}

} // namespace polenv
