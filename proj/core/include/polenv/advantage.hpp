// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polenv/rollout.hpp"
#include "polenv/value.hpp"

namespace polenv {

enum class SurrogateNormalization { Global, PerTrajectory };

struct AdvantageConfig {
    double eps_std = 1e-6;
    double clip_eps = 0.2;
    double beta = 0.0;
    SurrogateNormalization normalization = SurrogateNormalization::Global;
};

/// (R_i - mean) / std with population std; all zeros when std < eps_std.
/// Throws Error(EmptyGroup).
std::vector<double> group_advantages(const std::vector<double>& rewards, double eps_std = 1e-6);

/// A_i + min(r_t, 0) per turn.
std::vector<double> turn_refine(double advantage, const std::vector<double>& dense);

/// mean_t min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A) - beta * mean_t kl.
/// Throws Error(LengthMismatch).
double surrogate_objective(const std::vector<double>& ratios, const std::vector<double>& advantages,
                           double clip_eps, const std::vector<double>& kl_terms, double beta);

/// Group form. Global averages over every turn of the group; PerTrajectory
/// averages each trajectory first, then across trajectories.
double surrogate_objective(const std::vector<std::vector<double>>& ratios,
                           const std::vector<std::vector<double>>& advantages,
                           const std::vector<std::vector<double>>& kl_terms, const AdvantageConfig& cfg);

struct AdvantageEntry {
    std::string trajectory_id;
    std::int64_t turn_index = 0;
    double A_i = 0.0;
    double r_t = 0.0;
    double A_it = 0.0;

    json to_json() const;
};

struct AdvantageTable {
    std::string group_id;
    AdvantageConfig config;
    std::vector<std::string> trajectory_ids;
    std::vector<double> rewards;     // R_final per trajectory
    std::vector<double> advantages;  // A_i per trajectory
    std::vector<AdvantageEntry> entries;  // every agent turn, in order

    std::string to_ndjson() const;
};

/// A_i from r_final; one entry per agent turn with r_t its dense reward
/// (0 for text turns). Throws MixedPackages, EmptyGroup.
AdvantageTable build_advantage_table(const std::vector<Trajectory>& group, const AdvantageConfig& cfg = {});

} // namespace polenv
