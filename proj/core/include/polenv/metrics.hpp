// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace polenv {

struct TaskOutcome {
    std::string task_id;
    std::int64_t successes = 0;
    std::int64_t trials = 0;
};

struct PassMetrics {
    double pass_at_k = 0.0;   // at least one of k succeeds
    double pass_hat_k = 0.0;  // all k succeed
};

/// Unbiased estimators averaged over tasks:
///   pass@k = 1 - C(n-c, k)/C(n, k),  pass^k = C(c, k)/C(n, k).
/// Throws InsufficientTrials when k > n for any task, InvalidArgument when
/// k < 1, outcomes is empty, or c is outside [0, n].
PassMetrics compute_metrics(const std::vector<TaskOutcome>& outcomes, std::int64_t k);

/// Serialized collection point for concurrent episodes.
class MetricsCollector {
public:
    void record(const std::string& task_id, bool success);
    std::vector<TaskOutcome> outcomes() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, TaskOutcome> by_task_;
};

} // namespace polenv
