// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/metrics.hpp"

#include "polenv/error.hpp"

namespace polenv {

namespace {

// C(a, k) / C(n, k) as a running product; zero when a < k.
double choose_ratio(std::int64_t a, std::int64_t n, std::int64_t k) {
    if (a < k) return 0.0;
    double r = 1.0;
    for (std::int64_t i = 0; i < k; ++i) r *= static_cast<double>(a - i) / static_cast<double>(n - i);
    return r;
}

} // namespace

PassMetrics compute_metrics(const std::vector<TaskOutcome>& outcomes, std::int64_t k) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (outcomes.empty()) throw Error(ErrorCode::InvalidArgument, "no task outcomes");
    PassMetrics m;
    for (const auto& o : outcomes) {
        if (o.successes < 0 || o.successes > o.trials)
            throw Error(ErrorCode::InvalidArgument, o.task_id + ": successes outside [0, trials]");
        if (k > o.trials)
            throw Error(ErrorCode::InsufficientTrials,
                        o.task_id + ": k=" + std::to_string(k) + " exceeds n=" + std::to_string(o.trials));
        m.pass_at_k += 1.0 - choose_ratio(o.trials - o.successes, o.trials, k);
        m.pass_hat_k += choose_ratio(o.successes, o.trials, k);
    }
    m.pass_at_k /= static_cast<double>(outcomes.size());
    m.pass_hat_k /= static_cast<double>(outcomes.size());
    return m;
}

void MetricsCollector::record(const std::string& task_id, bool success) {
    std::lock_guard lock(mu_);
    auto& o = by_task_[task_id];
    o.task_id = task_id;
    ++o.trials;
    if (success) ++o.successes;
}

std::vector<TaskOutcome> MetricsCollector::outcomes() const {
    std::lock_guard lock(mu_);
    std::vector<TaskOutcome> out;
    for (const auto& [_, o] : by_task_) out.push_back(o);
    return out;
}

} // namespace polenv
