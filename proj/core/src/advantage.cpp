// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/advantage.hpp"

#include <algorithm>
#include <cmath>

#include "polenv/error.hpp"

namespace polenv {

std::vector<double> group_advantages(const std::vector<double>& rewards, double eps_std) {
    if (rewards.empty()) throw Error(ErrorCode::EmptyGroup, "group has no rewards");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / n);
    std::vector<double> out(rewards.size(), 0.0);
    if (sd < eps_std) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
    return out;
}

std::vector<double> turn_refine(double advantage, const std::vector<double>& dense) {
    std::vector<double> out;
    out.reserve(dense.size());
    for (double r : dense) out.push_back(r < 0 ? advantage + r : advantage);
    return out;
}

namespace {

double clipped_term(double ratio, double a, double clip_eps) {
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    return std::min(ratio * a, clipped * a);
}

} // namespace

double surrogate_objective(const std::vector<double>& ratios, const std::vector<double>& advantages,
                           double clip_eps, const std::vector<double>& kl_terms, double beta) {
    if (ratios.size() != advantages.size() || ratios.size() != kl_terms.size())
        throw Error(ErrorCode::LengthMismatch, "ratios, advantages and kl terms differ in length");
    if (ratios.empty()) return 0.0;
    double surrogate = 0.0, kl = 0.0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        surrogate += clipped_term(ratios[i], advantages[i], clip_eps);
        kl += kl_terms[i];
    }
    const double n = static_cast<double>(ratios.size());
    return surrogate / n - beta * (kl / n);
}

double surrogate_objective(const std::vector<std::vector<double>>& ratios,
                           const std::vector<std::vector<double>>& advantages,
                           const std::vector<std::vector<double>>& kl_terms, const AdvantageConfig& cfg) {
    if (ratios.size() != advantages.size() || ratios.size() != kl_terms.size())
        throw Error(ErrorCode::LengthMismatch, "group dimensions differ");
    if (cfg.normalization == SurrogateNormalization::PerTrajectory) {
        if (ratios.empty()) return 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i < ratios.size(); ++i)
            total += surrogate_objective(ratios[i], advantages[i], cfg.clip_eps, kl_terms[i], cfg.beta);
        return total / static_cast<double>(ratios.size());
    }
    std::vector<double> r, a, k;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (ratios[i].size() != advantages[i].size() || ratios[i].size() != kl_terms[i].size())
            throw Error(ErrorCode::LengthMismatch, "trajectory " + std::to_string(i) + " lengths differ");
        r.insert(r.end(), ratios[i].begin(), ratios[i].end());
        a.insert(a.end(), advantages[i].begin(), advantages[i].end());
        k.insert(k.end(), kl_terms[i].begin(), kl_terms[i].end());
    }
    return surrogate_objective(r, a, cfg.clip_eps, k, cfg.beta);
}

json AdvantageEntry::to_json() const {
    return {{"trajectory_id", trajectory_id}, {"turn_index", turn_index}, {"A_i", A_i}, {"r_t", r_t}, {"A_it", A_it}};
}

std::string AdvantageTable::to_ndjson() const {
    std::string out;
    for (const auto& e : entries) {
        out += e.to_json().dump();
        out.push_back('\n');
    }
    return out;
}

AdvantageTable build_advantage_table(const std::vector<Trajectory>& group, const AdvantageConfig& cfg) {
    if (group.empty()) throw Error(ErrorCode::EmptyGroup, "advantage group is empty");
    for (const auto& t : group)
        if (t.package_id != group.front().package_id)
            throw Error(ErrorCode::MixedPackages, t.package_id + " vs " + group.front().package_id);

    AdvantageTable table;
    table.group_id = group.front().package_id;
    table.config = cfg;
    for (const auto& t : group) {
        table.trajectory_ids.push_back(t.id);
        table.rewards.push_back(static_cast<double>(t.r_final));
    }
    table.advantages = group_advantages(table.rewards, cfg.eps_std);

    for (std::size_t i = 0; i < group.size(); ++i) {
        const auto& t = group[i];
        std::vector<const Turn*> agent_turns;
        std::vector<double> dense;
        for (const auto& turn : t.turns) {
            if (turn.role != Role::AgentText && turn.role != Role::AgentTool) continue;
            agent_turns.push_back(&turn);
            dense.push_back(turn.reward.value_or(0.0));
        }
        const auto refined = turn_refine(table.advantages[i], dense);
        for (std::size_t j = 0; j < agent_turns.size(); ++j)
            table.entries.push_back({t.id, agent_turns[j]->index, table.advantages[i], dense[j], refined[j]});
    }
    return table;
}

} // namespace polenv
