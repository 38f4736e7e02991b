// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "polenv/executor.hpp"
#include "polenv/package.hpp"
#include "polenv/rollout.hpp"
#include "polenv/verifier.hpp"

namespace {

const polenv::TaskPackage& package() {
    static const polenv::TaskPackage pkg = polenv::load_package(POLENV_FIXTURE_DIR);
    return pkg;
}

void BM_Canonicalize(benchmark::State& state) {
    const auto& pkg = package();
    for (auto _ : state) benchmark::DoNotOptimize(polenv::canonicalize(pkg.target_snapshot, pkg.diff_config));
}
BENCHMARK(BM_Canonicalize);

void BM_Diff(benchmark::State& state) {
    const auto& pkg = package();
    for (auto _ : state)
        benchmark::DoNotOptimize(polenv::diff(pkg.origin_snapshot, pkg.target_snapshot, pkg.diff_config).total);
}
BENCHMARK(BM_Diff);

void BM_SnapshotCapture(benchmark::State& state) {
    auto env = polenv::open_environment(package());
    for (auto _ : state) benchmark::DoNotOptimize(env.snapshot().digest());
}
BENCHMARK(BM_SnapshotCapture);

void BM_ExecuteQuery(benchmark::State& state) {
    auto env = polenv::open_environment(package());
    const polenv::ToolCall call{"query_flight_bookings", {{"filters", {{"travel_request_id", 4}}}}};
    for (auto _ : state) benchmark::DoNotOptimize(env.execute(call).rows.size());
}
BENCHMARK(BM_ExecuteQuery);

void BM_ExecuteRejectedInsert(benchmark::State& state) {
    auto env = polenv::open_environment(package());
    const polenv::ToolCall call{"insert_flight_bookings",
                                {{"travel_request_id", 1}, {"flight_code", "UA-104"}, {"cost", 200},
                                 {"class", "ECONOMY"}, {"departure_step", 30}, {"booking_step", 12}}};
    for (auto _ : state) benchmark::DoNotOptimize(env.execute(call).success);
}
BENCHMARK(BM_ExecuteRejectedInsert);

void BM_OracleEpisode(benchmark::State& state) {
    const auto& pkg = package();
    const polenv::json actions = polenv::json::parse(R"({"actions": [
        {"tool_call": {"name": "insert_hotel_bookings", "arguments":
            {"travel_request_id": 4, "hotel_vendor_id": "hv_summit", "cost": 250, "booking_step": 25}}},
        {"text": "Booked."}]})");
    const polenv::json user = polenv::json::parse(R"({"utterances": ["Book the hotel."]})");
    for (auto _ : state) {
        polenv::ScriptedAgentPort agent(actions);
        polenv::ScriptedUserPort sim(user);
        benchmark::DoNotOptimize(polenv::run_episode(pkg, agent, sim).sum_dense);
    }
}
BENCHMARK(BM_OracleEpisode);

} // namespace

BENCHMARK_MAIN();
