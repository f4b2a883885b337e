#include <benchmark/benchmark.h>

#include "sgrpo/rewards.hpp"
#include "sgrpo/rollout.hpp"
#include "sgrpo/surrogate.hpp"

namespace {

using namespace sgrpo;

PolicyParams bench_params() {
  Rng rng(2);
  return init_params(ArchConfig{}, rng);
}

RolloutConfig bench_rollout() {
  RolloutConfig cfg;
  cfg.requested_m = 8;
  cfg.max_thought_tokens = 24;
  cfg.max_answer_tokens = 4;
  return cfg;
}

void BM_build_serial_group(benchmark::State& state) {
  const PolicyParams params = bench_params();
  const auto cfg = bench_rollout();
  Rng rng(11);
  PolicySampler sampler(params, 1.0);
  for (auto _ : state) {
    const auto [q, gt] = generate_task(rng.next_u64(), 3);
    benchmark::DoNotOptimize(build_serial_group(q, gt, sampler, cfg, rng));
  }
}
BENCHMARK(BM_build_serial_group);

void BM_surrogate_grad_per_group(benchmark::State& state) {
  const PolicyParams params = bench_params();
  const auto cfg = bench_rollout();
  Rng rng(12);
  PolicySampler sampler(params, 1.0);
  std::optional<AdvantageBatch> batch;
  while (!batch) {
    const auto [q, gt] = generate_task(rng.next_u64(), 3);
    const auto group = build_serial_group(q, gt, sampler, cfg, rng);
    if (!group) continue;
    batch = broadcast_advantages(compute_advantages(assign_rewards(*group, RewardMode::kDecaying)),
                                 serial_group_views(*group));
  }
  const ClipConfig clip{0.2, RewardMode::kDecaying};
  for (auto _ : state) {
    benchmark::DoNotOptimize(clipped_surrogate(*batch, params, clip));
  }
}
BENCHMARK(BM_surrogate_grad_per_group);

void BM_decaying_rewards(benchmark::State& state) {
  std::vector<bool> flags{false, true, false, true, true, false, true, true, true};
  for (auto _ : state) {
    benchmark::DoNotOptimize(assign_decaying_rewards(flags));
  }
}
BENCHMARK(BM_decaying_rewards);

}  // namespace
