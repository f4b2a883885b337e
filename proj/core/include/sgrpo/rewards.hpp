#ifndef SGRPO_REWARDS_HPP_
#define SGRPO_REWARDS_HPP_

#include <cstdint>
#include <vector>

#include "sgrpo/reward_mode.hpp"
#include "sgrpo/rollout.hpp"

namespace sgrpo {

struct RewardVector {
  std::vector<double> rewards;      // group order: exits ascending, O^0 last
  std::vector<int> n_right_trace;   // running correct count at each output
};

// Exponentially decaying reward: the k-th correct output in position order
// receives 2^(1-k); incorrect outputs receive 0. Flags must be in group
// order with O^0 last.
RewardVector assign_decaying_rewards(const std::vector<bool>& correct_flags);

// Table-2 style ablation rewards. shortest_1 pays 1 to the correct output
// with minimal response length (ties: earliest); all_1 / parallel_01 pay 1
// to every correct output.
RewardVector assign_ablation_rewards(const std::vector<bool>& correct_flags,
                                     const std::vector<int>& lengths, RewardMode mode);

// Dispatch on mode for a serial group.
RewardVector assign_rewards(const SerialGroup& group, RewardMode mode);

// Group-relative, std-free advantage: r_i - mean(r).
std::vector<double> compute_advantages(const RewardVector& rv);

// One output flattened for the loss: full token sequence, a 0/1 per-token
// loss mask, and the behavior-policy logprob for every masked-in token.
struct OutputView {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> mask;
  std::vector<double> old_logprobs;  // aligned with tokens, 0 where mask = 0
  bool correct = false;

  int masked_count() const;
};

// Views over a serial group in group order. Query and forced tokens are
// masked out. Shared thought-prefix tokens are (by default) in-loss for
// every output that contains them, as the objective's per-output token sum
// implies; mask_shared_prefix = true restricts them to O^0 instead.
std::vector<OutputView> serial_group_views(const SerialGroup& group,
                                           bool mask_shared_prefix = false);

std::vector<OutputView> parallel_group_views(const std::vector<ReasoningTrace>& traces);

struct AdvantageBatch {
  std::vector<OutputView> outputs;
  std::vector<double> advantages;  // one per output

  int masked_token_count() const;
};

// Pairs per-output advantages with token views; every masked-in token of
// output i carries advantage_i in the loss. Validates the mask/logprob
// alignment.
AdvantageBatch broadcast_advantages(std::vector<double> advantages,
                                    std::vector<OutputView> outputs);

}  // namespace sgrpo

#endif  // SGRPO_REWARDS_HPP_
