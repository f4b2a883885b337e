#ifndef SGRPO_REWARD_MODE_HPP_
#define SGRPO_REWARD_MODE_HPP_

#include <string>

namespace sgrpo {

// decaying      : k-th correct output in position order earns 2^(1-k)
// shortest_1    : only the shortest correct response earns 1
// all_1         : every correct response earns 1
// parallel_01   : 0/1 outcome reward for parallel groups (GRPO baseline)
enum class RewardMode { kDecaying, kShortest1, kAll1, kParallel01 };

std::string to_string(RewardMode mode);
RewardMode reward_mode_from_string(const std::string& s);

}  // namespace sgrpo

#endif  // SGRPO_REWARD_MODE_HPP_
