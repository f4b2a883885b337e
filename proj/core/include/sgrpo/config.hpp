#ifndef SGRPO_CONFIG_HPP_
#define SGRPO_CONFIG_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "sgrpo/policy.hpp"
#include "sgrpo/reward_mode.hpp"
#include "sgrpo/rollout.hpp"

namespace sgrpo {

enum class Algorithm { kSGrpo, kGrpo };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

// Everything a training run needs. The generation batch and training batch
// are the same `batch_groups` by construction: one on-policy update per
// generated batch.
struct TrainerConfig {
  Algorithm algorithm = Algorithm::kSGrpo;
  RewardMode reward_mode = RewardMode::kDecaying;
  ArchConfig arch;
  RolloutConfig rollout;
  double clip_epsilon = 0.2;
  bool mask_shared_prefix = false;

  int batch_groups = 32;
  double oversample_factor = 1.5;
  AdamConfig adam;
  int steps = 300;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency

  // Task distribution
  int modulus = 10;
  int difficulty_min = 3;
  int difficulty_max = 3;
  // Overthinking taught at warm start: each running value is emitted
  // 1..step_repeat_max times, and the final value echoes a further
  // redundancy_min..redundancy_max times before END_THINK.
  int step_repeat_max = 3;
  int redundancy_min = 2;
  int redundancy_max = 6;

  // Warm start (supervised teacher forcing)
  int warmstart_tasks = 2048;
  int warmstart_batch = 64;
  int warmstart_max_epochs = 80;
  double warmstart_lr = 3e-3;
  double warmstart_target_acc = 0.9;
  double warmstart_exit_fraction = 0.3;

  // Evaluation cadence
  int eval_tasks = 64;
  int eval_trials = 4;
  int eval_every = 50;
  int checkpoint_every = 100;
  int eval_answer_reserve = 8;
};

// Consistency checks; also enforces mode purity (grpo implies the 0/1
// parallel reward and no serial truncations).
void validate(TrainerConfig& cfg);

// "key = value" lines; '#' comments. Unknown keys are an error so typos
// cannot silently fall back to defaults.
TrainerConfig load_trainer_config(std::istream& is);
TrainerConfig load_trainer_config_file(const std::string& path);
void save_trainer_config(std::ostream& os, const TrainerConfig& cfg);

}  // namespace sgrpo

#endif  // SGRPO_CONFIG_HPP_
