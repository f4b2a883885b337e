#ifndef SGRPO_TRAINER_HPP_
#define SGRPO_TRAINER_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sgrpo/budget_eval.hpp"
#include "sgrpo/config.hpp"
#include "sgrpo/policy.hpp"
#include "sgrpo/rewards.hpp"
#include "sgrpo/rollout.hpp"

namespace sgrpo {

struct TrainMetrics {
  int step = 0;
  bool skipped = false;
  double mean_reward = 0.0;
  double acc_full = 0.0;        // O^0 correctness over the training batch
  double acc_early_exit = 0.0;  // share of groups with a correct early exit
  double mean_thought_len = 0.0;
  double mean_group_size = 0.0;
  double filter_pass_rate = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const TrainMetrics& m);

// Teacher-forcing example for the warm start: full token sequence plus the
// loss mask over the continuation.
struct TeacherExample {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> mask;
};

// Shape of one padded oracle thought: each running value is emitted
// step_repeats[j] times in order, then the final value echoes tail_repeats
// more times before END_THINK. Varying the repeats keeps "advance to the
// next step" and "stop repeating" inside the behavior distribution, which
// is what the RL phase later amplifies.
struct OracleTraceSpec {
  std::vector<int> step_repeats;  // one entry per chain step, each >= 1
  int tail_repeats = 0;

  int thought_length() const;
};

OracleTraceSpec sample_trace_spec(int difficulty, int step_repeat_max, int tail_min,
                                  int tail_max, Rng& rng);

// The deliberately overthinking trace the RL phase gets to cut down.
TeacherExample oracle_full_example(const Query& q, const GroundTruth& gt,
                                   const OracleTraceSpec& spec);

// Answering after a forced early exit: query + thought prefix + inducer,
// target is the running value visible at the exit position. Loss on the
// answer tokens only.
TeacherExample oracle_exit_example(const Query& q, const GroundTruth& gt,
                                   const OracleTraceSpec& spec, int exit_position);

struct WarmStartReport {
  int steps = 0;
  int epochs = 0;
  double accuracy = 0.0;
  double mean_thought_tokens = 0.0;
  bool reached_target = false;
};

class Trainer {
 public:
  explicit Trainer(TrainerConfig cfg);
  Trainer(TrainerConfig cfg, const Checkpoint& state);

  // Supervised teacher forcing on padded oracle traces until held-out O^0
  // accuracy reaches the configured target. Throws ConfigError when the
  // epoch budget runs out first.
  WarmStartReport warm_start();

  // One on-policy step: generate, filter, reward, update. Exactly one Adam
  // step per non-skipped batch.
  TrainMetrics train_step();

  EvalSummary evaluate(int budget = kUnlimitedBudget) const;

  const PolicyParams& params() const { return params_; }
  const TrainerConfig& config() const { return cfg_; }
  const std::vector<EvalTask>& heldout_tasks() const { return heldout_; }
  int completed_steps() const { return step_; }

  Checkpoint checkpoint() const;

  // Warnings accumulated since the last drain (filter shortfalls, skipped
  // steps, cap hits).
  std::vector<std::string> drain_warnings();

 private:
  TrainMetrics sgrpo_step(Rng& step_rng);
  TrainMetrics grpo_step(Rng& step_rng);
  void apply_update(const std::vector<std::vector<double>>& grads,
                    const std::vector<double>& losses, TrainMetrics& m);
  EvalConfig eval_config() const;

  TrainerConfig cfg_;
  PolicyParams params_;
  OptimizerState opt_;
  Rng master_;
  int step_ = 0;
  std::vector<EvalTask> heldout_;
  TaskGenConfig taskgen_;
  std::vector<std::string> warnings_;
};

struct RunReport {
  WarmStartReport warm_start;
  std::vector<TrainMetrics> metrics;
  std::vector<std::pair<int, EvalSummary>> evals;  // (step, summary)
  std::string final_checkpoint;
};

// Full pipeline: warm start (or resume from init_checkpoint), cfg.steps
// training steps, periodic eval and checkpoints, metrics.csv + eval.csv
// under out_dir.
RunReport run_training(const TrainerConfig& cfg, const std::string& out_dir,
                       const std::optional<std::string>& init_checkpoint = std::nullopt);

}  // namespace sgrpo

#endif  // SGRPO_TRAINER_HPP_
