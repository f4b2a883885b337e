#ifndef SGRPO_BUDGET_EVAL_HPP_
#define SGRPO_BUDGET_EVAL_HPP_

#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "sgrpo/policy.hpp"
#include "sgrpo/rng.hpp"
#include "sgrpo/rollout.hpp"
#include "sgrpo/tasks.hpp"

namespace sgrpo {

struct EvalTask {
  Query query;
  GroundTruth truth;
};

struct EvalConfig {
  RolloutConfig rollout;   // caps mirrored from training
  int answer_reserve = 8;  // budget tokens held back for the exit + answer
  int trials = 8;
  double temperature = 1.0;
  int threads = 0;
};

// Accuracy/length of one policy on a task set, averaged over trials. The
// `budget` caps generated tokens (thought + markers + answer); when the
// thought reaches budget - answer_reserve the inducer sequence is forced
// and the answer decoded. kUnlimitedBudget leaves only the training caps.
inline constexpr int kUnlimitedBudget = 1 << 28;

struct EvalSummary {
  double accuracy = 0.0;
  double mean_generated_tokens = 0.0;
  double mean_thought_tokens = 0.0;
  double forced_exit_fraction = 0.0;
  int max_generated_tokens = 0;
  int episodes = 0;
};

// One independent sampler per episode (episodes run concurrently).
using SamplerFactory = std::function<std::unique_ptr<SequenceSampler>()>;

EvalSummary evaluate_with_budget(const PolicyParams& params, std::span<const EvalTask> tasks,
                                 int budget, const EvalConfig& cfg, const Rng& rng);
EvalSummary evaluate_with_budget(const SamplerFactory& make_sampler,
                                 std::span<const EvalTask> tasks, int budget,
                                 const EvalConfig& cfg, const Rng& rng);

// Plain pass@1-style evaluation: the same protocol with the budget inactive.
EvalSummary evaluate_accuracy_and_length(const PolicyParams& params,
                                         std::span<const EvalTask> tasks,
                                         const EvalConfig& cfg, const Rng& rng);

struct BudgetRow {
  int budget = 0;
  double accuracy = 0.0;
  double mean_generated_tokens = 0.0;
  double mean_thought_tokens = 0.0;
  int trials = 0;
  int episodes = 0;
};

struct BudgetReport {
  std::vector<BudgetRow> rows;
};

BudgetReport budget_sweep(const PolicyParams& params, std::span<const EvalTask> tasks,
                          std::span<const int> budgets, const EvalConfig& cfg, const Rng& rng);

// CSV columns: budget,accuracy,mean_generated_tokens,mean_thought_tokens,
// trials,episodes
void write_budget_csv(std::ostream& os, const BudgetReport& report);
void write_budget_json(std::ostream& os, const BudgetReport& report);

std::vector<EvalTask> make_eval_tasks(std::uint64_t seed, int count, int difficulty_min,
                                      int difficulty_max, const TaskGenConfig& gen);

}  // namespace sgrpo

#endif  // SGRPO_BUDGET_EVAL_HPP_
