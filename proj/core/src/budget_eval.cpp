#include "sgrpo/budget_eval.hpp"

#include <algorithm>
#include <memory>
#include <ostream>

#include <json.hpp>

#include "sgrpo/errors.hpp"
#include "sgrpo/parallel.hpp"

namespace sgrpo {

namespace {

struct EpisodeOutcome {
  bool correct = false;
  int generated_tokens = 0;
  int thought_tokens = 0;
  bool forced_exit = false;  // budget-induced exit
};

EpisodeOutcome run_episode(SequenceSampler& sampler, const EvalTask& task, int budget,
                           const EvalConfig& cfg, Rng& rng) {
  const auto query = encode_query(task.query);
  sampler.reset(query);

  const int marker_and_answer = cfg.rollout.max_answer_tokens + 3;  // inducer pair or
                                                                    // END_THINK, payload,
                                                                    // terminator
  const int window_cap = sampler.remaining() - marker_and_answer;
  if (window_cap < 0) throw GenerationError("evaluate: query leaves no room to answer");
  const int train_cap = std::min(cfg.rollout.max_thought_tokens, window_cap);
  const int budget_cap = std::max(0, budget - cfg.answer_reserve);
  const int thought_cap = std::min(train_cap, budget_cap);

  EpisodeOutcome out;
  bool end_think_sampled = false;
  while (true) {
    if (out.thought_tokens >= thought_cap) break;
    const TokenSample ts = sampler.sample(rng);
    ++out.generated_tokens;
    if (ts.token == vocab::kEndThink) {
      end_think_sampled = true;
      break;
    }
    ++out.thought_tokens;
  }
  if (!end_think_sampled) {
    if (budget_cap < train_cap) {
      // The budget ran out mid-thought: force the early-exit protocol.
      out.forced_exit = true;
      for (TokenId t : vocab::kInducerSequence) {
        sampler.force(t);
        ++out.generated_tokens;
      }
    } else {
      sampler.force(vocab::kEndThink);
      ++out.generated_tokens;
    }
  }

  std::vector<TokenId> answer;
  while (static_cast<int>(answer.size()) < cfg.rollout.max_answer_tokens &&
         sampler.remaining() > 0) {
    const TokenSample ts = sampler.sample(rng);
    ++out.generated_tokens;
    if (vocab::is_structural(ts.token)) break;
    answer.push_back(ts.token);
  }
  out.correct = verify_answer(answer, task.truth);
  return out;
}

EvalSummary summarize(const std::vector<EpisodeOutcome>& outcomes) {
  EvalSummary s;
  s.episodes = static_cast<int>(outcomes.size());
  if (outcomes.empty()) return s;
  for (const auto& o : outcomes) {
    s.accuracy += o.correct ? 1.0 : 0.0;
    s.mean_generated_tokens += o.generated_tokens;
    s.mean_thought_tokens += o.thought_tokens;
    s.forced_exit_fraction += o.forced_exit ? 1.0 : 0.0;
    s.max_generated_tokens = std::max(s.max_generated_tokens, o.generated_tokens);
  }
  const double n = static_cast<double>(s.episodes);
  s.accuracy /= n;
  s.mean_generated_tokens /= n;
  s.mean_thought_tokens /= n;
  s.forced_exit_fraction /= n;
  return s;
}

}  // namespace

EvalSummary evaluate_with_budget(const SamplerFactory& make_sampler,
                                 std::span<const EvalTask> tasks, int budget,
                                 const EvalConfig& cfg, const Rng& rng) {
  if (budget < cfg.answer_reserve) {
    throw ConfigError("evaluate_with_budget: budget " + std::to_string(budget) +
                      " is below the answer reserve " + std::to_string(cfg.answer_reserve));
  }
  if (cfg.answer_reserve < cfg.rollout.max_answer_tokens + 3) {
    throw ConfigError("evaluate_with_budget: answer_reserve must cover the exit markers, "
                      "the answer cap and a terminator");
  }
  if (tasks.empty()) throw ConfigError("evaluate_with_budget: no tasks");
  if (cfg.trials < 1) throw ConfigError("evaluate_with_budget: trials must be >= 1");

  const int episodes = static_cast<int>(tasks.size()) * cfg.trials;
  std::vector<EpisodeOutcome> outcomes(static_cast<std::size_t>(episodes));

  parallel_for(episodes, cfg.threads, [&](int e) {
    const auto& task = tasks[static_cast<std::size_t>(e) / static_cast<std::size_t>(cfg.trials)];
    const int trial = e % cfg.trials;
    // Streams keyed by (task id, trial) so episode outcomes do not depend
    // on the order of the task list.
    Rng base = rng;
    Rng stream = base.split(task.query.id).split(static_cast<std::uint64_t>(trial));
    const auto sampler = make_sampler();
    outcomes[static_cast<std::size_t>(e)] = run_episode(*sampler, task, budget, cfg, stream);
  });
  return summarize(outcomes);
}

EvalSummary evaluate_with_budget(const PolicyParams& params, std::span<const EvalTask> tasks,
                                 int budget, const EvalConfig& cfg, const Rng& rng) {
  return evaluate_with_budget(
      [&params, &cfg]() { return std::make_unique<PolicySampler>(params, cfg.temperature); },
      tasks, budget, cfg, rng);
}

EvalSummary evaluate_accuracy_and_length(const PolicyParams& params,
                                         std::span<const EvalTask> tasks,
                                         const EvalConfig& cfg, const Rng& rng) {
  return evaluate_with_budget(params, tasks, kUnlimitedBudget, cfg, rng);
}

BudgetReport budget_sweep(const PolicyParams& params, std::span<const EvalTask> tasks,
                          std::span<const int> budgets, const EvalConfig& cfg, const Rng& rng) {
  BudgetReport report;
  for (int budget : budgets) {
    const EvalSummary s = evaluate_with_budget(params, tasks, budget, cfg, rng);
    report.rows.push_back(BudgetRow{budget, s.accuracy, s.mean_generated_tokens,
                                    s.mean_thought_tokens, cfg.trials, s.episodes});
  }
  return report;
}

void write_budget_csv(std::ostream& os, const BudgetReport& report) {
  os << "budget,accuracy,mean_generated_tokens,mean_thought_tokens,trials,episodes\n";
  for (const auto& r : report.rows) {
    os << r.budget << ',' << r.accuracy << ',' << r.mean_generated_tokens << ','
       << r.mean_thought_tokens << ',' << r.trials << ',' << r.episodes << '\n';
  }
}

void write_budget_json(std::ostream& os, const BudgetReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"budget", r.budget},
                    {"accuracy", r.accuracy},
                    {"mean_generated_tokens", r.mean_generated_tokens},
                    {"mean_thought_tokens", r.mean_thought_tokens},
                    {"trials", r.trials},
                    {"episodes", r.episodes}});
  }
  os << nlohmann::json{{"rows", rows}}.dump(2) << '\n';
}

std::vector<EvalTask> make_eval_tasks(std::uint64_t seed, int count, int difficulty_min,
                                      int difficulty_max, const TaskGenConfig& gen) {
  Rng rng(seed);
  std::vector<EvalTask> tasks;
  tasks.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto task_seed = rng.next_u64();
    const int difficulty = static_cast<int>(rng.uniform_int(difficulty_min, difficulty_max));
    auto [q, gt] = generate_task(task_seed, difficulty, gen);
    tasks.push_back(EvalTask{std::move(q), std::move(gt)});
  }
  return tasks;
}

}  // namespace sgrpo
