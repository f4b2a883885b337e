// Command-line front end: train, eval, rollout-inspect, gen-tasks.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sgrpo/budget_eval.hpp"
#include "sgrpo/config.hpp"
#include "sgrpo/errors.hpp"
#include "sgrpo/rewards.hpp"
#include "sgrpo/surrogate.hpp"
#include "sgrpo/trainer.hpp"

namespace {

using namespace sgrpo;

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir, const std::optional<std::string>& init) {
  TrainerConfig cfg = load_trainer_config_file(config_path);
  if (seed) cfg.seed = *seed;
  validate(cfg);

  std::cout << "training " << to_string(cfg.algorithm) << " (" << to_string(cfg.reward_mode)
            << "), seed " << cfg.seed << ", " << cfg.steps << " steps -> " << out_dir << '\n';
  const RunReport report = run_training(cfg, out_dir, init);
  if (!init) {
    std::cout << "warm start: " << report.warm_start.epochs << " epochs, accuracy "
              << report.warm_start.accuracy << ", mean thought "
              << report.warm_start.mean_thought_tokens << " tokens\n";
  }
  if (!report.evals.empty()) {
    const auto& [step, s] = report.evals.back();
    std::cout << "final eval @" << step << ": accuracy " << s.accuracy << ", mean generated "
              << s.mean_generated_tokens << ", mean thought " << s.mean_thought_tokens << '\n';
  }
  std::cout << "checkpoint: " << report.final_checkpoint << '\n';
  return 0;
}

std::vector<EvalTask> eval_tasks_from_options(const std::optional<std::string>& task_file,
                                              std::uint64_t seed, int count, int dmin, int dmax) {
  if (task_file) {
    std::ifstream is(*task_file);
    if (!is) throw IoError("cannot open task file " + *task_file);
    std::vector<EvalTask> tasks;
    for (const auto& spec : load_task_specs(is)) {
      auto [q, gt] = instantiate(spec);
      tasks.push_back(EvalTask{std::move(q), std::move(gt)});
    }
    return tasks;
  }
  return make_eval_tasks(seed, count, dmin, dmax, TaskGenConfig{});
}

int cmd_eval(const std::string& ckpt_path, const std::vector<int>& budgets, int trials,
             const std::string& out_csv, const std::optional<std::string>& out_json,
             const std::optional<std::string>& task_file, std::uint64_t seed, int count,
             int dmin, int dmax, int threads) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto tasks = eval_tasks_from_options(task_file, seed, count, dmin, dmax);

  EvalConfig cfg;
  cfg.trials = trials;
  cfg.threads = threads;
  const BudgetReport report =
      budget_sweep(ckpt.params, tasks, budgets, cfg, Rng(seed).split(0xe7a1));

  std::ofstream csv(out_csv);
  if (!csv) throw IoError("cannot open " + out_csv + " for writing");
  write_budget_csv(csv, report);
  if (out_json) {
    std::ofstream js(*out_json);
    if (!js) throw IoError("cannot open " + *out_json + " for writing");
    write_budget_json(js, report);
  }
  for (const auto& r : report.rows) {
    std::cout << "budget " << r.budget << ": accuracy " << r.accuracy << ", mean generated "
              << r.mean_generated_tokens << '\n';
  }
  std::cout << "wrote " << out_csv << '\n';
  return 0;
}

void print_tokens(std::ostream& os, const std::vector<TokenId>& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) os << ' ';
    os << vocab::token_name(tokens[i]);
  }
}

int cmd_rollout_inspect(const std::string& ckpt_path, std::uint64_t seed, int difficulty,
                        int requested_m, const std::string& reward_mode_name) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const RewardMode mode = reward_mode_from_string(reward_mode_name);
  auto [q, gt] = generate_task(seed, difficulty);

  RolloutConfig rollout;
  rollout.requested_m = requested_m;
  PolicySampler sampler(ckpt.params, 1.0);
  Rng rng = Rng(seed).split(0x1477);
  const auto group = build_serial_group(q, gt, sampler, rollout, rng);
  if (!group) {
    std::cout << "group rejected: empty thought\n";
    return 1;
  }

  const RewardVector rv = assign_rewards(*group, mode);
  const auto advantages = compute_advantages(rv);

  std::cout << "query: ";
  print_tokens(std::cout, group->query_tokens());
  std::cout << "\nground truth: " << gt.answer << "\nthought (n=" << group->full.thought_length()
            << "): ";
  std::vector<TokenId> thought;
  for (const auto& r : group->full.thought) thought.push_back(r.token);
  print_tokens(std::cout, thought);
  std::cout << "\n\n idx position correct reward advantage answer\n";
  const auto flags = group->correct_flags();
  for (std::size_t i = 0; i < flags.size(); ++i) {
    const bool is_full = i + 1 == flags.size();
    const int position = is_full ? group->full.thought_length()
                                 : group->exits[i].position;
    std::vector<TokenId> answer =
        is_full ? group->full.answer_payload() : group->exits[i].answer_payload();
    std::cout << (is_full ? "  O^0" : "  O^" + std::to_string(i + 1)) << ' ' << position << ' '
              << (flags[i] ? "yes" : "no ") << ' ' << rv.rewards[i] << ' ' << advantages[i]
              << " \"";
    print_tokens(std::cout, answer);
    std::cout << "\"\n";
  }
  return 0;
}

int cmd_gen_tasks(const std::string& out_path, std::uint64_t seed, int count, int dmin,
                  int dmax) {
  const auto specs = make_task_specs(seed, count, dmin, dmax);
  std::ofstream os(out_path);
  if (!os) throw IoError("cannot open " + out_path + " for writing");
  save_task_specs(os, specs);
  std::cout << "wrote " << specs.size() << " tasks to " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"S-GRPO desk-scale trainer for early-exit reasoning policies"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Run warm start + RL training");
  std::string train_config, train_out;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::string> train_init;
  train->add_option("--config", train_config, "trainer config file (key = value)")->required();
  train->add_option("--seed", train_seed, "override the config seed");
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--init", train_init,
                    "start from this checkpoint instead of running warm start");

  // eval
  auto* eval = app.add_subcommand("eval", "Budget-sweep evaluation of a checkpoint");
  std::string eval_ckpt, eval_out = "report.csv";
  std::optional<std::string> eval_json, eval_tasks;
  std::vector<int> budgets{16, 32, 64, 128};
  std::uint64_t eval_seed = 0;
  int eval_trials = 8, eval_count = 64, eval_dmin = 3, eval_dmax = 3, eval_threads = 0;
  eval->add_option("--checkpoint", eval_ckpt, "policy checkpoint")->required();
  eval->add_option("--budgets", budgets, "generation-length budgets")->delimiter(',');
  eval->add_option("--trials", eval_trials, "trials per task");
  eval->add_option("--out", eval_out, "output CSV path");
  eval->add_option("--json", eval_json, "optional JSON report path");
  eval->add_option("--tasks", eval_tasks, "task corpus file (id,seed,difficulty)");
  eval->add_option("--seed", eval_seed, "seed for generated eval tasks");
  eval->add_option("--count", eval_count, "number of generated eval tasks");
  eval->add_option("--difficulty-min", eval_dmin, "min ops per task");
  eval->add_option("--difficulty-max", eval_dmax, "max ops per task");
  eval->add_option("--threads", eval_threads, "worker threads (0 = all cores)");

  // rollout-inspect
  auto* inspect = app.add_subcommand("rollout-inspect", "Dump one serial group");
  std::string ins_ckpt, ins_mode = "decaying";
  std::uint64_t ins_seed = 0;
  int ins_difficulty = 3, ins_m = 8;
  inspect->add_option("--checkpoint", ins_ckpt, "policy checkpoint")->required();
  inspect->add_option("--seed", ins_seed, "task seed");
  inspect->add_option("--difficulty", ins_difficulty, "ops in the task");
  inspect->add_option("--m", ins_m, "requested truncation positions");
  inspect->add_option("--reward-mode", ins_mode, "decaying|shortest_1|all_1");

  // gen-tasks
  auto* gen = app.add_subcommand("gen-tasks", "Write a reproducible task corpus");
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  int gen_count = 256, gen_dmin = 3, gen_dmax = 3;
  gen->add_option("--out", gen_out, "output file")->required();
  gen->add_option("--seed", gen_seed, "corpus seed");
  gen->add_option("--count", gen_count, "number of tasks");
  gen->add_option("--difficulty-min", gen_dmin, "min ops per task");
  gen->add_option("--difficulty-max", gen_dmax, "max ops per task");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_config, train_seed, train_out, train_init);
    if (eval->parsed()) {
      return cmd_eval(eval_ckpt, budgets, eval_trials, eval_out, eval_json, eval_tasks,
                      eval_seed, eval_count, eval_dmin, eval_dmax, eval_threads);
    }
    if (inspect->parsed()) {
      return cmd_rollout_inspect(ins_ckpt, ins_seed, ins_difficulty, ins_m, ins_mode);
    }
    if (gen->parsed()) return cmd_gen_tasks(gen_out, gen_seed, gen_count, gen_dmin, gen_dmax);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
