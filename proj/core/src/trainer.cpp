#include "sgrpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>

#include "sgrpo/errors.hpp"
#include "sgrpo/parallel.hpp"
#include "sgrpo/surrogate.hpp"

namespace sgrpo {

namespace {

constexpr std::uint64_t kHeldoutSalt = 0x48454c44;   // "HELD"
constexpr std::uint64_t kMasterSalt = 0x4d535452;    // "MSTR"
constexpr std::uint64_t kWarmstartSalt = 0x5741524d; // "WARM"

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

void write_metrics_header(std::ostream& os) {
  os << "step,skipped,mean_reward,acc_full,acc_early_exit,mean_thought_len,"
        "mean_group_size,filter_pass_rate,loss,grad_norm\n";
}

void write_metrics_row(std::ostream& os, const TrainMetrics& m) {
  os << m.step << ',' << (m.skipped ? 1 : 0) << ',' << m.mean_reward << ',' << m.acc_full
     << ',' << m.acc_early_exit << ',' << m.mean_thought_len << ',' << m.mean_group_size
     << ',' << m.filter_pass_rate << ',' << m.loss << ',' << m.grad_norm << '\n';
}

int OracleTraceSpec::thought_length() const {
  int n = tail_repeats;
  for (int r : step_repeats) n += r;
  return n;
}

OracleTraceSpec sample_trace_spec(int difficulty, int step_repeat_max, int tail_min,
                                  int tail_max, Rng& rng) {
  OracleTraceSpec spec;
  spec.step_repeats.reserve(static_cast<std::size_t>(difficulty));
  for (int j = 0; j < difficulty; ++j) {
    spec.step_repeats.push_back(static_cast<int>(rng.uniform_int(1, step_repeat_max)));
  }
  spec.tail_repeats = static_cast<int>(rng.uniform_int(tail_min, tail_max));
  return spec;
}

namespace {

std::vector<TokenId> oracle_thought(const GroundTruth& gt, const OracleTraceSpec& spec) {
  if (spec.step_repeats.size() != gt.ideal_steps.size()) {
    throw ConfigError("oracle trace: step_repeats size must match the chain length");
  }
  std::vector<TokenId> thought;
  thought.reserve(static_cast<std::size_t>(spec.thought_length()));
  for (std::size_t j = 0; j < gt.ideal_steps.size(); ++j) {
    if (spec.step_repeats[j] < 1) throw ConfigError("oracle trace: step repeat must be >= 1");
    for (int r = 0; r < spec.step_repeats[j]; ++r) thought.push_back(gt.ideal_steps[j]);
  }
  for (int r = 0; r < spec.tail_repeats; ++r) thought.push_back(gt.answer);
  return thought;
}

}  // namespace

TeacherExample oracle_full_example(const Query& q, const GroundTruth& gt,
                                   const OracleTraceSpec& spec) {
  TeacherExample ex;
  ex.tokens = encode_query(q);
  const std::size_t query_len = ex.tokens.size();
  const auto thought = oracle_thought(gt, spec);
  ex.tokens.insert(ex.tokens.end(), thought.begin(), thought.end());
  ex.tokens.push_back(vocab::kEndThink);
  ex.tokens.push_back(gt.answer);
  ex.tokens.push_back(vocab::kEos);
  ex.mask.assign(ex.tokens.size(), 1);
  std::fill_n(ex.mask.begin(), query_len, 0);
  return ex;
}

TeacherExample oracle_exit_example(const Query& q, const GroundTruth& gt,
                                   const OracleTraceSpec& spec, int exit_position) {
  const auto thought = oracle_thought(gt, spec);
  if (exit_position < 1 || exit_position > static_cast<int>(thought.size())) {
    throw ConfigError("oracle_exit_example: exit position outside the thought");
  }
  TeacherExample ex;
  ex.tokens = encode_query(q);
  ex.tokens.insert(ex.tokens.end(), thought.begin(),
                   thought.begin() + exit_position);
  // The last emitted value is the honest answer at this exit point.
  const TokenId running = thought[static_cast<std::size_t>(exit_position - 1)];
  for (TokenId t : vocab::kInducerSequence) ex.tokens.push_back(t);
  const std::size_t answer_at = ex.tokens.size();
  ex.tokens.push_back(running);
  ex.tokens.push_back(vocab::kEos);
  ex.mask.assign(ex.tokens.size(), 0);
  ex.mask[answer_at] = 1;
  ex.mask[answer_at + 1] = 1;
  return ex;
}

Trainer::Trainer(TrainerConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  taskgen_.modulus = cfg_.modulus;
  taskgen_.max_difficulty = std::max(12, cfg_.difficulty_max);
  heldout_ = make_eval_tasks(Rng(cfg_.seed).split(kHeldoutSalt).next_u64(), cfg_.eval_tasks,
                             cfg_.difficulty_min, cfg_.difficulty_max, taskgen_);
  master_ = Rng(cfg_.seed).split(kMasterSalt);
  Rng init_rng = Rng(cfg_.seed).split(0x494e4954);  // "INIT"
  params_ = init_params(cfg_.arch, init_rng);
  opt_ = make_optimizer_state(params_.theta.size());
}

Trainer::Trainer(TrainerConfig cfg, const Checkpoint& state) : Trainer(std::move(cfg)) {
  if (state.params.theta.size() != param_count(state.params.arch)) {
    throw ConfigError("Trainer: checkpoint theta inconsistent with its arch");
  }
  params_ = state.params;
  cfg_.arch = state.params.arch;
  opt_ = state.opt;
  master_ = state.rng;
  step_ = static_cast<int>(state.completed_steps);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.params = params_;
  c.opt = opt_;
  c.rng = master_;
  c.completed_steps = step_;
  return c;
}

EvalConfig Trainer::eval_config() const {
  EvalConfig ec;
  ec.rollout = cfg_.rollout;
  ec.answer_reserve = cfg_.eval_answer_reserve;
  ec.trials = cfg_.eval_trials;
  ec.temperature = 1.0;
  ec.threads = cfg_.threads;
  return ec;
}

EvalSummary Trainer::evaluate(int budget) const {
  const Rng eval_rng = Rng(cfg_.seed ^ 0x6576616c).split(static_cast<std::uint64_t>(step_));
  return evaluate_with_budget(params_, heldout_, budget, eval_config(), eval_rng);
}

std::vector<std::string> Trainer::drain_warnings() {
  std::vector<std::string> out;
  out.swap(warnings_);
  return out;
}

WarmStartReport Trainer::warm_start() {
  Rng ws_rng = Rng(cfg_.seed).split(kWarmstartSalt);

  std::vector<std::pair<Query, GroundTruth>> tasks;
  tasks.reserve(static_cast<std::size_t>(cfg_.warmstart_tasks));
  for (int i = 0; i < cfg_.warmstart_tasks; ++i) {
    const auto seed = ws_rng.next_u64();
    const int difficulty =
        static_cast<int>(ws_rng.uniform_int(cfg_.difficulty_min, cfg_.difficulty_max));
    tasks.push_back(generate_task(seed, difficulty, taskgen_));
  }

  OptimizerState ws_opt = make_optimizer_state(params_.theta.size());
  AdamConfig ws_adam;
  ws_adam.lr = cfg_.warmstart_lr;

  const int steps_per_epoch =
      std::max(1, cfg_.warmstart_tasks / std::max(1, cfg_.warmstart_batch));
  WarmStartReport report;

  for (int epoch = 0; epoch < cfg_.warmstart_max_epochs; ++epoch) {
    for (int s = 0; s < steps_per_epoch; ++s) {
      // Draw the batch (examples vary in redundancy and exit position).
      std::vector<TeacherExample> batch;
      batch.reserve(static_cast<std::size_t>(cfg_.warmstart_batch));
      for (int b = 0; b < cfg_.warmstart_batch; ++b) {
        const auto& [q, gt] =
            tasks[static_cast<std::size_t>(ws_rng.uniform_int(0, cfg_.warmstart_tasks - 1))];
        const OracleTraceSpec spec =
            sample_trace_spec(q.difficulty(), cfg_.step_repeat_max, cfg_.redundancy_min,
                              cfg_.redundancy_max, ws_rng);
        if (ws_rng.uniform_real() < cfg_.warmstart_exit_fraction) {
          const int pos = static_cast<int>(ws_rng.uniform_int(1, spec.thought_length()));
          batch.push_back(oracle_exit_example(q, gt, spec, pos));
        } else {
          batch.push_back(oracle_full_example(q, gt, spec));
        }
      }

      std::vector<std::vector<double>> grads(batch.size());
      parallel_for(static_cast<int>(batch.size()), cfg_.threads, [&](int i) {
        const auto& ex = batch[static_cast<std::size_t>(i)];
        grads[static_cast<std::size_t>(i)] = grad(params_, [&](Tape& tape, Tape::NodeId theta) {
          return nll_loss_node(tape, theta, params_.arch, ex.tokens, ex.mask);
        });
      });

      std::vector<double> mean_grad(params_.theta.size(), 0.0);
      for (const auto& g : grads) {
        for (std::size_t i = 0; i < mean_grad.size(); ++i) mean_grad[i] += g[i];
      }
      const double inv = 1.0 / static_cast<double>(grads.size());
      for (double& g : mean_grad) g *= inv;
      adam_step(params_, mean_grad, ws_opt, ws_adam);
      ++report.steps;
    }
    ++report.epochs;

    const Rng eval_rng = Rng(cfg_.seed ^ 0x77736576).split(static_cast<std::uint64_t>(epoch));
    const EvalSummary s =
        evaluate_with_budget(params_, heldout_, kUnlimitedBudget, eval_config(), eval_rng);
    report.accuracy = s.accuracy;
    report.mean_thought_tokens = s.mean_thought_tokens;
    if (s.accuracy >= cfg_.warmstart_target_acc) {
      report.reached_target = true;
      return report;
    }
  }
  throw ConfigError("warm_start: accuracy " + std::to_string(report.accuracy) +
                    " below target " + std::to_string(cfg_.warmstart_target_acc) + " after " +
                    std::to_string(report.epochs) + " epochs; raise warmstart_max_epochs or "
                    "lower the target");
}

void Trainer::apply_update(const std::vector<std::vector<double>>& grads,
                           const std::vector<double>& losses, TrainMetrics& m) {
  std::vector<double> mean_grad(params_.theta.size(), 0.0);
  for (const auto& g : grads) {
    for (std::size_t i = 0; i < mean_grad.size(); ++i) mean_grad[i] += g[i];
  }
  const double inv = 1.0 / static_cast<double>(grads.size());
  for (double& g : mean_grad) g *= inv;
  m.loss = std::accumulate(losses.begin(), losses.end(), 0.0) * inv;
  m.grad_norm = l2_norm(mean_grad);
  adam_step(params_, mean_grad, opt_, cfg_.adam);
}

TrainMetrics Trainer::sgrpo_step(Rng& step_rng) {
  TrainMetrics m;
  m.step = step_ + 1;
  const int gen_count = static_cast<int>(
      std::ceil(static_cast<double>(cfg_.batch_groups) * cfg_.oversample_factor));

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(gen_count));
  std::vector<int> difficulties(static_cast<std::size_t>(gen_count));
  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(gen_count));
  for (int g = 0; g < gen_count; ++g) {
    seeds[static_cast<std::size_t>(g)] = step_rng.next_u64();
    difficulties[static_cast<std::size_t>(g)] =
        static_cast<int>(step_rng.uniform_int(cfg_.difficulty_min, cfg_.difficulty_max));
    streams.push_back(step_rng.split(static_cast<std::uint64_t>(g)));
  }

  std::vector<std::optional<SerialGroup>> generated(static_cast<std::size_t>(gen_count));
  parallel_for(gen_count, cfg_.threads, [&](int g) {
    const auto gi = static_cast<std::size_t>(g);
    auto [q, gt] = generate_task(seeds[gi], difficulties[gi], taskgen_);
    PolicySampler sampler(params_, cfg_.rollout.temperature);
    generated[gi] = build_serial_group(q, gt, sampler, cfg_.rollout, streams[gi]);
  });

  std::vector<SerialGroup> groups;
  groups.reserve(static_cast<std::size_t>(gen_count));
  for (auto& g : generated) {
    if (g) groups.push_back(std::move(*g));
  }

  FilterResult filtered = over_sample_filter(std::move(groups), cfg_.batch_groups,
                                             cfg_.reward_mode);
  m.filter_pass_rate = static_cast<double>(filtered.qualified) / static_cast<double>(gen_count);
  if (filtered.shortfall) {
    warnings_.push_back("step " + std::to_string(m.step) + ": filter shortfall (" +
                        std::to_string(filtered.qualified) + " qualified of " +
                        std::to_string(gen_count) + ")");
  }
  if (filtered.groups.empty()) {
    m.skipped = true;
    warnings_.push_back("step " + std::to_string(m.step) +
                        ": no qualifying groups, step skipped");
    ++step_;
    return m;
  }

  const auto& batch_groups = filtered.groups;
  const int kept = static_cast<int>(batch_groups.size());
  std::vector<std::vector<double>> grads(static_cast<std::size_t>(kept));
  std::vector<double> losses(static_cast<std::size_t>(kept));
  const ClipConfig clip{cfg_.clip_epsilon, cfg_.reward_mode};

  parallel_for(kept, cfg_.threads, [&](int i) {
    const auto gi = static_cast<std::size_t>(i);
    const SerialGroup& group = batch_groups[gi];
    const RewardVector rv = assign_rewards(group, cfg_.reward_mode);
    auto advantages = compute_advantages(rv);
    auto views = serial_group_views(group, cfg_.mask_shared_prefix);
    const AdvantageBatch batch = broadcast_advantages(std::move(advantages), std::move(views));
    SurrogateResult res = clipped_surrogate(batch, params_, clip);
    losses[gi] = res.loss;
    grads[gi] = std::move(res.gradient);
  });

  // Batch statistics
  double reward_sum = 0.0;
  int reward_count = 0;
  int capped = 0;
  for (const auto& group : batch_groups) {
    const RewardVector rv = assign_rewards(group, cfg_.reward_mode);
    reward_sum += std::accumulate(rv.rewards.begin(), rv.rewards.end(), 0.0);
    reward_count += static_cast<int>(rv.rewards.size());
    m.acc_full += group.full.correct ? 1.0 : 0.0;
    m.acc_early_exit += std::any_of(group.exits.begin(), group.exits.end(),
                                    [](const auto& e) { return e.correct; })
                            ? 1.0
                            : 0.0;
    m.mean_thought_len += group.full.thought_length();
    m.mean_group_size += group.group_size();
    capped += group.full.thought_capped ? 1 : 0;
  }
  m.mean_reward = reward_sum / static_cast<double>(reward_count);
  m.acc_full /= kept;
  m.acc_early_exit /= kept;
  m.mean_thought_len /= kept;
  m.mean_group_size /= kept;
  if (capped > 0) {
    warnings_.push_back("step " + std::to_string(m.step) + ": " + std::to_string(capped) +
                        " thought cap hits");
  }

  apply_update(grads, losses, m);
  ++step_;
  return m;
}

TrainMetrics Trainer::grpo_step(Rng& step_rng) {
  TrainMetrics m;
  m.step = step_ + 1;
  const int group_size = cfg_.rollout.requested_m + 1;  // same G as a full serial group
  const int batch = cfg_.batch_groups;

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(batch));
  std::vector<int> difficulties(static_cast<std::size_t>(batch));
  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(batch));
  for (int g = 0; g < batch; ++g) {
    seeds[static_cast<std::size_t>(g)] = step_rng.next_u64();
    difficulties[static_cast<std::size_t>(g)] =
        static_cast<int>(step_rng.uniform_int(cfg_.difficulty_min, cfg_.difficulty_max));
    streams.push_back(step_rng.split(static_cast<std::uint64_t>(g)));
  }

  std::vector<std::vector<ReasoningTrace>> parallel_groups(static_cast<std::size_t>(batch));
  parallel_for(batch, cfg_.threads, [&](int g) {
    const auto gi = static_cast<std::size_t>(g);
    auto [q, gt] = generate_task(seeds[gi], difficulties[gi], taskgen_);
    PolicySampler sampler(params_, cfg_.rollout.temperature);
    parallel_groups[gi] =
        build_parallel_group(q, gt, sampler, cfg_.rollout, streams[gi], group_size);
  });

  std::vector<std::vector<double>> grads(static_cast<std::size_t>(batch));
  std::vector<double> losses(static_cast<std::size_t>(batch));
  const ClipConfig clip{cfg_.clip_epsilon, RewardMode::kParallel01};

  parallel_for(batch, cfg_.threads, [&](int i) {
    const auto gi = static_cast<std::size_t>(i);
    const auto& traces = parallel_groups[gi];
    std::vector<bool> flags;
    std::vector<int> lengths;
    for (const auto& t : traces) {
      flags.push_back(t.correct);
      lengths.push_back(t.thought_length() + 1 + static_cast<int>(t.answer.size()) +
                        (t.terminator ? 1 : 0));
    }
    const RewardVector rv = assign_ablation_rewards(flags, lengths, RewardMode::kParallel01);
    auto advantages = compute_advantages(rv);
    auto views = parallel_group_views(traces);
    const AdvantageBatch adv_batch = broadcast_advantages(std::move(advantages), std::move(views));
    SurrogateResult res = clipped_surrogate(adv_batch, params_, clip);
    losses[gi] = res.loss;
    grads[gi] = std::move(res.gradient);
  });

  double reward_sum = 0.0;
  int reward_count = 0;
  for (const auto& traces : parallel_groups) {
    for (const auto& t : traces) {
      reward_sum += t.correct ? 1.0 : 0.0;
      ++reward_count;
      m.acc_full += t.correct ? 1.0 : 0.0;
      m.mean_thought_len += t.thought_length();
    }
    m.mean_group_size += static_cast<double>(traces.size());
  }
  m.mean_reward = reward_sum / static_cast<double>(reward_count);
  m.acc_full /= static_cast<double>(reward_count);
  m.acc_early_exit = 0.0;  // no early exits in parallel groups
  m.mean_thought_len /= static_cast<double>(reward_count);
  m.mean_group_size /= static_cast<double>(batch);
  m.filter_pass_rate = 1.0;  // no over-sampling filter in the baseline

  apply_update(grads, losses, m);
  ++step_;
  return m;
}

TrainMetrics Trainer::train_step() {
  Rng step_rng = master_.split(static_cast<std::uint64_t>(step_));
  return cfg_.algorithm == Algorithm::kSGrpo ? sgrpo_step(step_rng) : grpo_step(step_rng);
}

RunReport run_training(const TrainerConfig& cfg, const std::string& out_dir,
                       const std::optional<std::string>& init_checkpoint) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  RunReport report;
  std::optional<Trainer> trainer;
  if (init_checkpoint) {
    trainer.emplace(cfg, load_checkpoint(*init_checkpoint));
  } else {
    trainer.emplace(cfg);
    report.warm_start = trainer->warm_start();
    save_checkpoint((fs::path(out_dir) / "warmstart.ckpt").string(), trainer->checkpoint());
  }

  {
    std::ofstream cfg_out(fs::path(out_dir) / "config.txt");
    save_trainer_config(cfg_out, trainer->config());
  }

  std::ofstream metrics_out(fs::path(out_dir) / "metrics.csv");
  write_metrics_header(metrics_out);
  std::ofstream eval_out(fs::path(out_dir) / "eval.csv");
  eval_out << "step,accuracy,mean_generated_tokens,mean_thought_tokens\n";

  const auto eval_row = [&](int step) {
    const EvalSummary s = trainer->evaluate();
    eval_out << step << ',' << s.accuracy << ',' << s.mean_generated_tokens << ','
             << s.mean_thought_tokens << '\n';
    eval_out.flush();
    report.evals.emplace_back(step, s);
  };

  eval_row(trainer->completed_steps());
  const int target_steps = trainer->completed_steps() + cfg.steps;
  while (trainer->completed_steps() < target_steps) {
    const TrainMetrics m = trainer->train_step();
    write_metrics_row(metrics_out, m);
    metrics_out.flush();
    report.metrics.push_back(m);
    for (const auto& w : trainer->drain_warnings()) {
      std::ofstream(fs::path(out_dir) / "warnings.log", std::ios::app) << w << '\n';
    }
    const int step = trainer->completed_steps();
    if (step % cfg.eval_every == 0) eval_row(step);
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      save_checkpoint((fs::path(out_dir) / ("ckpt_" + std::to_string(step) + ".ckpt")).string(),
                      trainer->checkpoint());
    }
  }
  if (target_steps % cfg.eval_every != 0) eval_row(trainer->completed_steps());

  report.final_checkpoint = (fs::path(out_dir) / "final.ckpt").string();
  save_checkpoint(report.final_checkpoint, trainer->checkpoint());
  return report;
}

}  // namespace sgrpo
