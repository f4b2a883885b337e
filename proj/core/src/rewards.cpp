#include "sgrpo/rewards.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgrpo/errors.hpp"

namespace sgrpo {

std::string to_string(RewardMode mode) {
  switch (mode) {
    case RewardMode::kDecaying: return "decaying";
    case RewardMode::kShortest1: return "shortest_1";
    case RewardMode::kAll1: return "all_1";
    case RewardMode::kParallel01: return "parallel_01";
  }
  return "?";
}

RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "decaying") return RewardMode::kDecaying;
  if (s == "shortest_1") return RewardMode::kShortest1;
  if (s == "all_1") return RewardMode::kAll1;
  if (s == "parallel_01") return RewardMode::kParallel01;
  throw ConfigError("unknown reward mode: " + s);
}

RewardVector assign_decaying_rewards(const std::vector<bool>& correct_flags) {
  if (correct_flags.empty()) {
    throw ConfigError("assign_decaying_rewards: empty group");
  }
  RewardVector rv;
  rv.rewards.reserve(correct_flags.size());
  rv.n_right_trace.reserve(correct_flags.size());
  int n_right = 0;
  for (bool correct : correct_flags) {
    if (correct) {
      ++n_right;
      rv.rewards.push_back(std::ldexp(1.0, 1 - n_right));  // 2^(1 - N_right)
    } else {
      rv.rewards.push_back(0.0);
    }
    rv.n_right_trace.push_back(n_right);
  }
  return rv;
}

RewardVector assign_ablation_rewards(const std::vector<bool>& correct_flags,
                                     const std::vector<int>& lengths, RewardMode mode) {
  if (mode == RewardMode::kDecaying) {
    throw ConfigError("assign_ablation_rewards: use assign_decaying_rewards");
  }
  if (correct_flags.empty()) {
    throw ConfigError("assign_ablation_rewards: empty group");
  }
  RewardVector rv;
  rv.rewards.assign(correct_flags.size(), 0.0);
  rv.n_right_trace.assign(correct_flags.size(), 0);
  int n_right = 0;
  for (std::size_t i = 0; i < correct_flags.size(); ++i) {
    if (correct_flags[i]) ++n_right;
    rv.n_right_trace[i] = n_right;
  }

  if (mode == RewardMode::kShortest1) {
    if (lengths.size() != correct_flags.size()) {
      throw ConfigError("assign_ablation_rewards: lengths size mismatch");
    }
    int best = -1;
    for (std::size_t i = 0; i < correct_flags.size(); ++i) {
      if (!correct_flags[i]) continue;
      if (best < 0 || lengths[i] < lengths[static_cast<std::size_t>(best)]) {
        best = static_cast<int>(i);  // ties keep the earliest position
      }
    }
    if (best >= 0) rv.rewards[static_cast<std::size_t>(best)] = 1.0;
    return rv;
  }

  // all_1 / parallel_01: binary outcome reward
  for (std::size_t i = 0; i < correct_flags.size(); ++i) {
    rv.rewards[i] = correct_flags[i] ? 1.0 : 0.0;
  }
  return rv;
}

RewardVector assign_rewards(const SerialGroup& group, RewardMode mode) {
  const auto flags = group.correct_flags();
  if (mode == RewardMode::kDecaying) return assign_decaying_rewards(flags);
  return assign_ablation_rewards(flags, group.response_lengths(), mode);
}

std::vector<double> compute_advantages(const RewardVector& rv) {
  if (rv.rewards.empty()) throw ConfigError("compute_advantages: empty group");
  double mean = 0.0;
  for (double r : rv.rewards) mean += r;
  mean /= static_cast<double>(rv.rewards.size());
  std::vector<double> adv;
  adv.reserve(rv.rewards.size());
  for (double r : rv.rewards) adv.push_back(r - mean);
  return adv;
}

int OutputView::masked_count() const {
  int n = 0;
  for (auto m : mask) n += m;
  return n;
}

namespace {

// Appends a record to the view; forced tokens stay masked out.
void append_record(OutputView& v, const TokenRecord& rec) {
  v.tokens.push_back(rec.token);
  v.mask.push_back(rec.sampled ? 1 : 0);
  v.old_logprobs.push_back(rec.sampled ? rec.logprob : 0.0);
}

void append_forced(OutputView& v, TokenId token) {
  v.tokens.push_back(token);
  v.mask.push_back(0);
  v.old_logprobs.push_back(0.0);
}

OutputView view_of_trace(const ReasoningTrace& trace) {
  OutputView v;
  const std::size_t total = trace.query_tokens.size() + trace.thought.size() + 2 +
                            trace.answer.size();
  v.tokens.reserve(total);
  v.mask.reserve(total);
  v.old_logprobs.reserve(total);
  for (TokenId t : trace.query_tokens) append_forced(v, t);
  for (const auto& rec : trace.thought) append_record(v, rec);
  append_record(v, trace.end_think);
  for (const auto& rec : trace.answer) append_record(v, rec);
  if (trace.terminator) append_record(v, *trace.terminator);
  v.correct = trace.correct;
  return v;
}

}  // namespace

std::vector<OutputView> serial_group_views(const SerialGroup& group, bool mask_shared_prefix) {
  std::vector<OutputView> views;
  views.reserve(static_cast<std::size_t>(group.group_size()));
  for (const auto& exit : group.exits) {
    OutputView v;
    for (TokenId t : group.query_tokens()) append_forced(v, t);
    for (int i = 0; i < exit.position; ++i) {
      const auto& rec = group.full.thought[static_cast<std::size_t>(i)];
      if (mask_shared_prefix) {
        append_forced(v, rec.token);
      } else {
        append_record(v, rec);
      }
    }
    for (TokenId t : vocab::kInducerSequence) append_forced(v, t);
    for (const auto& rec : exit.answer) append_record(v, rec);
    if (exit.terminator) append_record(v, *exit.terminator);
    v.correct = exit.correct;
    views.push_back(std::move(v));
  }
  views.push_back(view_of_trace(group.full));
  return views;
}

std::vector<OutputView> parallel_group_views(const std::vector<ReasoningTrace>& traces) {
  std::vector<OutputView> views;
  views.reserve(traces.size());
  for (const auto& t : traces) views.push_back(view_of_trace(t));
  return views;
}

int AdvantageBatch::masked_token_count() const {
  int n = 0;
  for (const auto& o : outputs) n += o.masked_count();
  return n;
}

AdvantageBatch broadcast_advantages(std::vector<double> advantages,
                                    std::vector<OutputView> outputs) {
  if (advantages.size() != outputs.size()) {
    throw ConfigError("broadcast_advantages: one advantage per output required");
  }
  for (const auto& o : outputs) {
    if (o.tokens.size() != o.mask.size() || o.tokens.size() != o.old_logprobs.size()) {
      throw ConfigError("broadcast_advantages: mask/logprob length mismatch");
    }
  }
  AdvantageBatch batch;
  batch.outputs = std::move(outputs);
  batch.advantages = std::move(advantages);
  return batch;
}

}  // namespace sgrpo
