#include "sgrpo/rollout.hpp"

#include <algorithm>
#include <numeric>

#include "sgrpo/errors.hpp"
#include "sgrpo/rewards.hpp"

namespace sgrpo {

namespace {

// Room the thought cap must leave for END_THINK, the answer payload and a
// terminator.
int answer_reserve(const RolloutConfig& cfg) { return cfg.max_answer_tokens + 2; }

double reward_variance(const std::vector<double>& rewards) {
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                      static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  return var / static_cast<double>(rewards.size());
}

// Samples the answer phase into (answer, terminator, capped).
void sample_answer(SequenceSampler& sampler, const RolloutConfig& cfg, Rng& rng,
                   std::vector<TokenRecord>& answer, std::optional<TokenRecord>& terminator,
                   bool& capped) {
  while (true) {
    if (sampler.remaining() <= 0) {
      capped = true;
      return;
    }
    const TokenSample ts = sampler.sample(rng);
    const TokenRecord rec{ts.token, ts.logprob, true};
    if (vocab::is_structural(ts.token)) {
      terminator = rec;
      return;
    }
    answer.push_back(rec);
    if (static_cast<int>(answer.size()) >= cfg.max_answer_tokens) {
      capped = true;
      return;
    }
  }
}

}  // namespace

std::vector<TokenId> ReasoningTrace::answer_payload() const {
  std::vector<TokenId> out;
  out.reserve(answer.size());
  for (const auto& rec : answer) out.push_back(rec.token);
  return out;
}

std::vector<TokenId> EarlyExitOutput::answer_payload() const {
  std::vector<TokenId> out;
  out.reserve(answer.size());
  for (const auto& rec : answer) out.push_back(rec.token);
  return out;
}

std::vector<bool> SerialGroup::correct_flags() const {
  std::vector<bool> flags;
  flags.reserve(static_cast<std::size_t>(group_size()));
  for (const auto& e : exits) flags.push_back(e.correct);
  flags.push_back(full.correct);
  return flags;
}

std::vector<int> SerialGroup::response_lengths() const {
  std::vector<int> lengths;
  lengths.reserve(static_cast<std::size_t>(group_size()));
  const int inducer_len = static_cast<int>(vocab::kInducerSequence.size());
  for (const auto& e : exits) {
    lengths.push_back(e.position + inducer_len + static_cast<int>(e.answer.size()) +
                      (e.terminator ? 1 : 0));
  }
  lengths.push_back(full.thought_length() + 1 + static_cast<int>(full.answer.size()) +
                    (full.terminator ? 1 : 0));
  return lengths;
}

PolicySampler::PolicySampler(const PolicyParams& params, double temperature)
    : decoder_(params), temperature_(temperature) {}

void PolicySampler::reset(std::span<const TokenId> context) {
  decoder_.reset();
  decoder_.push_all(context);
}

TokenSample PolicySampler::sample(Rng& rng) {
  const TokenSample ts = sample_from_logits(decoder_.logits(), temperature_, rng);
  decoder_.push(ts.token);
  return ts;
}

void PolicySampler::force(TokenId token) { decoder_.push(token); }

ReasoningTrace full_thought_rollout(const Query& q, const GroundTruth& gt,
                                    SequenceSampler& sampler, const RolloutConfig& cfg,
                                    Rng& rng) {
  ReasoningTrace trace;
  trace.query_tokens = encode_query(q);

  sampler.reset(trace.query_tokens);
  const int budget_cap = sampler.remaining() - answer_reserve(cfg);
  if (budget_cap < 0) {
    throw GenerationError("full_thought_rollout: query leaves no room to answer");
  }
  const int thought_cap = std::min(cfg.max_thought_tokens, budget_cap);

  while (true) {
    if (trace.thought_length() >= thought_cap) {
      sampler.force(vocab::kEndThink);
      trace.end_think = TokenRecord{vocab::kEndThink, 0.0, false};
      trace.thought_capped = true;
      break;
    }
    const TokenSample ts = sampler.sample(rng);
    if (ts.token == vocab::kEndThink) {
      trace.end_think = TokenRecord{ts.token, ts.logprob, true};
      break;
    }
    trace.thought.push_back(TokenRecord{ts.token, ts.logprob, true});
  }

  sample_answer(sampler, cfg, rng, trace.answer, trace.terminator, trace.answer_capped);
  trace.correct = verify_answer(trace.answer_payload(), gt);
  return trace;
}

TruncationPlan sample_truncation_positions(int n, int requested_m, Rng& rng,
                                           bool allow_duplicates) {
  TruncationPlan plan;
  plan.requested_m = requested_m;
  if (n < 1 || requested_m < 1) return plan;  // rejected signal
  if (allow_duplicates) {
    plan.positions.reserve(static_cast<std::size_t>(requested_m));
    for (int i = 0; i < requested_m; ++i) {
      plan.positions.push_back(static_cast<int>(rng.uniform_int(1, n)));
    }
    std::sort(plan.positions.begin(), plan.positions.end());
  } else {
    plan.positions = sample_without_replacement(n, requested_m, rng);
  }
  return plan;
}

EarlyExitOutput early_exit_rollout(const ReasoningTrace& trace, int position,
                                   const GroundTruth& gt, SequenceSampler& sampler,
                                   const RolloutConfig& cfg, Rng& rng) {
  if (position < 1 || position > trace.thought_length()) {
    throw ConfigError("early_exit_rollout: position outside [1, n]");
  }
  EarlyExitOutput out;
  out.position = position;
  out.prefix.reserve(static_cast<std::size_t>(position));
  for (int i = 0; i < position; ++i) {
    out.prefix.push_back(trace.thought[static_cast<std::size_t>(i)].token);
  }

  std::vector<TokenId> context = trace.query_tokens;
  context.insert(context.end(), out.prefix.begin(), out.prefix.end());
  context.insert(context.end(), vocab::kInducerSequence.begin(), vocab::kInducerSequence.end());
  try {
    sampler.reset(context);
  } catch (const GenerationError&) {
    out.overflowed = true;
    out.correct = false;
    return out;
  }
  if (sampler.remaining() <= 0) {
    out.overflowed = true;
    out.correct = false;
    return out;
  }

  bool capped = false;
  sample_answer(sampler, cfg, rng, out.answer, out.terminator, capped);
  out.correct = verify_answer(out.answer_payload(), gt);
  return out;
}

std::optional<SerialGroup> build_serial_group(const Query& q, const GroundTruth& gt,
                                              SequenceSampler& sampler,
                                              const RolloutConfig& cfg, Rng& rng) {
  SerialGroup group;
  group.query = q;
  group.truth = gt;
  group.full = full_thought_rollout(q, gt, sampler, cfg, rng);
  const int n = group.full.thought_length();
  if (n == 0) return std::nullopt;

  const TruncationPlan plan =
      sample_truncation_positions(n, cfg.requested_m, rng, cfg.allow_duplicate_positions);
  if (plan.positions.empty()) return std::nullopt;

  group.exits.reserve(plan.positions.size());
  for (int position : plan.positions) {
    group.exits.push_back(early_exit_rollout(group.full, position, gt, sampler, cfg, rng));
  }
  return group;
}

std::vector<ReasoningTrace> build_parallel_group(const Query& q, const GroundTruth& gt,
                                                 SequenceSampler& sampler,
                                                 const RolloutConfig& cfg, Rng& rng,
                                                 int group_size) {
  std::vector<ReasoningTrace> traces;
  traces.reserve(static_cast<std::size_t>(group_size));
  for (int g = 0; g < group_size; ++g) {
    Rng stream = rng.split(static_cast<std::uint64_t>(g));
    traces.push_back(full_thought_rollout(q, gt, sampler, cfg, stream));
  }
  return traces;
}

FilterResult over_sample_filter(std::vector<SerialGroup> groups, int target_batch,
                                RewardMode mode) {
  if (target_batch < 1) throw ConfigError("over_sample_filter: target_batch must be >= 1");
  FilterResult result;
  std::vector<std::size_t> qualifying;
  std::vector<std::pair<double, std::size_t>> fallback;  // (variance, index)
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    const bool has_correct_exit =
        std::any_of(g.exits.begin(), g.exits.end(), [](const auto& e) { return e.correct; });
    const double var = reward_variance(assign_rewards(g, mode).rewards);
    if (has_correct_exit && var > 0.0) {
      qualifying.push_back(i);
    } else {
      fallback.emplace_back(var, i);
    }
  }

  result.qualified = static_cast<int>(qualifying.size());
  for (std::size_t k = 0; k < qualifying.size() && static_cast<int>(result.groups.size()) < target_batch; ++k) {
    result.groups.push_back(std::move(groups[qualifying[k]]));
  }

  if (static_cast<int>(result.groups.size()) < target_batch) {
    result.shortfall = true;
    // Highest-variance leftovers first; index breaks ties deterministically.
    std::stable_sort(fallback.begin(), fallback.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [var, idx] : fallback) {
      if (static_cast<int>(result.groups.size()) >= target_batch) break;
      result.groups.push_back(std::move(groups[idx]));
      ++result.padded;
    }
  }
  if (result.qualified == 0) {
    // Nothing carries signal; the caller should skip the step.
    result.groups.clear();
    result.shortfall = true;
  }
  return result;
}

}  // namespace sgrpo
