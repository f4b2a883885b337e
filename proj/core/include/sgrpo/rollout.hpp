#ifndef SGRPO_ROLLOUT_HPP_
#define SGRPO_ROLLOUT_HPP_

#include <optional>
#include <span>
#include <vector>

#include "sgrpo/policy.hpp"
#include "sgrpo/reward_mode.hpp"
#include "sgrpo/rng.hpp"
#include "sgrpo/tasks.hpp"
#include "sgrpo/vocab.hpp"

namespace sgrpo {

// One generated token with the behavior-policy log-probability recorded at
// sampling time. Forced tokens (inducer, cap-inserted END_THINK) carry
// sampled == false and no valid logprob.
struct TokenRecord {
  TokenId token = 0;
  double logprob = 0.0;
  bool sampled = true;
};

// The full-thought rollout O^0: query, thought, end-of-think marker, answer.
// The thought segment never contains END_THINK; the answer payload holds
// only non-structural tokens, with the structural token that ended the
// answer phase (normally EOS) kept in `terminator`.
struct ReasoningTrace {
  std::vector<TokenId> query_tokens;
  std::vector<TokenRecord> thought;
  TokenRecord end_think;
  std::vector<TokenRecord> answer;
  std::optional<TokenRecord> terminator;
  bool thought_capped = false;
  bool answer_capped = false;
  bool correct = false;

  int thought_length() const { return static_cast<int>(thought.size()); }
  std::vector<TokenId> answer_payload() const;
};

struct TruncationPlan {
  std::vector<int> positions;  // ascending, in [1, n]
  int requested_m = 0;
};

struct EarlyExitOutput {
  int position = 0;                     // P, prefix = parent thought [1..P]
  std::vector<TokenId> prefix;          // verbatim copy of those tokens
  std::vector<TokenRecord> answer;
  std::optional<TokenRecord> terminator;
  bool correct = false;
  bool overflowed = false;  // context did not fit; marked incorrect

  std::vector<TokenId> answer_payload() const;
};

struct SerialGroup {
  Query query;
  GroundTruth truth;
  ReasoningTrace full;                 // O^0, ordered last in the group
  std::vector<EarlyExitOutput> exits;  // ascending positions

  int group_size() const { return static_cast<int>(exits.size()) + 1; }
  const std::vector<TokenId>& query_tokens() const { return full.query_tokens; }
  // Correctness flags in group order [O^1..O^m', O^0].
  std::vector<bool> correct_flags() const;
  // Response token counts |o_i| in the same order (thought prefix + exit
  // markers + answer), used by the shortest-response reward.
  std::vector<int> response_lengths() const;
};

struct RolloutConfig {
  int requested_m = 8;
  int max_thought_tokens = 24;
  int max_answer_tokens = 4;
  double temperature = 1.0;
  bool allow_duplicate_positions = false;
};

// Abstract autoregressive token source so rollouts can run against the real
// policy or a scripted stand-in in tests.
class SequenceSampler {
 public:
  virtual ~SequenceSampler() = default;
  virtual void reset(std::span<const TokenId> context) = 0;
  // Samples the next token and advances the context.
  virtual TokenSample sample(Rng& rng) = 0;
  // Appends a forced token (not drawn from the policy).
  virtual void force(TokenId token) = 0;
  // Tokens that still fit in the context window.
  virtual int remaining() const = 0;
};

class PolicySampler final : public SequenceSampler {
 public:
  PolicySampler(const PolicyParams& params, double temperature);
  void reset(std::span<const TokenId> context) override;
  TokenSample sample(Rng& rng) override;
  void force(TokenId token) override;
  int remaining() const override { return decoder_.remaining(); }

 private:
  IncrementalDecoder decoder_;
  double temperature_;
};

// Generates the complete reasoning path. Stops the thought at a sampled
// END_THINK or force-inserts it at the cap (flagged, never fatal).
ReasoningTrace full_thought_rollout(const Query& q, const GroundTruth& gt,
                                    SequenceSampler& sampler, const RolloutConfig& cfg,
                                    Rng& rng);

// min(requested_m, n) distinct positions, uniform without replacement,
// sorted ascending. n < 1 yields an empty plan (the group-rejected signal).
// With allow_duplicates, draws requested_m positions independently instead.
TruncationPlan sample_truncation_positions(int n, int requested_m, Rng& rng,
                                           bool allow_duplicates = false);

// Answers from the truncated thought prefix with the forced inducer
// sequence appended. Position must be in [1, n].
EarlyExitOutput early_exit_rollout(const ReasoningTrace& trace, int position,
                                   const GroundTruth& gt, SequenceSampler& sampler,
                                   const RolloutConfig& cfg, Rng& rng);

// Full pipeline for one query; nullopt when the thought is empty.
std::optional<SerialGroup> build_serial_group(const Query& q, const GroundTruth& gt,
                                              SequenceSampler& sampler,
                                              const RolloutConfig& cfg, Rng& rng);

// G independent full rollouts (the parallel-group baseline).
std::vector<ReasoningTrace> build_parallel_group(const Query& q, const GroundTruth& gt,
                                                 SequenceSampler& sampler,
                                                 const RolloutConfig& cfg, Rng& rng,
                                                 int group_size);

struct FilterResult {
  std::vector<SerialGroup> groups;
  int qualified = 0;
  int padded = 0;
  bool shortfall = false;  // padding was needed (or nothing qualified)
};

// Keeps groups that contain a correct early exit and non-degenerate reward
// variance under `mode`, truncated to target_batch. Pads from the best
// non-qualifying groups on shortfall; an empty result means skip the step.
FilterResult over_sample_filter(std::vector<SerialGroup> groups, int target_batch,
                                RewardMode mode);

}  // namespace sgrpo

#endif  // SGRPO_ROLLOUT_HPP_
