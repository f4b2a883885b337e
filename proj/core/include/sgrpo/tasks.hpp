#ifndef SGRPO_TASKS_HPP_
#define SGRPO_TASKS_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgrpo/rng.hpp"
#include "sgrpo/vocab.hpp"

namespace sgrpo {

enum class OpKind : int { kAdd = 0, kSub = 1, kMulMod = 2 };

TokenId op_token(OpKind op);
std::optional<OpKind> op_from_token(TokenId t);

// A modular-arithmetic chain: start with a value, apply k operations, all
// modulo `modulus`. Correctness of an emitted answer is decidable by rule.
struct Query {
  std::uint64_t id = 0;
  int start_value = 0;
  std::vector<std::pair<OpKind, int>> ops;
  int modulus = 10;

  int difficulty() const { return static_cast<int>(ops.size()); }
};

struct GroundTruth {
  int answer = 0;
  std::vector<int> ideal_steps;  // running value after each op
};

struct TaskGenConfig {
  int modulus = 10;
  int max_difficulty = 12;
};

// Deterministic for a fixed (seed, difficulty); the ground truth is exact
// sequential evaluation of the op chain.
std::pair<Query, GroundTruth> generate_task(std::uint64_t rng_seed, int difficulty,
                                            const TaskGenConfig& cfg = {});

// Re-runs the chain; shared by generation and the verifier tests.
GroundTruth evaluate_chain(const Query& q);

// Layout: BOS, start, (op, operand) x k, SEP. Length is 2 + 2k + 1.
std::vector<TokenId> encode_query(const Query& q);

// Inverse of encode_query; throws IoError on malformed input.
Query decode_query(const std::vector<TokenId>& tokens, int modulus = 10);

// True iff `answer_tokens` is a pure digit string decoding to gt.answer.
// Malformed answers (empty, non-digit tokens, overlong) are incorrect,
// never an error.
bool verify_answer(const std::vector<TokenId>& answer_tokens, const GroundTruth& gt);

// A reproducible task corpus entry: the task is regenerated from
// (seed, difficulty); id is the corpus-local identifier.
struct TaskSpec {
  std::uint64_t id = 0;
  std::uint64_t seed = 0;
  int difficulty = 1;
};

// One task per line: "id,seed,difficulty". '#' starts a comment.
void save_task_specs(std::ostream& os, const std::vector<TaskSpec>& specs);
std::vector<TaskSpec> load_task_specs(std::istream& is);

std::vector<TaskSpec> make_task_specs(std::uint64_t base_seed, int count,
                                      int difficulty_min, int difficulty_max);

// Materializes a spec; the query id is taken from the spec.
std::pair<Query, GroundTruth> instantiate(const TaskSpec& spec,
                                          const TaskGenConfig& cfg = {});

}  // namespace sgrpo

#endif  // SGRPO_TASKS_HPP_
