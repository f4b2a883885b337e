#ifndef SGRPO_POLICY_HPP_
#define SGRPO_POLICY_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sgrpo/autodiff.hpp"
#include "sgrpo/rng.hpp"
#include "sgrpo/tensor.hpp"
#include "sgrpo/vocab.hpp"

namespace sgrpo {

// Shape of the micro policy: a stack of pre-norm causal self-attention
// blocks (single head) with tanh MLPs, RMS norms and an untied output head.
struct ArchConfig {
  int vocab_size = vocab::kVocabSize;
  int embed_dim = 32;
  int context_window = 64;
  int hidden_dim = 64;
  int layer_count = 1;
};

std::size_t param_count(const ArchConfig& arch);

struct PolicyParams {
  ArchConfig arch;
  std::vector<double> theta;
};

// Gaussian init for weights, zeros for biases, ones for norm gains.
PolicyParams init_params(const ArchConfig& arch, Rng& rng);

struct ForwardResult {
  Tensor logits;    // L x vocab, position t scores the token at t+1
  Tensor logprobs;  // log softmax of logits, row-wise
};

// Full-sequence forward. Deterministic; throws GenerationError when the
// context exceeds the window.
ForwardResult forward(const PolicyParams& params, std::span<const TokenId> context);

// Differentiable forward: returns the L x vocab logits node. `theta` must be
// a flat 1 x param_count node on the tape. This is the single code path all
// losses go through, so loss numerics match forward() exactly.
Tape::NodeId policy_logits_node(Tape& tape, Tape::NodeId theta, const ArchConfig& arch,
                                std::span<const TokenId> context);

// Samples from softmax(logits / temperature). temperature == 0 is the
// documented limit: argmax. Returns the token and its log-probability under
// the temperature-1 distribution (what the surrogate ratio needs).
struct TokenSample {
  TokenId token = 0;
  double logprob = 0.0;
};
TokenSample sample_from_logits(std::span<const double> logits, double temperature, Rng& rng);

// Samples the next token from the last position of a ForwardResult.
TokenSample sample_token(const ForwardResult& fr, double temperature, Rng& rng);

// Incremental decoder with a per-layer KV cache; produces the same logits
// as forward() over the same prefix. This is the rollout hot path.
class IncrementalDecoder {
 public:
  explicit IncrementalDecoder(const PolicyParams& params);

  // Rewinds to an empty context; the cache is reused in place.
  void reset() { pos_ = 0; logprobs_valid_ = false; }

  // Appends one token and returns the logits for the next position.
  std::span<const double> push(TokenId token);
  // Appends tokens without needing the intermediate logits... except the
  // last; convenience over repeated push().
  std::span<const double> push_all(std::span<const TokenId> tokens);

  int length() const { return pos_; }
  int remaining() const;
  const std::vector<double>& logits() const { return logits_; }
  // Log-probability of `token` under the current (temperature-1) next-token
  // distribution.
  double logprob_of(TokenId token) const;

 private:
  struct LayerCache {
    Tensor k;  // window x embed
    Tensor v;
  };

  const PolicyParams* params_;
  std::vector<LayerCache> cache_;
  int pos_ = 0;
  std::vector<double> logits_;
  mutable std::vector<double> logprobs_;
  mutable bool logprobs_valid_ = false;
  // scratch
  std::vector<double> x_, xn_, q_, kv_, attn_, hidden_, scores_;
};

// Differentiable scalar loss built from a flat theta node.
using LossClosure = std::function<Tape::NodeId(Tape&, Tape::NodeId)>;

// d(loss)/d(theta). Throws NumericError when the loss is not finite.
std::vector<double> grad(const PolicyParams& params, const LossClosure& loss);

// Convenience: loss value and gradient in one tape pass.
std::pair<double, std::vector<double>> value_and_grad(const PolicyParams& params,
                                                      const LossClosure& loss);

struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
};

OptimizerState make_optimizer_state(std::size_t n);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard bias-corrected Adam, in place. Throws NumericError on non-finite
// gradients.
void adam_step(PolicyParams& params, std::span<const double> grads, OptimizerState& state,
               const AdamConfig& cfg);

// Versioned binary checkpoint: arch, theta, optimizer state, rng stream and
// the trainer's step counter. Loading resumes training bit-identically on
// the same platform.
struct Checkpoint {
  PolicyParams params;
  OptimizerState opt;
  Rng rng;
  std::int64_t completed_steps = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sgrpo

#endif  // SGRPO_POLICY_HPP_
