#ifndef SGRPO_SURROGATE_HPP_
#define SGRPO_SURROGATE_HPP_

#include <vector>

#include "sgrpo/autodiff.hpp"
#include "sgrpo/policy.hpp"
#include "sgrpo/reward_mode.hpp"
#include "sgrpo/rewards.hpp"

namespace sgrpo {

struct ClipConfig {
  double epsilon = 0.2;  // importance-ratio bound, in (0, 1)
  RewardMode reward_mode = RewardMode::kDecaying;
};

void validate(const ClipConfig& cfg);

// Differentiable negated objective for one group:
//   J = (1/G) sum_i (1/|o_i|) sum_t min(rho * A_i, clip(rho, 1-eps, 1+eps) * A_i)
// with rho = exp(new_logprob - old_logprob) over masked-in tokens only and
// |o_i| the masked-in count. Old logprobs are the ones recorded at sampling
// time, i.e. the behavior policy's. Returns the loss node (-J).
Tape::NodeId surrogate_loss_node(Tape& tape, Tape::NodeId theta, const ArchConfig& arch,
                                 const AdvantageBatch& batch, const ClipConfig& cfg);

struct SurrogateResult {
  double loss = 0.0;                 // -J
  std::vector<double> gradient;      // d(loss)/d(theta)
};

// Loss and analytic gradient of the clipped surrogate for one group.
// Throws NumericError when a ratio or the loss is non-finite.
SurrogateResult clipped_surrogate(const AdvantageBatch& batch, const PolicyParams& params,
                                  const ClipConfig& cfg);

// Objective value alone (J, not negated), without touching gradients.
double surrogate_objective(const AdvantageBatch& batch, const PolicyParams& params,
                           const ClipConfig& cfg);

// Teacher-forcing negative log-likelihood over masked-in tokens of one
// sequence, normalized by the masked count. Shares the forward path with
// the surrogate.
Tape::NodeId nll_loss_node(Tape& tape, Tape::NodeId theta, const ArchConfig& arch,
                           const std::vector<TokenId>& tokens,
                           const std::vector<std::uint8_t>& mask);

}  // namespace sgrpo

#endif  // SGRPO_SURROGATE_HPP_
