#include "sgrpo/surrogate.hpp"

#include <cmath>

#include "sgrpo/errors.hpp"

namespace sgrpo {

void validate(const ClipConfig& cfg) {
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) {
    throw ConfigError("ClipConfig: epsilon must lie in (0, 1)");
  }
}

namespace {

// Masked positions of an output as (logits row, token) pairs plus the
// recorded old logprobs. Position t is predicted by logits row t-1; t = 0
// is never masked in (the query is excluded by construction).
struct MaskedTokens {
  std::vector<std::pair<int, int>> logit_index;
  std::vector<double> old_logprobs;
};

MaskedTokens collect_masked(const OutputView& out) {
  MaskedTokens mt;
  for (std::size_t t = 0; t < out.tokens.size(); ++t) {
    if (!out.mask[t]) continue;
    if (t == 0) throw ConfigError("surrogate: masked-in token at position 0");
    mt.logit_index.emplace_back(static_cast<int>(t) - 1, out.tokens[t]);
    mt.old_logprobs.push_back(out.old_logprobs[t]);
  }
  return mt;
}

}  // namespace

Tape::NodeId surrogate_loss_node(Tape& tape, Tape::NodeId theta, const ArchConfig& arch,
                                 const AdvantageBatch& batch, const ClipConfig& cfg) {
  validate(cfg);
  if (batch.outputs.empty()) throw ConfigError("surrogate: empty batch");
  const int group_size = static_cast<int>(batch.outputs.size());

  Tape::NodeId objective = tape.constant(Tensor(1, 1));
  for (std::size_t i = 0; i < batch.outputs.size(); ++i) {
    const OutputView& out = batch.outputs[i];
    const MaskedTokens mt = collect_masked(out);
    if (mt.logit_index.empty()) continue;  // no sampled tokens, no loss term
    const int token_count = static_cast<int>(mt.logit_index.size());

    const auto logits = policy_logits_node(tape, theta, arch, out.tokens);
    const auto logprobs = tape.row_log_softmax(logits);
    const auto new_lp = tape.gather_elems(logprobs, mt.logit_index);
    const auto old_lp = tape.constant(Tensor(1, token_count, mt.old_logprobs));
    const auto ratio = tape.exp_op(tape.sub(new_lp, old_lp));
    if (!tape.value(ratio).all_finite()) {
      throw NumericError("surrogate: non-finite importance ratio in output " +
                         std::to_string(i) + " (" + std::to_string(token_count) + " tokens)");
    }

    const double advantage = batch.advantages[i];
    const auto unclipped = tape.scale(ratio, advantage);
    const auto clipped =
        tape.scale(tape.clamp(ratio, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon), advantage);
    const auto token_terms = tape.min_op(unclipped, clipped);
    const auto contribution =
        tape.scale(tape.sum(token_terms),
                   1.0 / (static_cast<double>(group_size) * static_cast<double>(token_count)));
    objective = tape.add(objective, contribution);
  }
  return tape.scale(objective, -1.0);
}

SurrogateResult clipped_surrogate(const AdvantageBatch& batch, const PolicyParams& params,
                                  const ClipConfig& cfg) {
  auto [loss, gradient] = value_and_grad(params, [&](Tape& tape, Tape::NodeId theta) {
    return surrogate_loss_node(tape, theta, params.arch, batch, cfg);
  });
  return SurrogateResult{loss, std::move(gradient)};
}

double surrogate_objective(const AdvantageBatch& batch, const PolicyParams& params,
                           const ClipConfig& cfg) {
  Tape tape;
  const auto theta =
      tape.constant(Tensor(1, static_cast<int>(params.theta.size()), params.theta));
  const auto loss = surrogate_loss_node(tape, theta, params.arch, batch, cfg);
  const double value = -tape.value(loss).data[0];
  if (!std::isfinite(value)) throw NumericError("surrogate: objective is not finite");
  return value;
}

Tape::NodeId nll_loss_node(Tape& tape, Tape::NodeId theta, const ArchConfig& arch,
                           const std::vector<TokenId>& tokens,
                           const std::vector<std::uint8_t>& mask) {
  if (tokens.size() != mask.size()) throw ConfigError("nll: mask length mismatch");
  std::vector<std::pair<int, int>> idx;
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    if (mask[t]) idx.emplace_back(static_cast<int>(t) - 1, tokens[t]);
  }
  if (idx.empty()) throw ConfigError("nll: no masked-in tokens");
  const auto logits = policy_logits_node(tape, theta, arch, tokens);
  const auto logprobs = tape.row_log_softmax(logits);
  const auto picked = tape.gather_elems(logprobs, idx);
  return tape.scale(tape.sum(picked), -1.0 / static_cast<double>(idx.size()));
}

}  // namespace sgrpo
