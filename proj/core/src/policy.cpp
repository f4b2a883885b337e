#include "sgrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sgrpo/errors.hpp"

namespace sgrpo {

namespace {

// Offsets of each weight inside the flat theta vector.
struct ParamLayout {
  struct Layer {
    int wq, wk, wv, wo, g_attn, w1, b1, w2, b2, g_mlp;
  };
  int tok_emb = 0;
  int pos_emb = 0;
  std::vector<Layer> layers;
  int g_final = 0;
  int w_out = 0;
  int b_out = 0;
  int total = 0;
};

ParamLayout make_layout(const ArchConfig& a) {
  ParamLayout l;
  int off = 0;
  auto take = [&off](int count) {
    const int at = off;
    off += count;
    return at;
  };
  l.tok_emb = take(a.vocab_size * a.embed_dim);
  l.pos_emb = take(a.context_window * a.embed_dim);
  l.layers.resize(static_cast<std::size_t>(a.layer_count));
  for (auto& layer : l.layers) {
    layer.wq = take(a.embed_dim * a.embed_dim);
    layer.wk = take(a.embed_dim * a.embed_dim);
    layer.wv = take(a.embed_dim * a.embed_dim);
    layer.wo = take(a.embed_dim * a.embed_dim);
    layer.g_attn = take(a.embed_dim);
    layer.w1 = take(a.embed_dim * a.hidden_dim);
    layer.b1 = take(a.hidden_dim);
    layer.w2 = take(a.hidden_dim * a.embed_dim);
    layer.b2 = take(a.embed_dim);
    layer.g_mlp = take(a.embed_dim);
  }
  l.g_final = take(a.embed_dim);
  l.w_out = take(a.embed_dim * a.vocab_size);
  l.b_out = take(a.vocab_size);
  l.total = off;
  return l;
}

void validate_arch(const ArchConfig& a) {
  if (a.vocab_size < 2 || a.embed_dim < 1 || a.context_window < 2 || a.hidden_dim < 1 ||
      a.layer_count < 1) {
    throw ConfigError("ArchConfig: all dimensions must be positive");
  }
}

void validate_context(const ArchConfig& arch, std::size_t len) {
  if (len == 0) throw GenerationError("forward: empty context");
  if (len > static_cast<std::size_t>(arch.context_window)) {
    throw GenerationError("forward: context length " + std::to_string(len) +
                          " exceeds window " + std::to_string(arch.context_window));
  }
  (void)arch;
}

double normal_draw(Rng& rng) {
  const double u1 = 1.0 - rng.uniform_real();
  const double u2 = rng.uniform_real();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor causal_mask(int len) {
  Tensor m(len, len);
  for (int i = 0; i < len; ++i) {
    for (int j = i + 1; j < len; ++j) m.at(i, j) = -1e30;
  }
  return m;
}

constexpr char kCkptMagic[8] = {'S', 'G', 'R', 'P', 'O', 'C', 'K', '1'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("checkpoint: truncated file");
  return v;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  write_pod<std::uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& is) {
  const auto n = read_pod<std::uint64_t>(is);
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw IoError("checkpoint: truncated payload");
  return v;
}

}  // namespace

std::size_t param_count(const ArchConfig& arch) {
  validate_arch(arch);
  return static_cast<std::size_t>(make_layout(arch).total);
}

PolicyParams init_params(const ArchConfig& arch, Rng& rng) {
  validate_arch(arch);
  const ParamLayout layout = make_layout(arch);
  PolicyParams p;
  p.arch = arch;
  p.theta.assign(static_cast<std::size_t>(layout.total), 0.0);
  auto fill_normal = [&](int offset, int count, double std_dev) {
    for (int i = 0; i < count; ++i) p.theta[static_cast<std::size_t>(offset + i)] = std_dev * normal_draw(rng);
  };
  auto fill_value = [&](int offset, int count, double v) {
    std::fill_n(p.theta.begin() + offset, count, v);
  };
  const int d = arch.embed_dim, h = arch.hidden_dim, v = arch.vocab_size;
  fill_normal(layout.tok_emb, v * d, 0.3);
  fill_normal(layout.pos_emb, arch.context_window * d, 0.3);
  for (const auto& layer : layout.layers) {
    fill_normal(layer.wq, d * d, 0.15);
    fill_normal(layer.wk, d * d, 0.15);
    fill_normal(layer.wv, d * d, 0.15);
    fill_normal(layer.wo, d * d, 0.15);
    fill_value(layer.g_attn, d, 1.0);
    fill_normal(layer.w1, d * h, 0.15);
    fill_value(layer.b1, h, 0.0);
    fill_normal(layer.w2, h * d, 0.15);
    fill_value(layer.b2, d, 0.0);
    fill_value(layer.g_mlp, d, 1.0);
  }
  fill_value(layout.g_final, d, 1.0);
  fill_normal(layout.w_out, d * v, 0.15);
  fill_value(layout.b_out, v, 0.0);
  return p;
}

Tape::NodeId policy_logits_node(Tape& tape, Tape::NodeId theta, const ArchConfig& arch,
                                std::span<const TokenId> context) {
  validate_arch(arch);
  validate_context(arch, context.size());
  const ParamLayout layout = make_layout(arch);
  const int len = static_cast<int>(context.size());
  const int d = arch.embed_dim, h = arch.hidden_dim, v = arch.vocab_size;

  const auto tok_emb = tape.view(theta, layout.tok_emb, v, d);
  const auto pos_emb = tape.view(theta, layout.pos_emb, arch.context_window, d);

  std::vector<int> ids(context.begin(), context.end());
  for (TokenId t : ids) {
    if (!vocab::is_valid(t) || t >= v) throw GenerationError("forward: token id out of vocab");
  }
  std::vector<int> positions(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) positions[static_cast<std::size_t>(i)] = i;

  auto x = tape.add(tape.gather_rows(tok_emb, ids), tape.gather_rows(pos_emb, positions));
  const auto mask = tape.constant(causal_mask(len));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  for (const auto& layer : layout.layers) {
    const auto xn = tape.rms_norm(x, tape.view(theta, layer.g_attn, 1, d));
    const auto q = tape.matmul(xn, tape.view(theta, layer.wq, d, d));
    const auto k = tape.matmul(xn, tape.view(theta, layer.wk, d, d));
    const auto vv = tape.matmul(xn, tape.view(theta, layer.wv, d, d));
    auto scores = tape.add(tape.scale(tape.matmul_bt(q, k), inv_sqrt_d), mask);
    const auto probs = tape.row_softmax(scores);
    const auto attn = tape.matmul(probs, vv);
    x = tape.add(x, tape.matmul(attn, tape.view(theta, layer.wo, d, d)));

    const auto hn = tape.rms_norm(x, tape.view(theta, layer.g_mlp, 1, d));
    const auto hidden = tape.tanh_op(tape.add_rowvec(tape.matmul(hn, tape.view(theta, layer.w1, d, h)),
                                                     tape.view(theta, layer.b1, 1, h)));
    const auto mlp = tape.add_rowvec(tape.matmul(hidden, tape.view(theta, layer.w2, h, d)),
                                     tape.view(theta, layer.b2, 1, d));
    x = tape.add(x, mlp);
  }

  const auto fn = tape.rms_norm(x, tape.view(theta, layout.g_final, 1, d));
  return tape.add_rowvec(tape.matmul(fn, tape.view(theta, layout.w_out, d, v)),
                         tape.view(theta, layout.b_out, 1, v));
}

ForwardResult forward(const PolicyParams& params, std::span<const TokenId> context) {
  Tape tape;
  const auto theta = tape.constant(Tensor(1, static_cast<int>(params.theta.size()), params.theta));
  const auto logits = policy_logits_node(tape, theta, params.arch, context);
  ForwardResult fr;
  fr.logits = tape.value(logits);
  fr.logprobs = Tensor(fr.logits.rows, fr.logits.cols);
  for (int r = 0; r < fr.logits.rows; ++r) {
    kernels::log_softmax_row(fr.logits.row(r), fr.logprobs.row(r));
  }
  return fr;
}

TokenSample sample_from_logits(std::span<const double> logits, double temperature, Rng& rng) {
  if (temperature < 0.0) throw ConfigError("sample: temperature must be >= 0");
  TokenSample out;
  if (temperature == 0.0) {
    int best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
      if (logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    out.token = best;
    out.logprob = 0.0;
    return out;
  }
  std::vector<double> probs(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = logits[i] / temperature;
  kernels::softmax_row(probs);
  const double u = rng.uniform_real();
  double cdf = 0.0;
  int tok = static_cast<int>(logits.size()) - 1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cdf += probs[i];
    if (u < cdf) {
      tok = static_cast<int>(i);
      break;
    }
  }
  out.token = tok;
  out.logprob = std::log(probs[static_cast<std::size_t>(tok)]);
  return out;
}

TokenSample sample_token(const ForwardResult& fr, double temperature, Rng& rng) {
  return sample_from_logits(fr.logits.row(fr.logits.rows - 1), temperature, rng);
}

IncrementalDecoder::IncrementalDecoder(const PolicyParams& params) : params_(&params) {
  validate_arch(params.arch);
  if (params.theta.size() != param_count(params.arch)) {
    throw ConfigError("IncrementalDecoder: theta size does not match arch");
  }
  const auto& a = params.arch;
  cache_.resize(static_cast<std::size_t>(a.layer_count));
  for (auto& c : cache_) {
    c.k = Tensor(a.context_window, a.embed_dim);
    c.v = Tensor(a.context_window, a.embed_dim);
  }
  logits_.assign(static_cast<std::size_t>(a.vocab_size), 0.0);
  logprobs_.assign(static_cast<std::size_t>(a.vocab_size), 0.0);
  x_.resize(static_cast<std::size_t>(a.embed_dim));
  xn_.resize(static_cast<std::size_t>(a.embed_dim));
  q_.resize(static_cast<std::size_t>(a.embed_dim));
  kv_.resize(static_cast<std::size_t>(a.embed_dim));
  attn_.resize(static_cast<std::size_t>(a.embed_dim));
  hidden_.resize(static_cast<std::size_t>(a.hidden_dim));
  scores_.resize(static_cast<std::size_t>(a.context_window));
}

int IncrementalDecoder::remaining() const { return params_->arch.context_window - pos_; }

std::span<const double> IncrementalDecoder::push(TokenId token) {
  const auto& a = params_->arch;
  if (pos_ >= a.context_window) {
    throw GenerationError("decode: context window exhausted");
  }
  if (!vocab::is_valid(token) || token >= a.vocab_size) {
    throw GenerationError("decode: token id out of vocab");
  }
  const ParamLayout layout = make_layout(a);
  const double* theta = params_->theta.data();
  const int d = a.embed_dim, h = a.hidden_dim;

  // Row-vector matvec with the same accumulation order as the tape matmul,
  // so losses and rollouts see identical logits.
  auto matvec = [](const double* xv, const double* w, double* y, int in_dim, int out_dim) {
    std::fill(y, y + out_dim, 0.0);
    for (int k = 0; k < in_dim; ++k) {
      const double xk = xv[k];
      if (xk == 0.0) continue;
      const double* wrow = w + static_cast<std::size_t>(k) * out_dim;
      for (int j = 0; j < out_dim; ++j) y[j] += xk * wrow[j];
    }
  };

  const double* tok_row = theta + layout.tok_emb + static_cast<std::size_t>(token) * d;
  const double* pos_row = theta + layout.pos_emb + static_cast<std::size_t>(pos_) * d;
  for (int i = 0; i < d; ++i) x_[static_cast<std::size_t>(i)] = tok_row[i] + pos_row[i];

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (int li = 0; li < a.layer_count; ++li) {
    const auto& lw = layout.layers[static_cast<std::size_t>(li)];
    auto& cache = cache_[static_cast<std::size_t>(li)];

    kernels::rmsnorm_row(x_, {theta + lw.g_attn, static_cast<std::size_t>(d)}, xn_,
                         kernels::kRmsNormEps);
    matvec(xn_.data(), theta + lw.wq, q_.data(), d, d);
    matvec(xn_.data(), theta + lw.wk, kv_.data(), d, d);
    std::copy(kv_.begin(), kv_.end(), cache.k.row(pos_).begin());
    matvec(xn_.data(), theta + lw.wv, kv_.data(), d, d);
    std::copy(kv_.begin(), kv_.end(), cache.v.row(pos_).begin());

    const int t = pos_ + 1;  // attend over [0, pos_]
    for (int j = 0; j < t; ++j) {
      const auto krow = cache.k.row(j);
      double acc = 0.0;
      for (int c = 0; c < d; ++c) acc += q_[static_cast<std::size_t>(c)] * krow[c];
      scores_[static_cast<std::size_t>(j)] = acc * inv_sqrt_d;
    }
    kernels::softmax_row({scores_.data(), static_cast<std::size_t>(t)});
    std::fill(attn_.begin(), attn_.end(), 0.0);
    for (int j = 0; j < t; ++j) {
      const double pj = scores_[static_cast<std::size_t>(j)];
      if (pj == 0.0) continue;
      const auto vrow = cache.v.row(j);
      for (int c = 0; c < d; ++c) attn_[static_cast<std::size_t>(c)] += pj * vrow[c];
    }
    matvec(attn_.data(), theta + lw.wo, kv_.data(), d, d);
    for (int c = 0; c < d; ++c) x_[static_cast<std::size_t>(c)] += kv_[static_cast<std::size_t>(c)];

    kernels::rmsnorm_row(x_, {theta + lw.g_mlp, static_cast<std::size_t>(d)}, xn_,
                         kernels::kRmsNormEps);
    matvec(xn_.data(), theta + lw.w1, hidden_.data(), d, h);
    const double* b1 = theta + lw.b1;
    for (int c = 0; c < h; ++c) hidden_[static_cast<std::size_t>(c)] = std::tanh(hidden_[static_cast<std::size_t>(c)] + b1[c]);
    matvec(hidden_.data(), theta + lw.w2, kv_.data(), h, d);
    const double* b2 = theta + lw.b2;
    for (int c = 0; c < d; ++c) x_[static_cast<std::size_t>(c)] += kv_[static_cast<std::size_t>(c)] + b2[c];
  }

  kernels::rmsnorm_row(x_, {theta + layout.g_final, static_cast<std::size_t>(d)}, xn_,
                       kernels::kRmsNormEps);
  matvec(xn_.data(), theta + layout.w_out, logits_.data(), d, a.vocab_size);
  const double* b_out = theta + layout.b_out;
  for (int c = 0; c < a.vocab_size; ++c) logits_[static_cast<std::size_t>(c)] += b_out[c];

  ++pos_;
  logprobs_valid_ = false;
  return logits_;
}

std::span<const double> IncrementalDecoder::push_all(std::span<const TokenId> tokens) {
  if (tokens.empty()) throw GenerationError("decode: empty token span");
  for (TokenId t : tokens) push(t);
  return logits_;
}

double IncrementalDecoder::logprob_of(TokenId token) const {
  if (!logprobs_valid_) {
    kernels::log_softmax_row(logits_, logprobs_);
    logprobs_valid_ = true;
  }
  return logprobs_[static_cast<std::size_t>(token)];
}

std::vector<double> grad(const PolicyParams& params, const LossClosure& loss) {
  return value_and_grad(params, loss).second;
}

std::pair<double, std::vector<double>> value_and_grad(const PolicyParams& params,
                                                      const LossClosure& loss) {
  Tape tape;
  const auto theta = tape.leaf(Tensor(1, static_cast<int>(params.theta.size()), params.theta));
  const auto root = loss(tape, theta);
  const Tensor& rv = tape.value(root);
  if (rv.rows != 1 || rv.cols != 1) throw NumericError("grad: loss must be scalar");
  const double loss_value = rv.data[0];
  if (!std::isfinite(loss_value)) {
    throw NumericError("grad: loss is not finite (" + std::to_string(loss_value) + ")");
  }
  tape.backward(root);
  const Tensor& g = tape.grad(theta);
  if (g.size() == 0) {
    return {loss_value, std::vector<double>(params.theta.size(), 0.0)};
  }
  return {loss_value, g.data};
}

OptimizerState make_optimizer_state(std::size_t n) {
  OptimizerState s;
  s.first_moment.assign(n, 0.0);
  s.second_moment.assign(n, 0.0);
  s.step_count = 0;
  return s;
}

void adam_step(PolicyParams& params, std::span<const double> grads, OptimizerState& state,
               const AdamConfig& cfg) {
  const std::size_t n = params.theta.size();
  if (grads.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw ConfigError("adam_step: shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient entry");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grads[i];
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    params.theta[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot open " + path + " for writing");
  os.write(kCkptMagic, sizeof(kCkptMagic));
  const auto& a = ckpt.params.arch;
  write_pod<std::int32_t>(os, a.vocab_size);
  write_pod<std::int32_t>(os, a.embed_dim);
  write_pod<std::int32_t>(os, a.context_window);
  write_pod<std::int32_t>(os, a.hidden_dim);
  write_pod<std::int32_t>(os, a.layer_count);
  write_doubles(os, ckpt.params.theta);
  write_doubles(os, ckpt.opt.first_moment);
  write_doubles(os, ckpt.opt.second_moment);
  write_pod<std::int64_t>(os, ckpt.opt.step_count);
  write_pod<std::int64_t>(os, ckpt.completed_steps);
  std::ostringstream rng_text;
  ckpt.rng.save(rng_text);
  const std::string rs = rng_text.str();
  write_pod<std::uint64_t>(os, rs.size());
  os.write(rs.data(), static_cast<std::streamsize>(rs.size()));
  if (!os) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0) {
    throw IoError("checkpoint: bad magic in " + path);
  }
  Checkpoint c;
  c.params.arch.vocab_size = read_pod<std::int32_t>(is);
  c.params.arch.embed_dim = read_pod<std::int32_t>(is);
  c.params.arch.context_window = read_pod<std::int32_t>(is);
  c.params.arch.hidden_dim = read_pod<std::int32_t>(is);
  c.params.arch.layer_count = read_pod<std::int32_t>(is);
  c.params.theta = read_doubles(is);
  if (c.params.theta.size() != param_count(c.params.arch)) {
    throw IoError("checkpoint: theta size inconsistent with arch");
  }
  c.opt.first_moment = read_doubles(is);
  c.opt.second_moment = read_doubles(is);
  c.opt.step_count = read_pod<std::int64_t>(is);
  c.completed_steps = read_pod<std::int64_t>(is);
  const auto rng_len = read_pod<std::uint64_t>(is);
  std::string rs(rng_len, '\0');
  is.read(rs.data(), static_cast<std::streamsize>(rng_len));
  if (!is) throw IoError("checkpoint: truncated rng state");
  std::istringstream rng_text(rs);
  c.rng.load(rng_text);
  return c;
}

}  // namespace sgrpo
