#include "sgrpo/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "sgrpo/errors.hpp"

namespace sgrpo {

std::string to_string(Algorithm a) {
  return a == Algorithm::kSGrpo ? "s_grpo" : "grpo";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "s_grpo") return Algorithm::kSGrpo;
  if (s == "grpo") return Algorithm::kGrpo;
  throw ConfigError("unknown algorithm: " + s + " (expected s_grpo or grpo)");
}

void validate(TrainerConfig& cfg) {
  if (cfg.algorithm == Algorithm::kGrpo) {
    // Mode purity: the baseline is plain parallel-group GRPO.
    cfg.reward_mode = RewardMode::kParallel01;
  } else if (cfg.reward_mode == RewardMode::kParallel01) {
    throw ConfigError("config: parallel_01 rewards require algorithm = grpo");
  }
  if (!(cfg.clip_epsilon > 0.0 && cfg.clip_epsilon < 1.0)) {
    throw ConfigError("config: clip_epsilon must lie in (0, 1)");
  }
  if (cfg.batch_groups < 1) throw ConfigError("config: batch_groups must be >= 1");
  if (cfg.oversample_factor < 1.0) {
    throw ConfigError("config: oversample_factor must be >= 1");
  }
  if (cfg.steps < 0) throw ConfigError("config: steps must be >= 0");
  if (cfg.rollout.requested_m < 1) throw ConfigError("config: requested_m must be >= 1");
  if (cfg.rollout.temperature != 1.0) {
    throw ConfigError("config: training rollouts must sample at temperature 1 "
                      "(the recorded logprobs are the surrogate's old policy)");
  }
  if (cfg.difficulty_min < 1 || cfg.difficulty_max < cfg.difficulty_min) {
    throw ConfigError("config: bad difficulty range");
  }
  if (cfg.redundancy_min < 0 || cfg.redundancy_max < cfg.redundancy_min) {
    throw ConfigError("config: bad redundancy range");
  }
  if (cfg.step_repeat_max < 1) {
    throw ConfigError("config: step_repeat_max must be >= 1");
  }
  if (cfg.warmstart_target_acc < 0.0 || cfg.warmstart_target_acc > 1.0) {
    throw ConfigError("config: warmstart_target_acc must lie in [0, 1]");
  }
  if (cfg.warmstart_exit_fraction < 0.0 || cfg.warmstart_exit_fraction > 1.0) {
    throw ConfigError("config: warmstart_exit_fraction must lie in [0, 1]");
  }
  if (cfg.eval_every < 1 || cfg.eval_trials < 1 || cfg.eval_tasks < 1) {
    throw ConfigError("config: eval settings must be positive");
  }
  // The longest query plus markers and answer must fit the window.
  const int max_query = 3 + 2 * cfg.difficulty_max;
  if (max_query + cfg.rollout.max_answer_tokens + 3 > cfg.arch.context_window) {
    throw ConfigError("config: context_window too small for difficulty_max");
  }
}

namespace {

std::map<std::string, std::string> parse_kv(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: missing '=' on line " + std::to_string(lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(lineno));
    if (!kv.emplace(key, value).second) {
      throw ConfigError("config: duplicate key '" + key + "'");
    }
  }
  return kv;
}

int to_int(const std::string& k, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + k + "' expects an integer, got '" + v + "'");
  }
}

double to_double(const std::string& k, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + k + "' expects a number, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& k, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + k + "' expects an unsigned integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: key '" + k + "' expects a boolean, got '" + v + "'");
}

}  // namespace

TrainerConfig load_trainer_config(std::istream& is) {
  const auto kv = parse_kv(is);
  TrainerConfig cfg;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"algorithm", [&](const std::string&, const std::string& v) { cfg.algorithm = algorithm_from_string(v); }},
      {"reward_mode", [&](const std::string&, const std::string& v) { cfg.reward_mode = reward_mode_from_string(v); }},
      {"vocab_size", [&](const std::string& k, const std::string& v) { cfg.arch.vocab_size = to_int(k, v); }},
      {"embed_dim", [&](const std::string& k, const std::string& v) { cfg.arch.embed_dim = to_int(k, v); }},
      {"context_window", [&](const std::string& k, const std::string& v) { cfg.arch.context_window = to_int(k, v); }},
      {"hidden_dim", [&](const std::string& k, const std::string& v) { cfg.arch.hidden_dim = to_int(k, v); }},
      {"layer_count", [&](const std::string& k, const std::string& v) { cfg.arch.layer_count = to_int(k, v); }},
      {"requested_m", [&](const std::string& k, const std::string& v) { cfg.rollout.requested_m = to_int(k, v); }},
      {"max_thought_tokens", [&](const std::string& k, const std::string& v) { cfg.rollout.max_thought_tokens = to_int(k, v); }},
      {"max_answer_tokens", [&](const std::string& k, const std::string& v) { cfg.rollout.max_answer_tokens = to_int(k, v); }},
      {"temperature", [&](const std::string& k, const std::string& v) { cfg.rollout.temperature = to_double(k, v); }},
      {"allow_duplicate_positions", [&](const std::string& k, const std::string& v) { cfg.rollout.allow_duplicate_positions = to_bool(k, v); }},
      {"clip_epsilon", [&](const std::string& k, const std::string& v) { cfg.clip_epsilon = to_double(k, v); }},
      {"mask_shared_prefix", [&](const std::string& k, const std::string& v) { cfg.mask_shared_prefix = to_bool(k, v); }},
      {"batch_groups", [&](const std::string& k, const std::string& v) { cfg.batch_groups = to_int(k, v); }},
      {"oversample_factor", [&](const std::string& k, const std::string& v) { cfg.oversample_factor = to_double(k, v); }},
      {"lr", [&](const std::string& k, const std::string& v) { cfg.adam.lr = to_double(k, v); }},
      {"beta1", [&](const std::string& k, const std::string& v) { cfg.adam.beta1 = to_double(k, v); }},
      {"beta2", [&](const std::string& k, const std::string& v) { cfg.adam.beta2 = to_double(k, v); }},
      {"adam_eps", [&](const std::string& k, const std::string& v) { cfg.adam.eps = to_double(k, v); }},
      {"steps", [&](const std::string& k, const std::string& v) { cfg.steps = to_int(k, v); }},
      {"seed", [&](const std::string& k, const std::string& v) { cfg.seed = to_u64(k, v); }},
      {"threads", [&](const std::string& k, const std::string& v) { cfg.threads = to_int(k, v); }},
      {"modulus", [&](const std::string& k, const std::string& v) { cfg.modulus = to_int(k, v); }},
      {"difficulty_min", [&](const std::string& k, const std::string& v) { cfg.difficulty_min = to_int(k, v); }},
      {"difficulty_max", [&](const std::string& k, const std::string& v) { cfg.difficulty_max = to_int(k, v); }},
      {"step_repeat_max", [&](const std::string& k, const std::string& v) { cfg.step_repeat_max = to_int(k, v); }},
      {"redundancy_min", [&](const std::string& k, const std::string& v) { cfg.redundancy_min = to_int(k, v); }},
      {"redundancy_max", [&](const std::string& k, const std::string& v) { cfg.redundancy_max = to_int(k, v); }},
      {"warmstart_tasks", [&](const std::string& k, const std::string& v) { cfg.warmstart_tasks = to_int(k, v); }},
      {"warmstart_batch", [&](const std::string& k, const std::string& v) { cfg.warmstart_batch = to_int(k, v); }},
      {"warmstart_max_epochs", [&](const std::string& k, const std::string& v) { cfg.warmstart_max_epochs = to_int(k, v); }},
      {"warmstart_lr", [&](const std::string& k, const std::string& v) { cfg.warmstart_lr = to_double(k, v); }},
      {"warmstart_target_acc", [&](const std::string& k, const std::string& v) { cfg.warmstart_target_acc = to_double(k, v); }},
      {"warmstart_exit_fraction", [&](const std::string& k, const std::string& v) { cfg.warmstart_exit_fraction = to_double(k, v); }},
      {"eval_tasks", [&](const std::string& k, const std::string& v) { cfg.eval_tasks = to_int(k, v); }},
      {"eval_trials", [&](const std::string& k, const std::string& v) { cfg.eval_trials = to_int(k, v); }},
      {"eval_every", [&](const std::string& k, const std::string& v) { cfg.eval_every = to_int(k, v); }},
      {"checkpoint_every", [&](const std::string& k, const std::string& v) { cfg.checkpoint_every = to_int(k, v); }},
      {"eval_answer_reserve", [&](const std::string& k, const std::string& v) { cfg.eval_answer_reserve = to_int(k, v); }},
  };
  for (const auto& [key, value] : kv) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second(key, value);
  }
  validate(cfg);
  return cfg;
}

TrainerConfig load_trainer_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path);
  return load_trainer_config(is);
}

void save_trainer_config(std::ostream& os, const TrainerConfig& cfg) {
  os << "algorithm = " << to_string(cfg.algorithm) << '\n'
     << "reward_mode = " << to_string(cfg.reward_mode) << '\n'
     << "vocab_size = " << cfg.arch.vocab_size << '\n'
     << "embed_dim = " << cfg.arch.embed_dim << '\n'
     << "context_window = " << cfg.arch.context_window << '\n'
     << "hidden_dim = " << cfg.arch.hidden_dim << '\n'
     << "layer_count = " << cfg.arch.layer_count << '\n'
     << "requested_m = " << cfg.rollout.requested_m << '\n'
     << "max_thought_tokens = " << cfg.rollout.max_thought_tokens << '\n'
     << "max_answer_tokens = " << cfg.rollout.max_answer_tokens << '\n'
     << "temperature = " << cfg.rollout.temperature << '\n'
     << "allow_duplicate_positions = " << (cfg.rollout.allow_duplicate_positions ? "true" : "false") << '\n'
     << "clip_epsilon = " << cfg.clip_epsilon << '\n'
     << "mask_shared_prefix = " << (cfg.mask_shared_prefix ? "true" : "false") << '\n'
     << "batch_groups = " << cfg.batch_groups << '\n'
     << "oversample_factor = " << cfg.oversample_factor << '\n'
     << "lr = " << cfg.adam.lr << '\n'
     << "beta1 = " << cfg.adam.beta1 << '\n'
     << "beta2 = " << cfg.adam.beta2 << '\n'
     << "adam_eps = " << cfg.adam.eps << '\n'
     << "steps = " << cfg.steps << '\n'
     << "seed = " << cfg.seed << '\n'
     << "threads = " << cfg.threads << '\n'
     << "modulus = " << cfg.modulus << '\n'
     << "difficulty_min = " << cfg.difficulty_min << '\n'
     << "difficulty_max = " << cfg.difficulty_max << '\n'
     << "step_repeat_max = " << cfg.step_repeat_max << '\n'
     << "redundancy_min = " << cfg.redundancy_min << '\n'
     << "redundancy_max = " << cfg.redundancy_max << '\n'
     << "warmstart_tasks = " << cfg.warmstart_tasks << '\n'
     << "warmstart_batch = " << cfg.warmstart_batch << '\n'
     << "warmstart_max_epochs = " << cfg.warmstart_max_epochs << '\n'
     << "warmstart_lr = " << cfg.warmstart_lr << '\n'
     << "warmstart_target_acc = " << cfg.warmstart_target_acc << '\n'
     << "warmstart_exit_fraction = " << cfg.warmstart_exit_fraction << '\n'
     << "eval_tasks = " << cfg.eval_tasks << '\n'
     << "eval_trials = " << cfg.eval_trials << '\n'
     << "eval_every = " << cfg.eval_every << '\n'
     << "checkpoint_every = " << cfg.checkpoint_every << '\n'
     << "eval_answer_reserve = " << cfg.eval_answer_reserve << '\n';
}

}  // namespace sgrpo
