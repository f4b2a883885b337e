#include "sgrpo/tasks.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "sgrpo/errors.hpp"

namespace sgrpo {

TokenId op_token(OpKind op) {
  switch (op) {
    case OpKind::kAdd: return vocab::kAdd;
    case OpKind::kSub: return vocab::kSub;
    case OpKind::kMulMod: return vocab::kMulMod;
  }
  throw ConfigError("op_token: unknown operator");
}

std::optional<OpKind> op_from_token(TokenId t) {
  if (t == vocab::kAdd) return OpKind::kAdd;
  if (t == vocab::kSub) return OpKind::kSub;
  if (t == vocab::kMulMod) return OpKind::kMulMod;
  return std::nullopt;
}

GroundTruth evaluate_chain(const Query& q) {
  GroundTruth gt;
  gt.ideal_steps.reserve(q.ops.size());
  int v = q.start_value;
  for (const auto& [op, operand] : q.ops) {
    switch (op) {
      case OpKind::kAdd: v = (v + operand) % q.modulus; break;
      case OpKind::kSub: v = ((v - operand) % q.modulus + q.modulus) % q.modulus; break;
      case OpKind::kMulMod: v = (v * operand) % q.modulus; break;
    }
    gt.ideal_steps.push_back(v);
  }
  gt.answer = v;
  return gt;
}

std::pair<Query, GroundTruth> generate_task(std::uint64_t rng_seed, int difficulty,
                                            const TaskGenConfig& cfg) {
  if (difficulty < 1 || difficulty > cfg.max_difficulty) {
    throw ConfigError("generate_task: difficulty " + std::to_string(difficulty) +
                      " outside [1, " + std::to_string(cfg.max_difficulty) + "]");
  }
  Rng rng(rng_seed);
  Query q;
  q.id = rng_seed;
  q.modulus = cfg.modulus;
  q.start_value = static_cast<int>(rng.uniform_int(0, cfg.modulus - 1));
  q.ops.reserve(static_cast<std::size_t>(difficulty));
  for (int i = 0; i < difficulty; ++i) {
    const auto op = static_cast<OpKind>(rng.uniform_int(0, 2));
    const int operand = static_cast<int>(rng.uniform_int(0, cfg.modulus - 1));
    q.ops.emplace_back(op, operand);
  }
  return {q, evaluate_chain(q)};
}

std::vector<TokenId> encode_query(const Query& q) {
  if (q.ops.empty()) throw ConfigError("encode_query: query must have at least one op");
  if (q.modulus > 10) {
    throw ConfigError("encode_query: modulus above 10 is not representable in digit tokens");
  }
  std::vector<TokenId> out;
  out.reserve(3 + 2 * q.ops.size());
  out.push_back(vocab::kBos);
  out.push_back(q.start_value);
  for (const auto& [op, operand] : q.ops) {
    out.push_back(op_token(op));
    out.push_back(operand);
  }
  out.push_back(vocab::kSep);
  return out;
}

Query decode_query(const std::vector<TokenId>& tokens, int modulus) {
  if (tokens.size() < 5 || tokens.front() != vocab::kBos || tokens.back() != vocab::kSep ||
      tokens.size() % 2 != 1) {
    throw IoError("decode_query: malformed token layout");
  }
  Query q;
  q.modulus = modulus;
  if (!vocab::is_digit(tokens[1])) throw IoError("decode_query: start value is not a digit");
  q.start_value = tokens[1];
  for (std::size_t i = 2; i + 1 < tokens.size(); i += 2) {
    const auto op = op_from_token(tokens[i]);
    if (!op || !vocab::is_digit(tokens[i + 1])) {
      throw IoError("decode_query: malformed op pair");
    }
    q.ops.emplace_back(*op, tokens[i + 1]);
  }
  return q;
}

bool verify_answer(const std::vector<TokenId>& answer_tokens, const GroundTruth& gt) {
  if (answer_tokens.empty() || answer_tokens.size() > 6) return false;
  long value = 0;
  for (TokenId t : answer_tokens) {
    if (!vocab::is_digit(t)) return false;
    value = value * 10 + t;
  }
  return value == gt.answer;
}

void save_task_specs(std::ostream& os, const std::vector<TaskSpec>& specs) {
  os << "# id,seed,difficulty\n";
  for (const auto& s : specs) {
    os << s.id << ',' << s.seed << ',' << s.difficulty << '\n';
  }
}

std::vector<TaskSpec> load_task_specs(std::istream& is) {
  std::vector<TaskSpec> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    TaskSpec s;
    char c1 = 0, c2 = 0;
    if (!(ls >> s.id >> c1 >> s.seed >> c2 >> s.difficulty) || c1 != ',' || c2 != ',') {
      throw IoError("task file: malformed line " + std::to_string(lineno));
    }
    out.push_back(s);
  }
  return out;
}

std::vector<TaskSpec> make_task_specs(std::uint64_t base_seed, int count,
                                      int difficulty_min, int difficulty_max) {
  if (difficulty_min < 1 || difficulty_max < difficulty_min) {
    throw ConfigError("make_task_specs: bad difficulty range");
  }
  Rng rng(base_seed);
  std::vector<TaskSpec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    TaskSpec s;
    s.id = static_cast<std::uint64_t>(i);
    s.seed = rng.next_u64();
    s.difficulty = static_cast<int>(rng.uniform_int(difficulty_min, difficulty_max));
    out.push_back(s);
  }
  return out;
}

std::pair<Query, GroundTruth> instantiate(const TaskSpec& spec, const TaskGenConfig& cfg) {
  auto [q, gt] = generate_task(spec.seed, spec.difficulty, cfg);
  q.id = spec.id;
  return {std::move(q), std::move(gt)};
}

}  // namespace sgrpo
