#ifndef SGRPO_VOCAB_HPP_
#define SGRPO_VOCAB_HPP_

#include <array>
#include <string>

namespace sgrpo {

using TokenId = int;

// Fixed symbolic vocabulary. Ids 0..9 are the digits; the remaining slots
// are operators and structural markers, with unused ids reserved so the
// policy's output dimension stays at kVocabSize.
namespace vocab {

inline constexpr int kVocabSize = 32;

inline constexpr TokenId kDigit0 = 0;  // digits d are token ids d
inline constexpr TokenId kAdd = 10;
inline constexpr TokenId kSub = 11;
inline constexpr TokenId kMulMod = 12;
inline constexpr TokenId kBos = 13;
inline constexpr TokenId kSep = 14;
inline constexpr TokenId kEndThink = 15;
inline constexpr TokenId kEos = 16;
inline constexpr TokenId kInducer = 17;

constexpr bool is_digit(TokenId t) { return t >= 0 && t <= 9; }
constexpr bool is_operator(TokenId t) { return t == kAdd || t == kSub || t == kMulMod; }
constexpr bool is_structural(TokenId t) {
  return t == kBos || t == kSep || t == kEndThink || t == kEos || t == kInducer;
}
constexpr bool is_valid(TokenId t) { return t >= 0 && t < kVocabSize; }

// The forced early-exit sequence: "stop thinking, answer now".
inline constexpr std::array<TokenId, 2> kInducerSequence = {kInducer, kEndThink};

inline std::string token_name(TokenId t) {
  if (is_digit(t)) return std::to_string(t);
  switch (t) {
    case kAdd: return "ADD";
    case kSub: return "SUB";
    case kMulMod: return "MUL";
    case kBos: return "BOS";
    case kSep: return "SEP";
    case kEndThink: return "END_THINK";
    case kEos: return "EOS";
    case kInducer: return "INDUCER";
    default: return "RSV" + std::to_string(t);
  }
}

}  // namespace vocab
}  // namespace sgrpo

#endif  // SGRPO_VOCAB_HPP_
