#ifndef SGRPO_RNG_HPP_
#define SGRPO_RNG_HPP_

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace sgrpo {

// Deterministic random source. The engine (mt19937_64) produces the same
// stream on every platform; the draw helpers below avoid std:: distributions,
// whose outputs are implementation-defined and would break cross-platform
// reproducibility of generated tasks and rollouts.
class Rng {
 public:
  Rng() : engine_(0) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [lo, hi], inclusive. Rejection sampling, no modulo bias.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Uniform in [0, 1) with 53 random bits.
  double uniform_real();

  // Derives an independent child stream; (seed, salt) pairs give distinct,
  // reproducible streams for parallel workers.
  Rng split(std::uint64_t salt);

  std::uint64_t next_u64() { return engine_(); }

  void save(std::ostream& os) const;
  void load(std::istream& is);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

// Shuffles indices [1..n], returns the first k sorted ascending.
std::vector<int> sample_without_replacement(int n, int k, Rng& rng);

}  // namespace sgrpo

#endif  // SGRPO_RNG_HPP_
