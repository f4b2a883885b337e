#include "sgrpo/rng.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace sgrpo {

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) {  // full 64-bit range
    return static_cast<std::int64_t>(engine_());
  }
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

double Rng::uniform_real() {
  // 53-bit mantissa in [0,1)
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

Rng Rng::split(std::uint64_t salt) {
  // Mix a fresh engine draw with the salt through splitmix64 finalization.
  std::uint64_t z = engine_() + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z = z ^ (z >> 31);
  return Rng(z);
}

void Rng::save(std::ostream& os) const { os << engine_; }

void Rng::load(std::istream& is) { is >> engine_; }

std::vector<int> sample_without_replacement(int n, int k, Rng& rng) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i + 1;
  const int take = std::min(k, n);
  for (int i = 0; i < take; ++i) {
    const int j =
        static_cast<int>(rng.uniform_int(i, static_cast<std::int64_t>(n) - 1));
    std::swap(pool[static_cast<std::size_t>(i)],
              pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(take));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace sgrpo
