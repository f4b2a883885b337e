#include <doctest.h>

#include <cmath>

#include "sgrpo/errors.hpp"
#include "sgrpo/rewards.hpp"
#include "test_util.hpp"

using namespace sgrpo;

namespace {

// Brute-force oracle: the reward recurrence written out verbatim, kept
// independent of the implementation.
std::vector<double> decaying_oracle(const std::vector<bool>& flags) {
  std::vector<double> r;
  int n_right = 0;
  for (bool c : flags) {
    if (c) {
      n_right += 1;
      r.push_back(1.0 / std::pow(2.0, n_right - 1));
    } else {
      r.push_back(0.0);
    }
  }
  return r;
}

}  // namespace

TEST_CASE("rewards: decaying assignment on the documented patterns") {
  CHECK(assign_decaying_rewards({false, true, true, true}).rewards ==
        std::vector<double>{0.0, 1.0, 0.5, 0.25});
  CHECK(assign_decaying_rewards({false, false, false}).rewards ==
        std::vector<double>{0.0, 0.0, 0.0});
  CHECK(assign_decaying_rewards({true, false, true, true, false}).rewards ==
        std::vector<double>{1.0, 0.0, 0.5, 0.25, 0.0});
}

TEST_CASE("rewards: empty group is a contract violation") {
  CHECK_THROWS_AS(assign_decaying_rewards({}), ConfigError);
}

TEST_CASE("rewards: every pattern up to G = 9 matches the brute-force oracle bitwise") {
  for (int g = 1; g <= 9; ++g) {
    for (unsigned pattern = 0; pattern < (1u << g); ++pattern) {
      std::vector<bool> flags(static_cast<std::size_t>(g));
      for (int i = 0; i < g; ++i) flags[static_cast<std::size_t>(i)] = (pattern >> i) & 1u;
      const auto got = assign_decaying_rewards(flags);
      const auto want = decaying_oracle(flags);
      REQUIRE(got.rewards.size() == want.size());
      for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(got.rewards[i] == want[i]);  // exact: powers of two
      }
    }
  }
}

TEST_CASE("rewards: n_right trace counts cumulative correct answers") {
  const auto rv = assign_decaying_rewards({true, false, true, true});
  CHECK(rv.n_right_trace == std::vector<int>{1, 1, 2, 3});
}

TEST_CASE("rewards: correct rewards halve strictly in position order") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<bool> flags(static_cast<std::size_t>(1 + rng.uniform_int(0, 8)));
    for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = rng.uniform_real() < 0.5;
    const auto rv = assign_decaying_rewards(flags);
    double prev = 2.0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (!flags[i]) {
        CHECK(rv.rewards[i] == 0.0);
        continue;
      }
      CHECK(rv.rewards[i] == prev / 2.0);
      prev = rv.rewards[i];
    }
  }
}

TEST_CASE("rewards: shortest_1 pays the shortest correct response only") {
  // corrects at indices 1 and 2 with lengths 10 and 14
  const auto rv = assign_ablation_rewards({false, true, true, false}, {9, 10, 14, 20},
                                          RewardMode::kShortest1);
  CHECK(rv.rewards == std::vector<double>{0.0, 1.0, 0.0, 0.0});
}

TEST_CASE("rewards: shortest_1 breaks length ties toward the earliest position") {
  for (const auto& flags : {std::vector<bool>{true, true, true},
                            std::vector<bool>{false, true, true}}) {
    const std::vector<int> lengths(flags.size(), 12);
    const auto rv = assign_ablation_rewards(flags, lengths, RewardMode::kShortest1);
    int paid = -1;
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (rv.rewards[i] == 1.0) {
        paid = static_cast<int>(i);
        break;
      }
    }
    // earliest correct index wins
    int first_correct = -1;
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (flags[i]) {
        first_correct = static_cast<int>(i);
        break;
      }
    }
    CHECK(paid == first_correct);
  }
}

TEST_CASE("rewards: all_1 pays every correct output") {
  const auto rv =
      assign_ablation_rewards({true, true, false}, {5, 6, 7}, RewardMode::kAll1);
  CHECK(rv.rewards == std::vector<double>{1.0, 1.0, 0.0});
}

TEST_CASE("advantages: documented arithmetic") {
  RewardVector rv;
  rv.rewards = {1.0, 0.5, 0.25, 0.0};
  CHECK(compute_advantages(rv) == std::vector<double>{0.5625, 0.0625, -0.1875, -0.4375});
  rv.rewards = {1.0, 0.0};
  CHECK(compute_advantages(rv) == std::vector<double>{0.5, -0.5});
  // All-equal rewards: the attainable cases (all zero, all one, all the
  // same power of two) subtract out exactly.
  for (double r : {0.0, 1.0, 0.5, 0.25}) {
    rv.rewards = {r, r, r};
    for (double a : compute_advantages(rv)) CHECK(a == 0.0);
  }
}

TEST_CASE("advantages: zero-sum within 1e-12 on random reward vectors") {
  Rng rng(4);
  for (int trial = 0; trial < 10000; ++trial) {
    RewardVector rv;
    const int g = 1 + static_cast<int>(rng.uniform_int(0, 8));
    for (int i = 0; i < g; ++i) rv.rewards.push_back(rng.uniform_real());
    const auto adv = compute_advantages(rv);
    double sum = 0.0;
    for (double a : adv) sum += a;
    CHECK(std::abs(sum) <= 1e-12);
  }
}

TEST_CASE("broadcast: validates alignment and counts masked tokens") {
  OutputView ok;
  ok.tokens = {13, 1, 2};
  ok.mask = {0, 1, 1};
  ok.old_logprobs = {0.0, -0.5, -0.7};
  CHECK(ok.masked_count() == 2);

  OutputView bad = ok;
  bad.mask.pop_back();
  CHECK_THROWS_AS(broadcast_advantages({0.0}, {bad}), ConfigError);
  CHECK_THROWS_AS(broadcast_advantages({0.0, 0.1}, {ok}), ConfigError);

  const auto batch = broadcast_advantages({0.25}, {ok});
  CHECK(batch.masked_token_count() == 2);
}
