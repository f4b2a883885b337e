#include <doctest.h>

#include <cmath>
#include <functional>

#include "sgrpo/autodiff.hpp"
#include "sgrpo/tensor.hpp"
#include "test_util.hpp"

using namespace sgrpo;
using testutil::central_difference;
using testutil::grad_error;
using testutil::random_tensor;

namespace {

// Builds a scalar from a leaf tensor and checks the tape gradient against
// the central-difference oracle on every coordinate.
void check_op(int rows, int cols,
              const std::function<Tape::NodeId(Tape&, Tape::NodeId)>& make_scalar,
              std::uint64_t seed, double tol = 2e-7) {
  Rng rng(seed);
  const Tensor init = random_tensor(rows, cols, rng);

  Tape tape;
  const auto leaf = tape.leaf(init);
  const auto root = make_scalar(tape, leaf);
  tape.backward(root);
  const Tensor analytic = tape.grad(leaf);

  const auto f = [&](const std::vector<double>& theta) {
    Tape t2;
    const auto l2 = t2.leaf(Tensor(rows, cols, theta));
    return t2.value(make_scalar(t2, l2)).data[0];
  };
  for (std::size_t i = 0; i < init.size(); ++i) {
    const double numeric = central_difference(f, init.data, i, 1e-5);
    CAPTURE(i);
    CHECK(grad_error(analytic.data[i], numeric) < tol);
  }
}

// Weight the op output by a fixed random tensor so every entry matters.
Tape::NodeId weighted_sum(Tape& tape, Tape::NodeId x, std::uint64_t seed) {
  const Tensor& v = tape.value(x);
  Rng rng(seed);
  return tape.sum(tape.mul(x, tape.constant(random_tensor(v.rows, v.cols, rng))));
}

}  // namespace

TEST_CASE("autodiff: elementwise ops match finite differences") {
  check_op(3, 4, [](Tape& t, Tape::NodeId x) {
    return weighted_sum(t, t.tanh_op(x), 11);
  }, 100);
  check_op(3, 4, [](Tape& t, Tape::NodeId x) {
    return weighted_sum(t, t.exp_op(x), 12);
  }, 101);
  check_op(3, 4, [](Tape& t, Tape::NodeId x) {
    return weighted_sum(t, t.scale(x, -2.5), 13);
  }, 102);
  check_op(2, 5, [](Tape& t, Tape::NodeId x) {
    Rng rng(55);
    const auto other = t.constant(random_tensor(2, 5, rng));
    return weighted_sum(t, t.mul(t.add(x, other), t.sub(x, other)), 14);
  }, 103);
}

TEST_CASE("autodiff: clamp and min route gradients to the active branch") {
  check_op(3, 4, [](Tape& t, Tape::NodeId x) {
    return weighted_sum(t, t.clamp(x, -0.4, 0.4), 15);
  }, 104);
  check_op(3, 4, [](Tape& t, Tape::NodeId x) {
    Rng rng(56);
    const auto other = t.constant(random_tensor(3, 4, rng));
    return weighted_sum(t, t.min_op(x, other), 16);
  }, 105);
  // both-sides-differentiable min
  check_op(3, 4, [](Tape& t, Tape::NodeId x) {
    return weighted_sum(t, t.min_op(t.scale(x, 1.5), t.tanh_op(x)), 17);
  }, 106);
}

TEST_CASE("autodiff: matmul family matches finite differences") {
  check_op(3, 4, [](Tape& t, Tape::NodeId x) {
    Rng rng(57);
    const auto w = t.constant(random_tensor(4, 5, rng));
    return weighted_sum(t, t.matmul(x, w), 18);
  }, 107);
  check_op(4, 5, [](Tape& t, Tape::NodeId x) {
    Rng rng(58);
    const auto a = t.constant(random_tensor(3, 4, rng));
    return weighted_sum(t, t.matmul(a, x), 19);
  }, 108);
  check_op(3, 4, [](Tape& t, Tape::NodeId x) {
    Rng rng(59);
    const auto b = t.constant(random_tensor(6, 4, rng));
    return weighted_sum(t, t.matmul_bt(x, b), 20);
  }, 109);
  check_op(6, 4, [](Tape& t, Tape::NodeId x) {
    Rng rng(60);
    const auto a = t.constant(random_tensor(3, 4, rng));
    return weighted_sum(t, t.matmul_bt(a, x), 21);
  }, 110);
}

TEST_CASE("autodiff: softmax, log-softmax, rmsnorm match finite differences") {
  check_op(3, 6, [](Tape& t, Tape::NodeId x) {
    return weighted_sum(t, t.row_softmax(x), 22);
  }, 111);
  check_op(3, 6, [](Tape& t, Tape::NodeId x) {
    return weighted_sum(t, t.row_log_softmax(x), 23);
  }, 112);
  check_op(3, 6, [](Tape& t, Tape::NodeId x) {
    Rng rng(61);
    const auto gain = t.constant(random_tensor(1, 6, rng));
    return weighted_sum(t, t.rms_norm(x, gain), 24);
  }, 113);
  // gain gradient
  check_op(1, 6, [](Tape& t, Tape::NodeId gain) {
    Rng rng(62);
    const auto x = t.constant(random_tensor(3, 6, rng));
    return weighted_sum(t, t.rms_norm(x, gain), 25);
  }, 114);
}

TEST_CASE("autodiff: gather/view/add_rowvec match finite differences") {
  check_op(5, 3, [](Tape& t, Tape::NodeId x) {
    return weighted_sum(t, t.gather_rows(x, {0, 2, 2, 4}), 26);
  }, 115);
  check_op(4, 4, [](Tape& t, Tape::NodeId x) {
    return weighted_sum(t, t.gather_elems(x, {{0, 1}, {2, 3}, {2, 3}, {3, 0}}), 27);
  }, 116);
  check_op(1, 12, [](Tape& t, Tape::NodeId x) {
    return weighted_sum(t, t.view(x, 2, 2, 4), 28);
  }, 117);
  check_op(3, 4, [](Tape& t, Tape::NodeId x) {
    Rng rng(63);
    const auto v = t.constant(random_tensor(1, 4, rng));
    return weighted_sum(t, t.add_rowvec(x, v), 29);
  }, 118);
  check_op(1, 4, [](Tape& t, Tape::NodeId v) {
    Rng rng(64);
    const auto m = t.constant(random_tensor(3, 4, rng));
    return weighted_sum(t, t.add_rowvec(m, v), 30);
  }, 119);
}

TEST_CASE("autodiff: value reuse in a diamond graph accumulates correctly") {
  check_op(2, 3, [](Tape& t, Tape::NodeId x) {
    const auto a = t.tanh_op(x);
    const auto b = t.exp_op(x);
    return weighted_sum(t, t.add(t.mul(a, b), a), 31);
  }, 120);
}

TEST_CASE("autodiff: softmax rows sum to one") {
  Rng rng(77);
  Tape tape;
  const auto x = tape.constant(random_tensor(4, 9, rng, 3.0));
  const Tensor& y = tape.value(tape.row_softmax(x));
  for (int r = 0; r < y.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < y.cols; ++c) s += y.at(r, c);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("autodiff: backward on a constant-only graph leaves empty grads") {
  Tape tape;
  const auto c = tape.constant(Tensor(1, 1, {3.0}));
  const auto root = tape.scale(c, 2.0);
  tape.backward(root);
  CHECK(tape.grad(c).size() == 0);
}
