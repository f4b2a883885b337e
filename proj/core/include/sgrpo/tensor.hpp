#ifndef SGRPO_TENSOR_HPP_
#define SGRPO_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace sgrpo {

// Row-major 2-D matrix of doubles. Everything in the micro policy is small
// (dims <= 64), so plain loops beat a heavyweight linear-algebra dependency.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  Tensor(int r, int c, std::vector<double> values);

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  std::span<double> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
  std::span<const double> row(int r) const { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  void fill(double v);
  bool all_finite() const;
};

namespace kernels {

// c += a * b   (a: m x k, b: k x n, c: m x n)
void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c);
// c += a^T * b (a: k x m, b: k x n, c: m x n)
void matmul_at_acc(const Tensor& a, const Tensor& b, Tensor& c);
// c += a * b^T (a: m x k, b: n x k, c: m x n)
void matmul_bt_acc(const Tensor& a, const Tensor& b, Tensor& c);

// In-place stabilized softmax of one row; `row` and output share storage.
void softmax_row(std::span<double> row);
// out[i] = log softmax(row)[i], stabilized.
void log_softmax_row(std::span<const double> row, std::span<double> out);

// y_i = gain_i * x_i / sqrt(mean(x^2) + eps); returns the rms denominator.
double rmsnorm_row(std::span<const double> x, std::span<const double> gain,
                   std::span<double> y, double eps);

constexpr double kRmsNormEps = 1e-8;

}  // namespace kernels
}  // namespace sgrpo

#endif  // SGRPO_TENSOR_HPP_
