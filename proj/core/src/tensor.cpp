#include "sgrpo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sgrpo {

Tensor::Tensor(int r, int c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != static_cast<std::size_t>(r) * c) {
    throw std::invalid_argument("Tensor: value count does not match shape");
  }
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace kernels {

void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + static_cast<std::size_t>(i) * a.cols;
    double* crow = c.data.data() + static_cast<std::size_t>(i) * c.cols;
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.data.data() + static_cast<std::size_t>(k) * b.cols;
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_at_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  // c (a.cols x b.cols) += a^T b, a and b share the leading dim.
  for (int k = 0; k < a.rows; ++k) {
    const double* arow = a.data.data() + static_cast<std::size_t>(k) * a.cols;
    const double* brow = b.data.data() + static_cast<std::size_t>(k) * b.cols;
    for (int i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c.data.data() + static_cast<std::size_t>(i) * c.cols;
      for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
}

void matmul_bt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + static_cast<std::size_t>(i) * a.cols;
    double* crow = c.data.data() + static_cast<std::size_t>(i) * c.cols;
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = b.data.data() + static_cast<std::size_t>(j) * b.cols;
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      crow[j] += acc;
    }
  }
}

void softmax_row(std::span<double> row) {
  double mx = row[0];
  for (double v : row) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  const double inv = 1.0 / sum;
  for (double& v : row) v *= inv;
}

void log_softmax_row(std::span<const double> row, std::span<double> out) {
  double mx = row[0];
  for (double v : row) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) sum += std::exp(row[i] - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] - lse;
}

double rmsnorm_row(std::span<const double> x, std::span<const double> gain,
                   std::span<double> y, double eps) {
  double ms = 0.0;
  for (double v : x) ms += v * v;
  ms /= static_cast<double>(x.size());
  const double r = std::sqrt(ms + eps);
  const double inv = 1.0 / r;
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = gain[i] * x[i] * inv;
  return r;
}

}  // namespace kernels
}  // namespace sgrpo
