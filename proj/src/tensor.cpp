#include "exitnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

namespace exitnet {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape size " + std::to_string(shape_size(shape_)));
  }
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor(Shape{rows, cols}, std::move(v));
}

double Tensor::item() const {
  if (data_.size() != 1) throw std::invalid_argument("item() on tensor with " + std::to_string(data_.size()) + " elements");
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("logsumexp: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

namespace kernels {

namespace {

enum class Broadcast { same, scalar, leading };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (b.rank() == 0) return Broadcast::scalar;
  if (a.rank() == b.rank() + 1 && std::equal(b.shape().begin(), b.shape().end(), a.shape().begin() + 1)) {
    return Broadcast::leading;
  }
  throw std::invalid_argument(std::string(op) + ": incompatible shapes");
}

template <typename F>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F op) {
  Tensor out(a.shape());
  switch (broadcast_kind(a, b, name)) {
    case Broadcast::same:
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
      break;
    case Broadcast::scalar: {
      const double s = b[0];
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], s);
      break;
    }
    case Broadcast::leading: {
      const std::size_t inner = b.size();
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i % inner]);
      break;
    }
  }
  return out;
}

template <typename F>
Tensor unary(const Tensor& a, F op) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i]);
  return out;
}

void require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw std::invalid_argument(std::string(op) + ": expected a matrix");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) {
    throw std::invalid_argument("matmul: inner dimensions " + std::to_string(k) + " and " +
                                std::to_string(b.rows()) + " differ");
  }
  Tensor out(Shape{n, m});
  // i-k-j order: each output row depends only on the matching input row.
  for (std::size_t i = 0; i < n; ++i) {
    double* o = &out[i * m];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* br = b.data().data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Tensor softmax_rows(const Tensor& a) {
  require_matrix(a, "softmax_rows");
  Tensor out(a.shape());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto in = a.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double acc = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      acc += o[j];
    }
    for (double& v : o) v /= acc;
  }
  return out;
}

Tensor logsumexp_rows(const Tensor& a) {
  require_matrix(a, "logsumexp_rows");
  Tensor out(Shape{a.rows()});
  for (std::size_t r = 0; r < a.rows(); ++r) out[r] = logsumexp(a.row(r));
  return out;
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x * s; });
}

}  // namespace kernels
}  // namespace exitnet
