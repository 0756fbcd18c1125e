#include "fibinet/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fibinet/errors.hpp"

namespace fibinet::numeric {

namespace {

std::string vec_shape(std::size_t n) { return "[" + std::to_string(n) + "]"; }

}  // namespace

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw ShapeError("ragged initializer: expected " + std::to_string(cols_) +
                       " columns, got " + std::to_string(r.size()));
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void DenseMatrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string DenseMatrix::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection keeps the draw unbiased for any n.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

std::uint64_t derive_seed(std::uint64_t seed, std::string_view consumer) {
  // FNV-1a over the consumer name, mixed into the seed through one SplitMix step.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : consumer) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  Rng mixer(seed ^ h);
  return mixer.next_u64();
}

DenseVector matvec(const DenseMatrix& m, const DenseVector& v) {
  if (m.cols() != v.len()) {
    throw ShapeError("matvec: matrix " + m.shape_string() + " vs vector " + vec_shape(v.len()));
  }
  DenseVector out(m.rows());
  matvec_into(m, v.span(), out.span());
  return out;
}

DenseVector hadamard(const DenseVector& a, const DenseVector& b) {
  if (a.len() != b.len()) {
    throw ShapeError("hadamard: " + vec_shape(a.len()) + " vs " + vec_shape(b.len()));
  }
  DenseVector out(a.len());
  for (std::size_t t = 0; t < a.len(); ++t) out[t] = a[t] * b[t];
  return out;
}

double inner(const DenseVector& a, const DenseVector& b) {
  if (a.len() != b.len()) {
    throw ShapeError("inner: " + vec_shape(a.len()) + " vs " + vec_shape(b.len()));
  }
  return inner(a.span(), b.span());
}

DenseVector relu(const DenseVector& v) {
  DenseVector out(v.len());
  for (std::size_t t = 0; t < v.len(); ++t) out[t] = std::max(0.0, v[t]);
  return out;
}

void matvec_into(const DenseMatrix& m, std::span<const double> x, std::span<double> out) {
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = inner(m.row(r), x);
}

void matvec_transposed_add(const DenseMatrix& m, std::span<const double> x,
                           std::span<double> out) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c] * xr;
  }
}

void outer_add(DenseMatrix& m, std::span<const double> a, std::span<const double> b,
               double scale) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ar = a[r] * scale;
    if (ar == 0.0) continue;
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += ar * b[c];
  }
}

double inner(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) acc += a[t] * b[t];
  return acc;
}

double sigmoid(double x) {
  const double y = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return std::clamp(y, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

DenseMatrix finite_diff_grad(const std::function<double()>& f, DenseMatrix& params, double h) {
  if (!(h > 0.0)) throw NumericError("finite_diff_grad: step must be positive");
  DenseMatrix grad(params.rows(), params.cols());
  auto theta = params.data();
  auto g = grad.data();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double plus = f();
    theta[i] = saved - h;
    const double minus = f();
    theta[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("finite_diff_grad: non-finite evaluation at element " +
                         std::to_string(i));
    }
    g[i] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

DenseMatrix finite_diff_grad(const std::function<double(const DenseMatrix&)>& f,
                             const DenseMatrix& params, double h) {
  DenseMatrix work = params;
  return finite_diff_grad([&] { return f(work); }, work, h);
}

DenseMatrix xavier_uniform(Rng& rng, std::size_t rows, std::size_t cols) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return uniform_matrix(rng, rows, cols, bound);
}

DenseMatrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double bound) {
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = rng.uniform(-bound, bound);
  return m;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace fibinet::numeric
