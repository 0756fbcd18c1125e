#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fibinet::numeric {

/// Dense real vector.
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t len, double fill = 0.0) : data_(len, fill) {}
  DenseVector(std::initializer_list<double> values) : data_(values) {}
  explicit DenseVector(std::vector<double> values) : data_(std::move(values)) {}
  explicit DenseVector(std::span<const double> values)
      : data_(values.begin(), values.end()) {}

  std::size_t len() const noexcept { return data_.size(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool operator==(const DenseVector&) const = default;

 private:
  std::vector<double> data_;
};

/// Dense row-major matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void fill(double value);
  std::string shape_string() const;

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// SplitMix64 generator. The state transition is fixed so that a seed
/// reproduces the same stream on every platform:
///   state += 0x9E3779B97F4A7C15
///   z = state; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB; return z ^ (z >> 31)
/// Doubles take the top 53 bits; normals use Box-Muller without caching.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer on [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p);

  /// Fisher-Yates over an index-addressable range.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

/// Derives an independent seed for a named consumer from a top-level seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view consumer);

// Value-returning kernels. All throw ShapeError on dimension mismatch.
DenseVector matvec(const DenseMatrix& m, const DenseVector& v);
DenseVector hadamard(const DenseVector& a, const DenseVector& b);
double inner(const DenseVector& a, const DenseVector& b);
DenseVector relu(const DenseVector& v);

// Span kernels used on the hot path; callers guarantee shapes.
void matvec_into(const DenseMatrix& m, std::span<const double> x, std::span<double> out);
/// out += mᵀ·x
void matvec_transposed_add(const DenseMatrix& m, std::span<const double> x,
                           std::span<double> out);
/// m += scale · a·bᵀ
void outer_add(DenseMatrix& m, std::span<const double> a, std::span<const double> b,
               double scale = 1.0);
double inner(std::span<const double> a, std::span<const double> b);

inline constexpr double kProbabilityEpsilon = 1e-15;

/// Logistic function clamped to [1e-15, 1 - 1e-15].
double sigmoid(double x);

/// Central-difference gradient of `f` with respect to every element of
/// `params`. `f` must read `params` by reference; each element is perturbed
/// in place and restored, so the matrix is unchanged on return.
DenseMatrix finite_diff_grad(const std::function<double()>& f, DenseMatrix& params, double h);

/// Same oracle for a function taking the parameter array by value.
DenseMatrix finite_diff_grad(const std::function<double(const DenseMatrix&)>& f,
                             const DenseMatrix& params, double h);

DenseMatrix xavier_uniform(Rng& rng, std::size_t rows, std::size_t cols);
DenseMatrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double bound);

bool all_finite(std::span<const double> values);

}  // namespace fibinet::numeric
