#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lgcav/error.hpp"
#include "lgcav/rng.hpp"

namespace lgcav {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, Errc::shape_mismatch,
            "matrix data length " + std::to_string(data_.size()) +
                " != rows*cols " + std::to_string(rows_ * cols_));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }

  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  // Rows selected by index, in the given order.
  Matrix gather(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto src = row(indices[k]);
      std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
  }

  static Matrix from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    Matrix out(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      require(rows[i].size() == out.cols(), Errc::shape_mismatch,
              "ragged rows in Matrix::from_rows");
      std::copy(rows[i].begin(), rows[i].end(), out.row(i).begin());
    }
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) fail(Errc::shape_mismatch,
          "dot: dimension mismatch " + std::to_string(u.size()) + " vs " +
              std::to_string(v.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm(std::span<const double> u) { return std::sqrt(dot(u, u)); }

// Cosine similarity. Zero-norm arguments are an error, never a silent 0.
inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) fail(Errc::shape_mismatch,
          "cosine: dimension mismatch " + std::to_string(u.size()) + " vs " +
              std::to_string(v.size()));
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu <= 0.0 || nv <= 0.0) fail(Errc::degenerate,
          "cosine: zero-norm vector");
  return dot(u, v) / (nu * nv);
}

// Unit-normalized copy of each row; throws on zero-norm rows.
inline Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double n = norm(m.row(i));
    if (n <= 0.0) fail(Errc::degenerate,
            "zero-norm feature row " + std::to_string(i));
    for (double& x : out.row(i)) x /= n;
  }
  return out;
}

struct GaussianParams {
  double mu = 0.0;
  double sigma = 0.0;

  friend bool operator==(const GaussianParams&, const GaussianParams&) = default;
};

struct GaussianEstimate {
  GaussianParams params;
  std::size_t count = 0;
  bool degenerate = false;  // sigma == 0
};

// Mean and population (1/n) standard deviation.
inline GaussianEstimate estimate_gaussian(std::span<const double> samples) {
  require(samples.size() >= 2, Errc::invalid_argument,
          "estimate_gaussian needs at least 2 samples, got " +
              std::to_string(samples.size()));
  const auto n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double x : samples) {
    require(std::isfinite(x), Errc::non_finite,
            "estimate_gaussian: non-finite sample");
    sum += x;
  }
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi) return {{*lo, 0.0}, samples.size(), true};
  const double mu = sum / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mu) * (x - mu);
  const double sigma = std::sqrt(ss / n);
  return {{mu, sigma}, samples.size(), sigma == 0.0};
}

// n * softmax(scores): positive, arithmetic mean 1.
inline Vector mean_one_softmax(std::span<const double> scores) {
  require(!scores.empty(), Errc::invalid_argument,
          "mean_one_softmax: empty input");
  double hi = scores.front();
  for (double s : scores) {
    require(std::isfinite(s), Errc::non_finite,
            "mean_one_softmax: non-finite score");
    hi = std::max(hi, s);
  }
  Vector out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - hi);
    total += out[i];
  }
  const double scale = static_cast<double>(scores.size()) / total;
  for (double& w : out) w *= scale;
  return out;
}

struct SgdConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch = 0;  // 0 = full batch
  std::uint64_t seed = 0;

  void validate() const {
    require(learning_rate > 0.0 && std::isfinite(learning_rate),
            Errc::config, "learning_rate must be > 0");
    require(epochs >= 1, Errc::config, "epochs must be >= 1");
  }
};

struct SgdResult {
  Vector x;
  Vector trace;  // mean batch loss per epoch
};

struct NoStepHook {
  void operator()(Vector&, std::size_t) const {}
};

// Plain (momentum-free) SGD.
//
// `objective(x, batch, grad)` returns the mean loss over the sample indices in
// `batch` and accumulates its gradient into `grad`, which arrives zeroed.
// With cfg.batch == 0 (or >= n_samples) every epoch is a single full-batch
// step over indices 0..n-1 in order; otherwise indices are reshuffled each
// epoch from the seeded stream. `after_step(x, epoch)` runs after every
// update. Non-finite loss or gradient aborts with the epoch index.
template <class Objective, class StepHook = NoStepHook>
SgdResult sgd_minimize(Objective&& objective, Vector init,
                       std::size_t n_samples, const SgdConfig& cfg,
                       StepHook&& after_step = {}) {
  cfg.validate();
  require(n_samples >= 1, Errc::invalid_argument, "sgd_minimize: no samples");
  SgdResult result{std::move(init), {}};
  result.trace.reserve(cfg.epochs);
  Vector& x = result.x;
  Vector grad(x.size());
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool full = cfg.batch == 0 || cfg.batch >= n_samples;
  const Rng shuffle_root(cfg.seed, 0x5eed5u);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (!full) {
      Rng rng = shuffle_root.split(epoch);
      rng.shuffle(order);
    }
    const std::size_t step = full ? n_samples : cfg.batch;
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n_samples; start += step) {
      const std::size_t stop = std::min(n_samples, start + step);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = objective(
          std::span<const double>(x),
          std::span<const std::size_t>(order.data() + start, stop - start),
          std::span<double>(grad));
      bool finite = std::isfinite(loss);
      for (double g : grad) finite = finite && std::isfinite(g);
      require(finite, Errc::numeric,
              "sgd_minimize: non-finite loss or gradient at epoch " +
                  std::to_string(epoch));
      for (std::size_t i = 0; i < x.size(); ++i)
        x[i] -= cfg.learning_rate * grad[i];
      after_step(x, epoch);
      loss_sum += loss;
      ++batches;
    }
    result.trace.push_back(loss_sum / static_cast<double>(batches));
  }
  return result;
}

// Full-batch convenience overload: `objective(x, grad) -> loss`.
template <class Objective, class StepHook = NoStepHook>
  requires std::is_invocable_r_v<double, Objective, std::span<const double>,
                                 std::span<double>>
SgdResult sgd_minimize(Objective&& objective, Vector init,
                       const SgdConfig& cfg, StepHook&& after_step = {}) {
  SgdConfig full = cfg;
  full.batch = 0;
  return sgd_minimize(
      [&](std::span<const double> x, std::span<const std::size_t>,
          std::span<double> grad) { return objective(x, grad); },
      std::move(init), 1, full, std::forward<StepHook>(after_step));
}

}  // namespace lgcav
