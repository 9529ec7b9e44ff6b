#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lgcav/concepts.hpp"
#include "lgcav/embedstore.hpp"
#include "lgcav/error.hpp"
#include "lgcav/numerics.hpp"
#include "lgcav/rng.hpp"

namespace lgcav {

inline constexpr std::size_t kDefaultPairCap = 1'000'000;
inline constexpr double kRejitterNorm = 1e-12;

// Cosine of the text embedding with each probe's VL image feature.
inline Vector vl_activations(std::span<const double> text, const EmbeddingMatrix& vl,
                             const ProbeSet& probe) {
  Vector out;
  out.reserve(probe.size());
  for (std::size_t r : probe.vl_rows) out.push_back(cosine(text, vl.row(r)));
  return out;
}

// Gaussian fit to the pairwise cosines between probe target features. Beyond
// `cap` unordered pairs, `cap` pairs are drawn uniformly (with replacement).
inline GaussianEstimate target_activation_population(const EmbeddingMatrix& target,
                                                     const ProbeSet& probe,
                                                     std::size_t cap = kDefaultPairCap,
                                                     std::uint64_t seed = 0) {
  const std::size_t n = probe.size();
  require(n >= 2, Errc::invalid_argument, "pairwise population needs |R| >= 2");
  require(cap >= 1, Errc::invalid_argument, "pair cap must be >= 1");
  const Matrix unit = normalize_rows(target.matrix().gather(probe.target_rows));
  const std::size_t total = n * (n - 1) / 2;
  std::vector<double> cos;
  if (total <= cap) {
    cos.reserve(total);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) cos.push_back(dot(unit.row(i), unit.row(j)));
  } else {
    cos.reserve(cap);
    Rng rng(seed, 0x9a125u);
    for (std::size_t s = 0; s < cap; ++s) {
      const auto i = static_cast<std::size_t>(rng.below(n));
      auto j = static_cast<std::size_t>(rng.below(n - 1));
      if (j >= i) ++j;
      cos.push_back(dot(unit.row(i), unit.row(j)));
    }
  }
  if (cos.size() == 1) return {{cos[0], 0.0}, 1, true};
  return estimate_gaussian(cos);
}

// a -> (a - mu_vl) / sigma_vl * sigma_tgt + mu_tgt
inline Vector ga_transform(std::span<const double> acts, const GaussianParams& vl,
                           const GaussianParams& tgt) {
  require(vl.sigma > 0.0, Errc::degenerate,
          "ga_transform: VL activation spread is zero, cannot standardize");
  Vector out(acts.size());
  for (std::size_t i = 0; i < acts.size(); ++i)
    out[i] = (acts[i] - vl.mu) / vl.sigma * tgt.sigma + tgt.mu;
  return out;
}

// Per-probe weights: mean-one softmax of the negated std of cosines between
// the probe and each positive image (target space).
inline Vector dsr_weights(const EmbeddingMatrix& target, const ProbeSet& probe,
                          const std::vector<std::string>& positives) {
  require(positives.size() >= 2, Errc::invalid_argument,
          "dsr_weights needs at least 2 positives");
  const Matrix pos = normalize_rows(target.gather(positives));
  Vector neg_std(probe.size());
  Vector c(pos.rows());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const auto f = target.row(probe.target_rows[i]);
    const double nf = norm(f);
    if (nf <= 0.0) fail(Errc::degenerate, "zero-norm probe feature '" + probe.item_ids[i] + "'");
    double mean = 0.0;
    for (std::size_t p = 0; p < pos.rows(); ++p) {
      c[p] = dot(f, pos.row(p)) / nf;
      mean += c[p];
    }
    mean /= static_cast<double>(c.size());
    double ss = 0.0;
    for (double x : c) ss += (x - mean) * (x - mean);
    neg_std[i] = -std::sqrt(ss / static_cast<double>(c.size()));
  }
  return mean_one_softmax(neg_std);
}

// Probe features, transformed targets and weights for the language-guided loss.
struct LgTrainPlan {
  Matrix probe_features;  // target-space rows, probe order
  Vector targets;
  Vector weights;  // empty = all ones
  double lambda = 1.0;

  void validate() const {
    require(probe_features.rows() >= 1, Errc::invalid_argument, "empty probe set");
    require(targets.size() == probe_features.rows(), Errc::shape_mismatch,
            "targets length differs from |R|");
    require(weights.empty() || weights.size() == targets.size(), Errc::shape_mismatch,
            "weights length differs from |R|");
    double sum = 0.0;
    for (double w : weights) {
      require(w > 0.0 && std::isfinite(w), Errc::invalid_argument, "probe weights must be positive");
      sum += w;
    }
    if (!weights.empty())
      require(std::abs(sum / static_cast<double>(weights.size()) - 1.0) <= 1e-9,
              Errc::invalid_argument, "probe weights must have mean 1");
    require(lambda >= 0.0 && std::isfinite(lambda), Errc::config, "lambda must be >= 0");
  }
};

struct LgPlanInfo {
  GaussianParams vl;  // raw VL activation moments
  bool aligned = false;
  bool reweighted = false;
};

// Targets from the VL activations (aligned to `target_stats` when given) and
// DSR weights when `positives` is given.
inline std::pair<LgTrainPlan, LgPlanInfo> build_lg_plan(
    const EmbeddingMatrix& target, const EmbeddingMatrix& vl, std::span<const double> text,
    const ProbeSet& probe, const std::optional<GaussianParams>& target_stats,
    const std::vector<std::string>* positives, double lambda) {
  LgTrainPlan plan;
  LgPlanInfo info;
  plan.probe_features = target.matrix().gather(probe.target_rows);
  plan.targets = vl_activations(text, vl, probe);
  info.vl = estimate_gaussian(plan.targets).params;
  if (target_stats) {
    plan.targets = ga_transform(plan.targets, info.vl, *target_stats);
    info.aligned = true;
  }
  if (positives) {
    plan.weights = dsr_weights(target, probe, *positives);
    info.reweighted = true;
  }
  plan.lambda = lambda;
  return {std::move(plan), info};
}

// Weighted squared error between cos(v, f_i) and t_i, averaged over the
// selected probes. Rows are normalized once up front.
class LgObjective {
 public:
  LgObjective(const Matrix& features, Vector targets, Vector weights)
      : unit_(normalize_rows(features)), targets_(std::move(targets)), weights_(std::move(weights)) {
    require(targets_.size() == unit_.rows(), Errc::shape_mismatch, "targets length differs from rows");
    if (weights_.empty()) weights_.assign(targets_.size(), 1.0);
    require(weights_.size() == unit_.rows(), Errc::shape_mismatch, "weights length differs from rows");
  }

  std::size_t size() const { return unit_.rows(); }
  std::size_t dim() const { return unit_.cols(); }

  // Adds scale * gradient into grad[0..D). Returns the (unscaled) mean loss.
  template <class Indices>
  double accumulate(std::span<const double> v, const Indices& rows, std::span<double> grad,
                    double scale = 1.0) const {
    const double nv = norm(v);
    require(nv > 0.0, Errc::degenerate, "LG loss undefined for zero-norm v");
    const std::size_t count = std::size(rows);
    if (count == 0) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(count);
    double loss = 0.0;
    for (std::size_t i : rows) {
      const auto f = unit_.row(i);
      const double c = dot(v, f) / nv;
      const double err = c - targets_[i];
      loss += weights_[i] * err * err;
      const double g = scale * 2.0 * weights_[i] * err * inv_n / nv;
      for (std::size_t d = 0; d < f.size(); ++d) grad[d] += g * (f[d] - c * v[d] / nv);
    }
    return loss * inv_n;
  }

  std::pair<double, Vector> loss_and_grad(std::span<const double> v) const {
    Vector grad(v.size(), 0.0);
    std::vector<std::size_t> all(size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const double loss = accumulate(v, all, grad);
    return {loss, std::move(grad)};
  }

 private:
  Matrix unit_;
  Vector targets_;
  Vector weights_;
};

inline std::pair<double, Vector> lg_loss_and_grad(std::span<const double> v, const Matrix& features,
                                                  const Vector& targets, const Vector& weights = {}) {
  return LgObjective(features, targets, weights).loss_and_grad(v);
}

namespace detail {

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

// Mean logistic loss on logits v.f + b; positives are rows [0, n_pos).
class ClsObjective {
 public:
  ClsObjective(const Matrix& positives, const Matrix& negatives) {
    require(positives.rows() >= 1 && negatives.rows() >= 1, Errc::invalid_argument,
            "classification loss needs at least one positive and one negative");
    require(positives.cols() == negatives.cols(), Errc::shape_mismatch,
            "positive/negative feature dimensions differ");
    n_pos_ = positives.rows();
    Vector data = positives.data();
    data.insert(data.end(), negatives.data().begin(), negatives.data().end());
    rows_ = Matrix(positives.rows() + negatives.rows(), positives.cols(), std::move(data));
  }

  std::size_t size() const { return rows_.rows(); }
  std::size_t dim() const { return rows_.cols(); }

  // Adds scale * gradient into grad[0..D) and grad[D] (bias).
  template <class Indices>
  double accumulate(std::span<const double> v, double b, const Indices& rows, std::span<double> grad,
                    double scale = 1.0) const {
    const std::size_t count = std::size(rows);
    if (count == 0) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(count);
    const std::size_t dim = rows_.cols();
    double loss = 0.0;
    for (std::size_t i : rows) {
      const auto f = rows_.row(i);
      const double y = i < n_pos_ ? 1.0 : 0.0;
      const double z = dot(v, f) + b;
      loss += detail::softplus(z) - y * z;
      const double g = scale * (detail::sigmoid(z) - y) * inv_n;
      for (std::size_t d = 0; d < dim; ++d) grad[d] += g * f[d];
      grad[dim] += g;
    }
    return loss * inv_n;
  }

 private:
  Matrix rows_;
  std::size_t n_pos_ = 0;
};

struct ClsLossGrad {
  double loss = 0.0;
  Vector grad_v;
  double grad_b = 0.0;
};

inline ClsLossGrad cls_loss_and_grad(std::span<const double> v, double b, const Matrix& positives,
                                     const Matrix& negatives) {
  const ClsObjective obj(positives, negatives);
  Vector grad(v.size() + 1, 0.0);
  std::vector<std::size_t> all(obj.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double loss = obj.accumulate(v, b, all, grad);
  const double gb = grad.back();
  grad.pop_back();
  return {loss, std::move(grad), gb};
}

// Inputs for one CAV. Classification data is needed by original/combined,
// the LG plan by lg/combined.
struct CavTrainData {
  std::string concept_name;
  Matrix positives;
  Matrix negatives;
  std::optional<LgTrainPlan> lg;
};

inline Vector random_init(std::size_t dim, const Rng& root, std::uint64_t stream) {
  Rng rng = root.split(stream);
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  Vector v(dim);
  for (double& x : v) x = rng.normal(0.0, sd);
  return v;
}

inline Cav train_cav(CavMode mode, const CavTrainData& data, const SgdConfig& cfg) {
  cfg.validate();
  const bool use_cls = mode != CavMode::lg;
  bool use_lg = mode != CavMode::original;
  if (use_cls)
    require(data.positives.rows() >= 1 && data.negatives.rows() >= 1, Errc::invalid_argument,
            "mode " + to_string(mode) + " needs positives and negatives for '" + data.concept_name + "'");
  if (use_lg) {
    require(data.lg.has_value(), Errc::invalid_argument,
            "mode " + to_string(mode) + " needs probe targets for '" + data.concept_name + "'");
    data.lg->validate();
  }
  const double lambda = mode == CavMode::lg ? 1.0 : (data.lg ? data.lg->lambda : 1.0);
  // A zero coefficient removes the LG term entirely, so combined reduces to original.
  if (mode == CavMode::combined && lambda == 0.0) use_lg = false;

  std::optional<LgObjective> lg;
  std::optional<ClsObjective> cls;
  std::size_t dim = 0;
  if (use_lg) {
    lg.emplace(data.lg->probe_features, data.lg->targets, data.lg->weights);
    dim = lg->dim();
  }
  if (use_cls) {
    cls.emplace(data.positives, data.negatives);
    require(!lg || cls->dim() == dim, Errc::shape_mismatch, "probe and classifier features differ in dimension");
    dim = cls->dim();
  }
  require(dim >= 1, Errc::invalid_argument, "zero-dimensional features");

  const std::size_t n_lg = lg ? lg->size() : 0;
  const std::size_t n_cls = cls ? cls->size() : 0;
  const Rng root(cfg.seed, 0xcaf0u);
  Vector init = random_init(dim, root, 0);
  if (use_cls) init.push_back(0.0);

  Cav cav;
  cav.concept_name = data.concept_name;
  cav.mode = mode;
  cav.lambda = lambda;
  cav.seed = cfg.seed;

  std::vector<std::size_t> lg_idx;
  std::vector<std::size_t> cls_idx;
  auto objective = [&](std::span<const double> x, std::span<const std::size_t> batch,
                       std::span<double> grad) {
    lg_idx.clear();
    cls_idx.clear();
    for (std::size_t s : batch) {
      if (s < n_lg) lg_idx.push_back(s);
      else cls_idx.push_back(s - n_lg);
    }
    const auto v = x.first(dim);
    double loss = 0.0;
    if (cls) loss += cls->accumulate(v, x[dim], cls_idx, grad);
    if (lg) loss += lambda * lg->accumulate(v, lg_idx, grad, lambda);
    return loss;
  };
  std::size_t jitters = 0;
  auto guard = [&](Vector& x, std::size_t epoch) {
    if (!lg) return;
    if (norm(std::span<const double>(x).first(dim)) >= kRejitterNorm) return;
    const Vector fresh = random_init(dim, root, 1 + jitters++);
    std::copy(fresh.begin(), fresh.end(), x.begin());
    cav.rejitter_epochs.push_back(epoch);
  };

  SgdResult res = sgd_minimize(objective, std::move(init), n_lg + n_cls, cfg, guard);
  cav.trace = std::move(res.trace);
  if (use_cls) cav.bias = res.x[dim];
  res.x.resize(dim);
  cav.vector = std::move(res.x);
  for (double x : cav.vector) require(std::isfinite(x), Errc::numeric, "non-finite CAV");
  require(norm(cav.vector) > 0.0, Errc::numeric, "trained CAV has zero norm");
  return cav;
}

}  // namespace lgcav
