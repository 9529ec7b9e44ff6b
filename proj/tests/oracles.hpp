#pragma once

// Naive reference implementations used as test oracles. They work on plain
// nested vectors, accumulate in long double and share no code with the
// library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Rows = std::vector<Vec>;

inline long double dot(const Vec& a, const Vec& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return s;
}

inline double cosine(const Vec& a, const Vec& b) {
  return static_cast<double>(dot(a, b) / std::sqrt(dot(a, a) * dot(b, b)));
}

inline double mean(const Vec& x) {
  long double s = 0.0L;
  for (double v : x) s += v;
  return static_cast<double>(s / x.size());
}

// Population standard deviation via E[(x - mean)^2].
inline double pop_std(const Vec& x) {
  const long double m = mean(x);
  long double s = 0.0L;
  for (double v : x) s += (v - m) * (v - m);
  return static_cast<double>(std::sqrt(s / x.size()));
}

// n * softmax(s), written as n / sum_j exp(s_j - s_i).
inline Vec mean_one_softmax(const Vec& s) {
  Vec out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    long double denom = 0.0L;
    for (double sj : s) denom += std::exp(static_cast<long double>(sj) - s[i]);
    out[i] = static_cast<double>(s.size() / denom);
  }
  return out;
}

inline Vec vl_activations(const Vec& text, const Rows& probe_vl) {
  Vec out;
  for (const auto& f : probe_vl) out.push_back(cosine(text, f));
  return out;
}

// For every probe, the std over positives of cos(probe, positive); weights are
// the mean-one softmax of the negated stds.
inline Vec dsr_weights(const Rows& probe_target, const Rows& positives) {
  Vec s;
  for (const auto& f : probe_target) {
    Vec c;
    for (const auto& p : positives) c.push_back(cosine(f, p));
    s.push_back(-pop_std(c));
  }
  return mean_one_softmax(s);
}

inline Vec asr_weights(const Vec& v, const Rows& class_feats) {
  Vec a;
  for (const auto& f : class_feats) a.push_back(cosine(v, f));
  return mean_one_softmax(a);
}

// Fraction of (cav, weight row) pairs with positive dot product.
inline double tcav_score(const Rows& cavs_per_pair, const Rows& weight_rows_per_pair) {
  std::size_t acute = 0;
  for (std::size_t i = 0; i < cavs_per_pair.size(); ++i)
    if (dot(cavs_per_pair[i], weight_rows_per_pair[i]) > 0.0L) ++acute;
  return static_cast<double>(acute) / cavs_per_pair.size();
}

// Full sort of all rows by cosine; truth given as row indices.
inline double recall_at_k(const Vec& v, const Rows& feats, const std::vector<std::size_t>& truth, std::size_t k) {
  std::vector<std::size_t> order(feats.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> c(feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i) c[i] = cosine(v, feats[i]);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c[a] > c[b]; });
  std::size_t hit = 0;
  for (std::size_t t : truth)
    for (std::size_t r = 0; r < k; ++r)
      if (order[r] == t) ++hit;
  return static_cast<double>(hit) / truth.size();
}

inline double ga_transform(double a, double mu_vl, double sd_vl, double mu_t, double sd_t) {
  return mu_t + sd_t * ((a - mu_vl) / sd_vl);
}

// (1/n) sum w_i (cos(v, f_i) - t_i)^2
inline double lg_loss(const Vec& v, const Rows& feats, const Vec& targets, const Vec& weights) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const long double e = cosine(v, feats[i]) - targets[i];
    s += (weights.empty() ? 1.0L : weights[i]) * e * e;
  }
  return static_cast<double>(s / feats.size());
}

// Mean binary cross-entropy of sigmoid(v.f + b).
inline double cls_loss(const Vec& v, double b, const Rows& pos, const Rows& neg) {
  long double s = 0.0L;
  for (const auto& f : pos) s += std::log1p(std::exp(-(dot(v, f) + b)));
  for (const auto& f : neg) s += std::log1p(std::exp(dot(v, f) + b));
  return static_cast<double>(s / (pos.size() + neg.size()));
}

inline double concept_accuracy(const Vec& v, double b, const Rows& pos, const Rows& neg) {
  std::size_t ok = 0;
  for (const auto& f : pos) ok += dot(v, f) + b > 0.0L;
  for (const auto& f : neg) ok += dot(v, f) + b <= 0.0L;
  return static_cast<double>(ok) / (pos.size() + neg.size());
}

// Central-difference gradient of f at x.
template <class F>
Vec finite_difference(F&& f, Vec x, double h = 1e-6) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double up = f(x);
    x[i] = xi - h;
    const double down = f(x);
    x[i] = xi;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_rel_error(const Vec& a, const Vec& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

// Test-side random data from the standard library engine.
struct Gen {
  std::mt19937_64 eng;
  explicit Gen(std::uint64_t seed) : eng(seed) {}

  double normal(double mu = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mu, sd)(eng); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  std::size_t integer(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(eng);
  }
  Vec vec(std::size_t d, double sd = 1.0) {
    Vec v(d);
    for (double& x : v) x = normal(0.0, sd);
    return v;
  }
  Rows rows(std::size_t n, std::size_t d, double sd = 1.0) {
    Rows r;
    for (std::size_t i = 0; i < n; ++i) r.push_back(vec(d, sd));
    return r;
  }
};

}  // namespace oracle
