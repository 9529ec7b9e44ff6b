#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lgcav/embedstore.hpp"
#include "lgcav/error.hpp"
#include "lgcav/numerics.hpp"

namespace lgcav {

// Mean-one softmax of the CAV's cosine activation on each image of a class.
inline Vector asr_weights(std::span<const double> v, const EmbeddingMatrix& target,
                          const std::vector<std::string>& class_items) {
  require(!class_items.empty(), Errc::invalid_argument, "asr_weights: empty class");
  Vector act;
  act.reserve(class_items.size());
  for (const auto& id : class_items) act.push_back(cosine(v, target.row(id)));
  return mean_one_softmax(act);
}

// Per-class image weights for head fine-tuning. Items of classes without an
// entry keep weight 1.
struct AsrPlan {
  struct ClassWeights {
    std::string concept_name;
    std::vector<std::string> items;
    Vector weights;
  };
  std::map<std::size_t, ClassWeights> classes;
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  std::size_t batch = 0;
  std::uint64_t seed = 0;

  void validate() const {
    require(learning_rate > 0.0 && std::isfinite(learning_rate), Errc::config,
            "fine-tune learning_rate must be > 0");
    for (const auto& [k, cw] : classes) {
      require(cw.items.size() == cw.weights.size(), Errc::shape_mismatch,
              "class " + std::to_string(k) + ": weights/items length mismatch");
      double s = 0.0;
      for (double w : cw.weights) {
        require(w > 0.0, Errc::invalid_argument, "ASR weights must be positive");
        s += w;
      }
      require(std::abs(s / static_cast<double>(cw.weights.size()) - 1.0) <= 1e-9,
              Errc::invalid_argument, "ASR weights of class " + std::to_string(k) + " must have mean 1");
    }
  }

  // Weight per training item, aligned with `ids`.
  Vector item_weights(const std::vector<std::string>& ids) const {
    std::unordered_map<std::string, double> w;
    for (const auto& [k, cw] : classes)
      for (std::size_t i = 0; i < cw.items.size(); ++i) w[cw.items[i]] = cw.weights[i];
    Vector out(ids.size(), 1.0);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (const auto it = w.find(ids[i]); it != w.end()) out[i] = it->second;
    return out;
  }
};

struct HeadTrainResult {
  LinearHead head;
  Vector trace;
};

namespace detail {

inline Vector head_params(const LinearHead& h) {
  Vector x = h.weights.data();
  x.insert(x.end(), h.biases.begin(), h.biases.end());
  return x;
}

inline void unpack_head(const Vector& x, LinearHead& h) {
  const std::size_t nw = h.weights.rows() * h.weights.cols();
  std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(nw), h.weights.data().begin());
  std::copy(x.begin() + static_cast<std::ptrdiff_t>(nw), x.end(), h.biases.begin());
}

// Multinomial cross-entropy over the batch. `weights` == nullptr is the
// unweighted path.
inline double head_objective(std::span<const double> x, std::span<const std::size_t> batch,
                             std::span<double> grad, const Matrix& feats,
                             const std::vector<std::size_t>& labels, std::size_t K,
                             const Vector* weights) {
  const std::size_t D = feats.cols();
  const auto W = x.first(K * D);
  const auto b = x.subspan(K * D, K);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Vector z(K);
  double loss = 0.0;
  for (std::size_t i : batch) {
    const auto f = feats.row(i);
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      z[k] = dot(W.subspan(k * D, D), f) + b[k];
      hi = std::max(hi, z[k]);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      z[k] = std::exp(z[k] - hi);
      total += z[k];
    }
    const std::size_t y = labels[i];
    const double li = -std::log(z[y] / total);
    if (weights) loss += (*weights)[i] * li;
    else loss += li;
    for (std::size_t k = 0; k < K; ++k) {
      double g = z[k] / total - (k == y ? 1.0 : 0.0);
      if (weights) g *= (*weights)[i];
      g *= inv_n;
      for (std::size_t d = 0; d < D; ++d) grad[k * D + d] += g * f[d];
      grad[K * D + k] += g;
    }
  }
  return loss * inv_n;
}

inline void check_head_data(const LinearHead& head, const Matrix& feats,
                            const std::vector<std::size_t>& labels) {
  require(feats.rows() == labels.size(), Errc::shape_mismatch, "features/labels length mismatch");
  require(feats.rows() >= 1, Errc::invalid_argument, "no training items");
  require(feats.cols() == head.weights.cols(), Errc::shape_mismatch, "feature dim differs from head");
  for (std::size_t y : labels)
    require(y < head.num_classes(), Errc::invalid_argument, "label out of range");
}

inline HeadTrainResult run_head_sgd(const LinearHead& head, const Matrix& feats,
                                    const std::vector<std::size_t>& labels, const Vector* weights,
                                    std::size_t epochs, double lr, std::size_t batch,
                                    std::uint64_t seed) {
  check_head_data(head, feats, labels);
  if (epochs == 0) return {head, {}};
  const SgdConfig cfg{lr, epochs, batch, seed};
  const std::size_t K = head.num_classes();
  auto obj = [&](std::span<const double> x, std::span<const std::size_t> idx, std::span<double> g) {
    return head_objective(x, idx, g, feats, labels, K, weights);
  };
  SgdResult r = sgd_minimize(obj, head_params(head), feats.rows(), cfg);
  HeadTrainResult out{head, std::move(r.trace)};
  unpack_head(r.x, out.head);
  return out;
}

}  // namespace detail

// Plain cross-entropy training of the head from its current parameters.
inline HeadTrainResult train_head(const LinearHead& head, const Matrix& feats,
                                  const std::vector<std::size_t>& labels, std::size_t epochs,
                                  double lr, std::size_t batch = 0, std::uint64_t seed = 0) {
  return detail::run_head_sgd(head, feats, labels, nullptr, epochs, lr, batch, seed);
}

// Weighted cross-entropy fine-tuning; `item_weights` aligned with rows.
inline HeadTrainResult fine_tune_head(const LinearHead& head, const Matrix& feats,
                                      const std::vector<std::size_t>& labels,
                                      const Vector& item_weights, std::size_t epochs, double lr,
                                      std::size_t batch = 0, std::uint64_t seed = 0) {
  require(item_weights.size() == feats.rows(), Errc::shape_mismatch, "one weight per training item required");
  return detail::run_head_sgd(head, feats, labels, &item_weights, epochs, lr, batch, seed);
}

inline HeadTrainResult fine_tune_head(const LinearHead& head, const Matrix& feats,
                                      const std::vector<std::size_t>& labels,
                                      const std::vector<std::string>& ids, const AsrPlan& plan) {
  plan.validate();
  require(ids.size() == feats.rows(), Errc::shape_mismatch, "ids/features length mismatch");
  return fine_tune_head(head, feats, labels, plan.item_weights(ids), plan.epochs, plan.learning_rate,
                        plan.batch, plan.seed);
}

// argmax of the logits, ties to the smaller class index.
inline std::size_t predict(const LinearHead& head, std::span<const double> f) {
  const Vector z = head.logits(f);
  std::size_t best = 0;
  for (std::size_t k = 1; k < z.size(); ++k)
    if (z[k] > z[best]) best = k;
  return best;
}

inline double head_accuracy(const LinearHead& head, const Matrix& feats,
                            const std::vector<std::size_t>& labels) {
  require(feats.rows() == labels.size() && feats.rows() > 0, Errc::invalid_argument,
          "head_accuracy: empty or mismatched data");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < feats.rows(); ++i) ok += predict(head, feats.row(i)) == labels[i];
  return static_cast<double>(ok) / static_cast<double>(feats.rows());
}

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

// [true][predicted] counts.
inline ConfusionMatrix confusion_matrix(const LinearHead& head, const Matrix& feats,
                                        const std::vector<std::size_t>& labels) {
  require(feats.rows() == labels.size(), Errc::shape_mismatch, "features/labels length mismatch");
  const std::size_t K = head.num_classes();
  ConfusionMatrix m(K, std::vector<std::size_t>(K, 0));
  for (std::size_t i = 0; i < feats.rows(); ++i) {
    require(labels[i] < K, Errc::invalid_argument, "label out of range");
    ++m[labels[i]][predict(head, feats.row(i))];
  }
  return m;
}

// Class that images of class k are most often mistaken for; ties to the smaller index.
inline std::size_t confused_class(const ConfusionMatrix& m, std::size_t k) {
  require(k < m.size(), Errc::invalid_argument, "class index out of range");
  std::size_t best = m.size();
  for (std::size_t j = 0; j < m[k].size(); ++j) {
    if (j == k || m[k][j] == 0) continue;
    if (best == m.size() || m[k][j] > m[k][best]) best = j;
  }
  require(best != m.size(), Errc::invalid_argument,
          "class " + std::to_string(k) + " has no misclassifications");
  return best;
}

inline std::string confused_prompt(const std::vector<std::string>& class_names, std::size_t k,
                                   std::size_t k_confused) {
  require(k < class_names.size() && k_confused < class_names.size(), Errc::invalid_argument,
          "class index out of range");
  require(k != k_confused, Errc::invalid_argument, "confused class must differ from the class itself");
  return "a photo of " + class_names[k] + ", not " + class_names[k_confused];
}

}  // namespace lgcav
