#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "lgcav/embedstore.hpp"
#include "lgcav/error.hpp"
#include "lgcav/numerics.hpp"

namespace lgcav {

// Fraction of items on the correct side of v.f + b = 0 (positive iff > 0).
inline double concept_accuracy(std::span<const double> v, double b, const Matrix& pos,
                               const Matrix& neg) {
  require(pos.rows() + neg.rows() > 0, Errc::invalid_argument, "concept_accuracy: empty test set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pos.rows(); ++i) correct += dot(v, pos.row(i)) + b > 0.0;
  for (std::size_t i = 0; i < neg.rows(); ++i) correct += dot(v, neg.row(i)) + b <= 0.0;
  return static_cast<double>(correct) / static_cast<double>(pos.rows() + neg.rows());
}

// Bias maximizing balanced accuracy of v.f + b on labeled data. Candidate
// thresholds are midpoints between consecutive distinct scores plus one
// point beyond each end; the first best candidate wins.
inline double fit_threshold(std::span<const double> v, const Matrix& pos, const Matrix& neg) {
  require(pos.rows() >= 1 && neg.rows() >= 1, Errc::invalid_argument,
          "threshold fitting needs positives and negatives");
  std::vector<double> sp, sn;
  for (std::size_t i = 0; i < pos.rows(); ++i) sp.push_back(dot(v, pos.row(i)));
  for (std::size_t i = 0; i < neg.rows(); ++i) sn.push_back(dot(v, neg.row(i)));
  std::vector<double> all = sp;
  all.insert(all.end(), sn.begin(), sn.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> cand{all.front() - 1.0};
  for (std::size_t i = 1; i < all.size(); ++i) cand.push_back(0.5 * (all[i - 1] + all[i]));
  cand.push_back(all.back() + 1.0);
  double best = -1.0, best_t = cand.front();
  for (double t : cand) {
    std::size_t tp = 0, tn = 0;
    for (double s : sp) tp += s > t;
    for (double s : sn) tn += s <= t;
    const double ba = 0.5 * (static_cast<double>(tp) / static_cast<double>(sp.size()) +
                             static_cast<double>(tn) / static_cast<double>(sn.size()));
    if (ba > best) {
      best = ba;
      best_t = t;
    }
  }
  return -best_t;
}

struct AccuracyResult {
  double accuracy = 0.0;
  double bias = 0.0;
  bool threshold_fitted = false;
};

// Uses the CAV's own bias, or fits one on the training sets when it has none.
inline AccuracyResult concept_accuracy(const Cav& cav, const Matrix& pos_test, const Matrix& neg_test,
                                       const Matrix& pos_train, const Matrix& neg_train) {
  AccuracyResult r;
  if (cav.bias) {
    r.bias = *cav.bias;
  } else {
    r.bias = fit_threshold(cav.vector, pos_train, neg_train);
    r.threshold_fitted = true;
  }
  r.accuracy = concept_accuracy(cav.vector, r.bias, pos_test, neg_test);
  return r;
}

// Cosine between the CAV and the class-k weight row (the logit gradient of a linear head).
inline double concept_to_class(std::span<const double> v, const LinearHead& head, std::size_t k) {
  require(k < head.num_classes(), Errc::invalid_argument, "class index out of range");
  require(norm(head.weights.row(k)) > 0.0, Errc::degenerate,
          "zero-norm weight row for class " + std::to_string(k));
  return cosine(v, head.weights.row(k));
}

// Fraction of pairs whose CAV forms an acute angle with the class weight row.
inline double tcav_score(const std::map<std::string, Vector>& cavs, const LinearHead& head,
                         const PairSet& pairs) {
  require(!pairs.pairs.empty(), Errc::invalid_argument, "tcav_score: empty pair set");
  std::size_t acute = 0;
  for (const auto& p : pairs.pairs) {
    const auto it = cavs.find(p.concept_name);
    require(it != cavs.end(), Errc::missing_id, "no CAV for concept '" + p.concept_name + "'");
    require(p.class_index < head.num_classes(), Errc::invalid_argument, "class index out of range");
    acute += dot(it->second, head.weights.row(p.class_index)) > 0.0;
  }
  return static_cast<double>(acute) / static_cast<double>(pairs.pairs.size());
}

// Ids of the k rows most activated by v (cosine), ties by ascending id.
inline std::vector<std::string> top_k_ids(std::span<const double> v, const EmbeddingMatrix& feats,
                                          std::size_t k) {
  require(k <= feats.rows(), Errc::invalid_argument,
          "k=" + std::to_string(k) + " exceeds " + std::to_string(feats.rows()) + " rows");
  std::vector<std::pair<double, std::size_t>> act(feats.rows());
  for (std::size_t i = 0; i < feats.rows(); ++i) act[i] = {cosine(v, feats.row(i)), i};
  const auto& ids = feats.ids();
  auto before = [&](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : ids[a.second] < ids[b.second];
  };
  std::partial_sort(act.begin(), act.begin() + static_cast<std::ptrdiff_t>(k), act.end(), before);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(ids[act[i].second]);
  return out;
}

inline double recall_at_k(std::span<const double> v, const EmbeddingMatrix& feats,
                          const std::vector<std::string>& truth, std::size_t k) {
  require(!truth.empty(), Errc::invalid_argument, "recall_at_k: empty ground truth");
  const std::unordered_set<std::string> t(truth.begin(), truth.end());
  for (const auto& id : t) require(feats.find(id).has_value(), Errc::missing_id, "truth id '" + id + "' not in features");
  std::size_t hit = 0;
  for (const auto& id : top_k_ids(v, feats, k)) hit += t.count(id);
  return static_cast<double>(hit) / static_cast<double>(t.size());
}

struct ConceptMetrics {
  std::string concept_name;
  std::optional<double> accuracy;
  bool threshold_fitted = false;
  std::optional<double> recall;
};

struct PairMetrics {
  std::string concept_name;
  std::size_t class_index = 0;
  double cosine = 0.0;
  bool acute = false;
};

inline std::optional<double> mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Per-concept and per-pair values; aggregates are their unweighted means.
struct MetricReport {
  std::vector<ConceptMetrics> concepts;
  std::vector<PairMetrics> pairs;
  std::size_t recall_k = 0;

  std::optional<double> concept_accuracy() const {
    std::vector<double> xs;
    for (const auto& c : concepts)
      if (c.accuracy) xs.push_back(*c.accuracy);
    return mean_of(xs);
  }
  std::optional<double> concept_to_class() const {
    std::vector<double> xs;
    for (const auto& p : pairs) xs.push_back(p.cosine);
    return mean_of(xs);
  }
  std::optional<double> tcav_score() const {
    std::vector<double> xs;
    for (const auto& p : pairs) xs.push_back(p.acute ? 1.0 : 0.0);
    return mean_of(xs);
  }
  std::optional<double> recall_at_k() const {
    std::vector<double> xs;
    for (const auto& c : concepts)
      if (c.recall) xs.push_back(*c.recall);
    return mean_of(xs);
  }

  json to_json() const {
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
    json per_concept = json::array();
    for (const auto& c : concepts)
      per_concept.push_back({{"concept", c.concept_name},
                             {"concept_accuracy", opt(c.accuracy)},
                             {"threshold_fitted", c.threshold_fitted},
                             {"recall_at_k", opt(c.recall)}});
    json per_pair = json::array();
    for (const auto& p : pairs)
      per_pair.push_back({{"concept", p.concept_name},
                          {"class", p.class_index},
                          {"cosine", p.cosine},
                          {"acute", p.acute}});
    return json{{"concept_accuracy", opt(concept_accuracy())},
                {"concept_to_class", opt(concept_to_class())},
                {"tcav_score", opt(tcav_score())},
                {"recall_at_k", opt(recall_at_k())},
                {"recall_k", recall_k},
                {"per_concept", std::move(per_concept)},
                {"per_pair", std::move(per_pair)}};
  }
};

}  // namespace lgcav
