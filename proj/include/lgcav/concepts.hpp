#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "lgcav/embedstore.hpp"
#include "lgcav/error.hpp"
#include "lgcav/numerics.hpp"
#include "lgcav/rng.hpp"

namespace lgcav {

// Probe images shared by the target and VL feature spaces.
struct ProbeSet {
  std::vector<std::string> item_ids;
  std::vector<std::size_t> target_rows;
  std::vector<std::size_t> vl_rows;

  std::size_t size() const { return item_ids.size(); }
};

inline ProbeSet make_probe_set(const std::vector<std::string>& ids,
                               const EmbeddingMatrix& target,
                               const EmbeddingMatrix& vl) {
  require(ids.size() >= 2, Errc::invalid_argument,
          "probe set needs at least 2 items, got " + std::to_string(ids.size()));
  ProbeSet p;
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    require(seen.insert(id).second, Errc::duplicate_id, "duplicate probe id '" + id + "'");
    const auto t = target.find(id);
    const auto v = vl.find(id);
    require(t && v, Errc::missing_id,
            "probe '" + id + "' missing from the " + (t ? "VL" : "target") + " features");
    p.item_ids.push_back(id);
    p.target_rows.push_back(*t);
    p.vl_rows.push_back(*v);
  }
  return p;
}

// Mean of the prompt embeddings, not renormalized.
inline Vector concept_ensemble(const Matrix& prompts) {
  require(prompts.rows() >= 1, Errc::invalid_argument, "concept_ensemble: no prompts");
  Vector out(prompts.cols(), 0.0);
  for (std::size_t i = 0; i < prompts.rows(); ++i) {
    const auto r = prompts.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
  }
  for (double& x : out) x /= static_cast<double>(prompts.rows());
  return out;
}

inline Vector concept_ensemble(const EmbeddingMatrix& prompts) {
  return concept_ensemble(prompts.matrix());
}

// The m most activated pool items (descending) followed by the m least
// activated of the remainder (ascending). Equal activations order by id.
inline std::vector<std::string> select_probe_ids(const EmbeddingMatrix& vl,
                                                 std::span<const double> text,
                                                 const std::vector<std::string>& pool,
                                                 std::size_t m) {
  require(m >= 1, Errc::invalid_argument, "select_probes: m must be >= 1");
  require(2 * m <= pool.size(), Errc::invalid_argument,
          "probe pool has " + std::to_string(pool.size()) + " items, need " +
              std::to_string(2 * m));
  struct Entry {
    double act;
    const std::string* id;
  };
  std::vector<Entry> entries;
  entries.reserve(pool.size());
  std::unordered_set<std::string> seen;
  for (const auto& id : pool) {
    require(seen.insert(id).second, Errc::duplicate_id, "duplicate pool id '" + id + "'");
    entries.push_back({cosine(text, vl.row(id)), &id});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.act != b.act ? a.act > b.act : *a.id < *b.id;
  });
  std::sort(entries.begin() + static_cast<std::ptrdiff_t>(m), entries.end(),
            [](const Entry& a, const Entry& b) {
              return a.act != b.act ? a.act < b.act : *a.id < *b.id;
            });
  std::vector<std::string> out;
  out.reserve(2 * m);
  for (std::size_t i = 0; i < 2 * m; ++i) out.push_back(*entries[i].id);
  return out;
}

inline ProbeSet select_probes(const EmbeddingMatrix& target, const EmbeddingMatrix& vl,
                              std::span<const double> text,
                              const std::vector<std::string>& pool, std::size_t m) {
  return make_probe_set(select_probe_ids(vl, text, pool, m), target, vl);
}

// Uniform sample of 2m pool ids without replacement.
inline std::vector<std::string> random_probe_ids(const std::vector<std::string>& pool,
                                                 std::size_t m, std::uint64_t seed) {
  require(m >= 1, Errc::invalid_argument, "random_probes: m must be >= 1");
  require(2 * m <= pool.size(), Errc::invalid_argument,
          "probe pool has " + std::to_string(pool.size()) + " items, need " +
              std::to_string(2 * m));
  std::vector<std::string> ids = pool;
  Rng rng(seed, 0x9209be5u);
  rng.shuffle(ids);
  ids.resize(2 * m);
  return ids;
}

inline ProbeSet random_probes(const EmbeddingMatrix& target, const EmbeddingMatrix& vl,
                              const std::vector<std::string>& pool, std::size_t m,
                              std::uint64_t seed) {
  return make_probe_set(random_probe_ids(pool, m, seed), target, vl);
}

// All (concept, class) entries with similarity strictly above eps.
inline PairSet build_pair_set(const Matrix& sim,
                              const std::vector<std::string>& concept_names, double eps) {
  require(sim.rows() == concept_names.size(), Errc::shape_mismatch,
          "similarity matrix has " + std::to_string(sim.rows()) + " rows for " +
              std::to_string(concept_names.size()) + " concepts");
  PairSet out;
  out.source = PairSource::threshold;
  for (std::size_t c = 0; c < sim.rows(); ++c)
    for (std::size_t k = 0; k < sim.cols(); ++k) {
      require(std::isfinite(sim(c, k)), Errc::non_finite, "non-finite similarity");
      if (sim(c, k) > eps) out.pairs.push_back({concept_names[c], k});
    }
  return out;
}

}  // namespace lgcav
