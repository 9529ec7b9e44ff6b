#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lgcav/cavtrain.hpp"
#include "lgcav/concepts.hpp"
#include "lgcav/correction.hpp"
#include "lgcav/embedstore.hpp"
#include "lgcav/metrics.hpp"
#include "lgcav/numerics.hpp"
#include "lgcav/parallel.hpp"
#include "lgcav/rng.hpp"

namespace lgcav {

// Twin feature spaces over shared latent concept scores.
//
// Target space: planted unit directions u_c (orthonormal concept axes tilted
// toward one shared axis) scaled by per-image scores, plus nuisance noise.
// VL space: the same latents with multiplicatively perturbed scores,
// normalized, carried by an isometry into a larger space, plus isotropic
// noise and a constant modality offset. Text embeddings are the VL image of
// u_c plus a different modality offset. `noise` scales every cross-space
// disagreement; at noise = 0 text/VL cosines are a fixed multiple of the
// target-space cosines with u_c.
struct SynthConfig {
  std::size_t d_target = 64;
  std::size_t d_vl = 96;
  std::size_t n_images = 3000;
  std::size_t n_concepts = 8;
  double noise = 0.3;
  double concept_strength = 1.2;
  std::uint64_t seed = 0;

  double off_concept = 0.15;      // background score scale, relative to strength
  double shared_tilt = 0.5;       // weight of the shared axis in each u_c
  std::size_t nuisance_dims = 24;
  double nuisance_sd = 0.5;
  double isotropic_sd = 0.02;
  double vl_multiplicative = 1.0;  // score perturbation, times noise
  double vl_additive = 1.5;        // isotropic VL noise, times noise
  double modality_gap = 1.5;
  std::size_t n_prompts = 8;
  double prompt_noise = 0.6;

  double pool_fraction = 0.6;
  double train_fraction = 0.2;     // remainder is test
  double background_fraction = 0.6;  // pool images carrying no concept

  // Spurious feature planted on one class.
  bool spurious = false;
  std::size_t spurious_class = 0;
  double spurious_scale = 4.0;
  double p_spurious_in = 0.3;       // class images in train
  double p_spurious_out = 0.05;     // other train images
  double p_spurious_test = 0.5;     // pool and test images
  double p_context_only = 0.5;      // class train images showing only the spurious feature

  std::size_t head_epochs = 300;
  double head_learning_rate = 0.5;

  void validate() const {
    require(d_target >= 2 && d_vl >= 2, Errc::config, "synth dims must be >= 2");
    require(d_vl >= d_target + 2, Errc::config, "synth d_vl must be >= d_target + 2");
    require(n_concepts >= 1, Errc::config, "synth n_concepts must be >= 1");
    require(d_target >= n_concepts + 1 + (spurious ? 1 : 0), Errc::config,
            "synth d_target too small for the planted directions");
    require(n_images >= 4 * n_concepts, Errc::config, "synth n_images must be >= 4 * n_concepts");
    require(noise >= 0.0, Errc::config, "synth noise must be >= 0");
    require(concept_strength > 0.0, Errc::config, "synth concept_strength must be > 0");
    require(shared_tilt >= 0.0 && shared_tilt < 1.0, Errc::config, "synth shared_tilt must be in [0, 1)");
    require(pool_fraction >= 0.0 && train_fraction >= 0.0 && pool_fraction + train_fraction <= 1.0,
            Errc::config, "synth split fractions must be in [0, 1] and sum to <= 1");
    require(n_prompts >= 1, Errc::config, "synth n_prompts must be >= 1");
    require(!spurious || spurious_class < n_concepts, Errc::config, "synth spurious_class out of range");
  }
};

// Defaults of the spurious-class world used for correction.
inline SynthConfig correction_world_config(std::uint64_t seed = 0) {
  SynthConfig c;
  c.seed = seed;
  c.n_images = 6000;
  c.concept_strength = 0.8;
  c.nuisance_sd = 1.0;
  c.pool_fraction = 0.4;
  c.train_fraction = 0.3;
  c.spurious = true;
  c.head_epochs = 400;
  c.head_learning_rate = 4.0;
  return c;
}

struct SynthWorld {
  SynthConfig cfg;
  EmbeddingMatrix target;
  EmbeddingMatrix vl;
  std::vector<EmbeddingMatrix> prompts;  // per concept
  Matrix text_clean;                     // per concept, noise-free text embedding
  Matrix planted;                        // per concept u_c (unit, target space)
  Matrix scores;                         // images x concepts
  Vector spurious_direction;             // empty unless cfg.spurious
  std::vector<bool> has_spurious;
  std::vector<std::string> concept_names;
  DatasetManifest manifest;  // label = primary concept, absent for background images
  LinearHead head;           // trained on the train split

  std::vector<std::string> ids_in(Split s) const { return manifest.ids_in(s); }
};

namespace detail {

// Rows form an orthonormal basis of R^d (modified Gram-Schmidt on Gaussians).
inline Matrix random_orthonormal(std::size_t d, Rng& rng) {
  Matrix q(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (;;) {
      auto r = q.row(i);
      for (double& x : r) x = rng.normal();
      for (std::size_t k = 0; k < i; ++k) {
        const double p = dot(r, q.row(k));
        const auto qk = q.row(k);
        for (std::size_t j = 0; j < d; ++j) r[j] -= p * qk[j];
      }
      const double n = norm(r);
      if (n > 1e-8) {
        for (double& x : r) x /= n;
        break;
      }
    }
  }
  return q;
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline std::string image_id(std::size_t i) {
  std::string s = std::to_string(i);
  return "img" + std::string(s.size() < 5 ? 5 - s.size() : 0, '0') + s;
}

}  // namespace detail

inline SynthWorld generate_world(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t dt = cfg.d_target, dv = cfg.d_vl, n = cfg.n_images, nc = cfg.n_concepts;
  const Rng root(cfg.seed, 0x5e7a1dU);
  Rng geo = root.split(1), lat = root.split(2), nz = root.split(3), vln = root.split(4), txt = root.split(5);

  SynthWorld w;
  w.cfg = cfg;
  const Matrix basis = detail::random_orthonormal(dt, geo);
  const Matrix vbasis = detail::random_orthonormal(dv, geo);
  const std::size_t base_axis = nc;
  const std::size_t z_axis = nc + 1;
  const std::size_t nuis_start = nc + 1 + (cfg.spurious ? 1 : 0);
  const std::size_t n_nuis = std::min(cfg.nuisance_dims, dt - nuis_start);
  const double tilt = cfg.shared_tilt;

  w.planted = Matrix(nc, dt);
  for (std::size_t c = 0; c < nc; ++c) {
    detail::axpy(std::sqrt(1.0 - tilt * tilt), basis.row(c), w.planted.row(c));
    detail::axpy(tilt, basis.row(base_axis), w.planted.row(c));
  }
  if (cfg.spurious) w.spurious_direction.assign(basis.row(z_axis).begin(), basis.row(z_axis).end());

  // Isometric embedding x -> sum_j x_j q_j of target space into VL space.
  auto embed = [&](std::span<const double> x, std::span<double> out) {
    for (std::size_t j = 0; j < dt; ++j) detail::axpy(x[j], vbasis.row(j), out);
  };
  const auto e_img = vbasis.row(dt);
  const auto e_txt = vbasis.row(dt + 1);

  const double s = cfg.concept_strength;
  const double off = cfg.off_concept * s;
  w.scores = Matrix(n, nc);
  std::vector<long> primary(n);
  std::vector<Split> split(n);
  w.has_spurious.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    primary[i] = static_cast<long>(lat.below(nc));
    auto srow = w.scores.row(i);
    for (double& x : srow) x = off * std::abs(lat.normal());
    srow[primary[i]] = s * lat.uniform(0.6, 1.4);
    const double u = lat.uniform();
    split[i] = u < cfg.pool_fraction ? Split::probe_pool
               : u < cfg.pool_fraction + cfg.train_fraction ? Split::train
                                                            : Split::test;
    if (split[i] == Split::probe_pool && lat.uniform() < cfg.background_fraction) {
      srow[primary[i]] = off * std::abs(lat.normal());
      primary[i] = -1;
    }
    if (cfg.spurious) {
      const bool in_class = primary[i] == static_cast<long>(cfg.spurious_class);
      const bool context = split[i] == Split::train && in_class && lat.uniform() < cfg.p_context_only;
      if (context) srow[cfg.spurious_class] = off * std::abs(lat.normal());
      const double pz = context ? 1.0
                        : split[i] == Split::train ? (in_class ? cfg.p_spurious_in : cfg.p_spurious_out)
                                                   : cfg.p_spurious_test;
      w.has_spurious[i] = lat.uniform() < pz;
    }
  }

  Matrix F(n, dt), G(n, dv);
  Vector shared(dt), fv(dt), tmp(dv);
  const double vl_sd = cfg.noise * cfg.vl_additive / std::sqrt(static_cast<double>(dv));
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(shared.begin(), shared.end(), 0.0);
    for (std::size_t k = 0; k < n_nuis; ++k)
      detail::axpy(cfg.nuisance_sd * nz.normal(), basis.row(nuis_start + k), shared);
    for (double& x : shared) x += cfg.isotropic_sd * nz.normal();
    if (w.has_spurious[i]) detail::axpy(cfg.spurious_scale * s, basis.row(z_axis), shared);

    auto f = F.row(i);
    std::copy(shared.begin(), shared.end(), f.begin());
    fv = shared;
    const auto srow = w.scores.row(i);
    for (std::size_t c = 0; c < nc; ++c) {
      detail::axpy(srow[c], basis.row(c), f);
      const double sv = srow[c] * std::exp(cfg.noise * cfg.vl_multiplicative * vln.normal());
      detail::axpy(sv, basis.row(c), fv);
    }
    const double nfv = norm(fv);
    for (double& x : fv) x /= nfv;
    std::fill(tmp.begin(), tmp.end(), 0.0);
    embed(fv, tmp);
    if (vl_sd > 0.0)
      for (double& x : tmp) x += vl_sd * vln.normal();
    const double nt = norm(tmp);
    auto g = G.row(i);
    for (std::size_t j = 0; j < dv; ++j) g[j] = tmp[j] / nt + cfg.modality_gap * e_img[j];
  }

  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = detail::image_id(i);
  w.target = EmbeddingMatrix(std::move(F), ids);
  w.vl = EmbeddingMatrix(std::move(G), ids);

  w.text_clean = Matrix(nc, dv);
  const double p_sd = cfg.prompt_noise / std::sqrt(static_cast<double>(dv));
  for (std::size_t c = 0; c < nc; ++c) {
    embed(w.planted.row(c), w.text_clean.row(c));
    detail::axpy(cfg.modality_gap, e_txt, w.text_clean.row(c));
    Matrix p(cfg.n_prompts, dv);
    std::vector<std::string> pids;
    for (std::size_t r = 0; r < cfg.n_prompts; ++r) {
      std::fill(tmp.begin(), tmp.end(), 0.0);
      embed(w.planted.row(c), tmp);
      for (double& x : tmp) x += p_sd * txt.normal();
      const double nt = norm(tmp);
      auto pr = p.row(r);
      for (std::size_t j = 0; j < dv; ++j) pr[j] = tmp[j] / nt + cfg.modality_gap * e_txt[j];
      pids.push_back("prompt" + std::to_string(r));
    }
    w.prompts.emplace_back(std::move(p), std::move(pids));
    w.concept_names.push_back("concept_" + std::to_string(c));
  }

  for (std::size_t c = 0; c < nc; ++c) w.manifest.class_names.push_back("class_" + std::to_string(c));
  for (std::size_t i = 0; i < n; ++i) {
    ManifestItem it{ids[i], std::nullopt, split[i]};
    if (primary[i] >= 0) it.label = static_cast<std::size_t>(primary[i]);
    w.manifest.items.push_back(std::move(it));
  }

  LinearHead head;
  head.weights = Matrix(nc, dt);
  head.biases.assign(nc, 0.0);
  head.class_names = w.manifest.class_names;
  const auto [train_ids, train_labels] = w.manifest.labeled(Split::train);
  if (!train_ids.empty()) {
    const Matrix X = w.target.gather(train_ids);
    head = train_head(head, X, train_labels, cfg.head_epochs, cfg.head_learning_rate).head;
  }
  head.provenance = json{{"source", "synthetic"},
                         {"seed", cfg.seed},
                         {"epochs", cfg.head_epochs},
                         {"learning_rate", cfg.head_learning_rate}};
  w.head = std::move(head);
  return w;
}

// ---------------------------------------------------------------------------
// Quality experiment: original CAV against the LG variants.

enum class Arm { original, lg, lg_ga, lg_ga_ce, lg_ga_ce_dsr };

inline const std::vector<Arm>& all_arms() {
  static const std::vector<Arm> arms{Arm::original, Arm::lg, Arm::lg_ga, Arm::lg_ga_ce, Arm::lg_ga_ce_dsr};
  return arms;
}

inline std::string to_string(Arm a) {
  switch (a) {
    case Arm::original: return "original";
    case Arm::lg: return "lg";
    case Arm::lg_ga: return "lg+ga";
    case Arm::lg_ga_ce: return "lg+ga+ce";
    case Arm::lg_ga_ce_dsr: return "lg+ga+ce+dsr";
  }
  return "original";
}

enum class ProbeStrategy { activation, random };

inline std::string to_string(ProbeStrategy s) {
  return s == ProbeStrategy::activation ? "activation" : "random";
}

inline ProbeStrategy parse_probe_strategy(const std::string& s) {
  if (s == "activation") return ProbeStrategy::activation;
  if (s == "random") return ProbeStrategy::random;
  fail(Errc::config, "unknown probe strategy '" + s + "' (expected activation or random)");
}

struct QualityOptions {
  std::vector<std::size_t> samples{5, 10, 20, 50};  // 0 = all available
  std::vector<Arm> arms = all_arms();
  std::size_t probes = 400;  // |R|
  ProbeStrategy strategy = ProbeStrategy::activation;
  SgdConfig sgd{0.5, 300, 0, 0};
  double lambda = 1.0;
};

struct QualityRow {
  std::size_t samples = 0;  // resolved count
  Arm arm = Arm::original;
  std::uint64_t seed = 0;
  std::size_t probes = 0;
  ProbeStrategy strategy = ProbeStrategy::activation;
  double accuracy = 0.0;          // mean over concepts
  double cosine_planted = 0.0;    // mean over concepts
  double concept_to_class = 0.0;  // mean over concepts, pair (c, class c)
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a + kGolden) ^ (b * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
}

struct ConceptSplit {
  std::vector<std::string> train_pos, train_neg, test_pos, test_neg;
};

// Half the positives (and as many negatives) are held out for testing;
// training draws the first n of the rest.
inline ConceptSplit split_concept(const SynthWorld& w, std::size_t c, std::size_t n, std::uint64_t seed) {
  std::vector<std::string> pos, neg;
  for (const auto& it : w.manifest.items) {
    if (it.split == Split::probe_pool || !it.label) continue;
    (*it.label == c ? pos : neg).push_back(it.id);
  }
  Rng rng(seed, 0x5a11u + c);
  rng.shuffle(pos);
  rng.shuffle(neg);
  const std::size_t n_test = pos.size() / 2;
  const std::size_t avail = pos.size() - n_test;
  require(n_test >= 1, Errc::invalid_argument, "concept " + std::to_string(c) + " has too few positives");
  require(n <= avail && n_test + n <= neg.size(), Errc::invalid_argument,
          "n=" + std::to_string(n) + " exceeds the " + std::to_string(avail) +
              " training positives of concept " + std::to_string(c));
  ConceptSplit out;
  out.test_pos.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.train_pos.assign(pos.begin() + static_cast<std::ptrdiff_t>(n_test),
                       pos.begin() + static_cast<std::ptrdiff_t>(n_test + n));
  out.test_neg.assign(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.train_neg.assign(neg.begin() + static_cast<std::ptrdiff_t>(n_test),
                       neg.begin() + static_cast<std::ptrdiff_t>(n_test + n));
  return out;
}

}  // namespace detail

// Largest per-concept training count the world supports.
inline std::size_t max_training_samples(const SynthWorld& w) {
  std::vector<std::size_t> pos(w.cfg.n_concepts, 0);
  std::size_t labeled = 0;
  for (const auto& it : w.manifest.items)
    if (it.split != Split::probe_pool && it.label) {
      ++pos[*it.label];
      ++labeled;
    }
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (std::size_t p : pos) {
    const std::size_t n_test = p / 2;
    best = std::min({best, p - n_test, labeled - p >= n_test ? labeled - p - n_test : 0});
  }
  return best;
}

// One world, every (samples, arm) cell.
inline std::vector<QualityRow> run_quality_world(const SynthWorld& w, const QualityOptions& opt) {
  require(opt.probes >= 2 && opt.probes % 2 == 0, Errc::config, "probe count must be even and >= 2");
  const std::size_t nc = w.cfg.n_concepts;
  const std::uint64_t seed = w.cfg.seed;
  const auto pool = w.ids_in(Split::probe_pool);
  const std::size_t m = opt.probes / 2;

  struct ProbeCache {
    ProbeSet probe;
    GaussianParams target_stats;
  };
  // Probe sets per concept for the single-prompt and ensembled text.
  std::vector<std::optional<ProbeCache>> single(nc), ensemble(nc);
  auto probes_for = [&](std::size_t c, bool ens) -> const ProbeCache& {
    auto& slot = ens ? ensemble[c] : single[c];
    if (!slot) {
      const Vector text = ens ? concept_ensemble(w.prompts[c])
                              : Vector(w.prompts[c].row(0).begin(), w.prompts[c].row(0).end());
      ProbeSet p = opt.strategy == ProbeStrategy::activation
                       ? select_probes(w.target, w.vl, text, pool, m)
                       : random_probes(w.target, w.vl, pool, m, detail::mix_seed(seed, 0x7000 + c));
      const auto stats = target_activation_population(w.target, p, kDefaultPairCap, seed).params;
      slot = ProbeCache{std::move(p), stats};
    }
    return *slot;
  };

  std::vector<QualityRow> rows;
  for (std::size_t n_req : opt.samples) {
    const std::size_t n = n_req == 0 ? max_training_samples(w) : n_req;
    std::map<Arm, QualityRow> acc;
    for (Arm a : opt.arms) acc[a] = QualityRow{n, a, seed, opt.probes, opt.strategy, 0, 0, 0};
    for (std::size_t c = 0; c < nc; ++c) {
      const auto sp = detail::split_concept(w, c, n, seed);
      CavTrainData data;
      data.concept_name = w.concept_names[c];
      data.positives = w.target.gather(sp.train_pos);
      data.negatives = w.target.gather(sp.train_neg);
      const Matrix test_pos = w.target.gather(sp.test_pos);
      const Matrix test_neg = w.target.gather(sp.test_neg);
      SgdConfig sgd = opt.sgd;
      sgd.seed = detail::mix_seed(seed, 100 + c);
      for (Arm a : opt.arms) {
        data.lg.reset();
        CavMode mode = CavMode::original;
        if (a != Arm::original) {
          mode = CavMode::combined;
          const bool ens = a == Arm::lg_ga_ce || a == Arm::lg_ga_ce_dsr;
          const auto& pc = probes_for(c, ens);
          const Vector text = ens ? concept_ensemble(w.prompts[c])
                                  : Vector(w.prompts[c].row(0).begin(), w.prompts[c].row(0).end());
          std::optional<GaussianParams> stats;
          if (a != Arm::lg) stats = pc.target_stats;
          data.lg = build_lg_plan(w.target, w.vl, text, pc.probe, stats,
                                  a == Arm::lg_ga_ce_dsr ? &sp.train_pos : nullptr, opt.lambda)
                        .first;
        }
        const Cav cav = train_cav(mode, data, sgd);
        auto& r = acc[a];
        r.accuracy += concept_accuracy(cav.vector, *cav.bias, test_pos, test_neg);
        r.cosine_planted += cosine(cav.vector, w.planted.row(c));
        r.concept_to_class += concept_to_class(cav.vector, w.head, c);
      }
    }
    for (Arm a : opt.arms) {
      auto r = acc[a];
      r.accuracy /= static_cast<double>(nc);
      r.cosine_planted /= static_cast<double>(nc);
      r.concept_to_class /= static_cast<double>(nc);
      rows.push_back(r);
    }
  }
  return rows;
}

// Seed-parallel: world seed s is cfg with seed = s.
inline std::vector<QualityRow> run_quality_experiment(const SynthConfig& cfg, const QualityOptions& opt,
                                                      const std::vector<std::uint64_t>& seeds,
                                                      std::size_t jobs = 1) {
  std::vector<std::vector<QualityRow>> per(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t i) {
    SynthConfig c = cfg;
    c.seed = seeds[i];
    per[i] = run_quality_world(generate_world(c), opt);
  });
  std::vector<QualityRow> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  return out;
}

struct CellSummary {
  double accuracy_mean = 0.0, accuracy_sd = 0.0;
  double cosine_mean = 0.0, cosine_sd = 0.0;
  double c2c_mean = 0.0;
  std::size_t count = 0;
};

template <class Pred>
CellSummary summarize(const std::vector<QualityRow>& rows, Pred&& pred) {
  std::vector<double> acc, cos, c2c;
  for (const auto& r : rows)
    if (pred(r)) {
      acc.push_back(r.accuracy);
      cos.push_back(r.cosine_planted);
      c2c.push_back(r.concept_to_class);
    }
  CellSummary s;
  s.count = acc.size();
  if (acc.empty()) return s;
  auto ms = [](const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    return std::pair{m, std::sqrt(v / static_cast<double>(xs.size()))};
  };
  std::tie(s.accuracy_mean, s.accuracy_sd) = ms(acc);
  std::tie(s.cosine_mean, s.cosine_sd) = ms(cos);
  s.c2c_mean = ms(c2c).first;
  return s;
}

// Probe sweep: full pipeline (GA, ensemble, DSR) per strategy and |R|.
inline std::vector<QualityRow> run_probe_sweep(const SynthConfig& cfg, std::size_t samples,
                                               const std::vector<ProbeStrategy>& strategies,
                                               const std::vector<std::size_t>& probe_counts,
                                               const std::vector<std::uint64_t>& seeds, const SgdConfig& sgd,
                                               std::size_t jobs = 1) {
  std::vector<std::vector<QualityRow>> per(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t i) {
    SynthConfig c = cfg;
    c.seed = seeds[i];
    const SynthWorld w = generate_world(c);
    for (ProbeStrategy st : strategies)
      for (std::size_t r : probe_counts) {
        QualityOptions opt;
        opt.samples = {samples};
        opt.arms = {Arm::lg_ga_ce_dsr};
        opt.probes = r;
        opt.strategy = st;
        opt.sgd = sgd;
        const auto rows = run_quality_world(w, opt);
        per[i].insert(per[i].end(), rows.begin(), rows.end());
      }
  });
  std::vector<QualityRow> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  return out;
}

// ---------------------------------------------------------------------------
// Correction experiment on a world with a spurious class.

struct CorrectionOptions {
  std::size_t probes = 400;
  SgdConfig cav_sgd{0.5, 300, 0, 0};
  std::size_t fine_tune_epochs = 60;
  double fine_tune_learning_rate = 3.0;
};

struct CorrectionRow {
  std::uint64_t seed = 0;
  double before = 0.0;          // held-out accuracy of the pretrained head
  double after_asr = 0.0;       // after ASR-weighted fine-tuning
  double after_uniform = 0.0;   // after fine-tuning with all weights 1
  bool uniform_matches_unweighted = false;  // bitwise
  double cav_cosine_planted = 0.0;
};

inline CorrectionRow run_correction_world(const SynthWorld& w, const CorrectionOptions& opt) {
  require(w.cfg.spurious, Errc::config, "correction experiment needs a spurious-class world");
  const std::size_t k = w.cfg.spurious_class;
  const auto [train_ids, train_labels] = w.manifest.labeled(Split::train);
  const auto [test_ids, test_labels] = w.manifest.labeled(Split::test);
  const Matrix Xtr = w.target.gather(train_ids);
  const Matrix Xte = w.target.gather(test_ids);

  CorrectionRow row;
  row.seed = w.cfg.seed;
  row.before = head_accuracy(w.head, Xte, test_labels);

  const Vector text = concept_ensemble(w.prompts[k]);
  const ProbeSet probe = select_probes(w.target, w.vl, text, w.ids_in(Split::probe_pool), opt.probes / 2);
  const auto stats = target_activation_population(w.target, probe, kDefaultPairCap, w.cfg.seed).params;
  CavTrainData data;
  data.concept_name = w.concept_names[k];
  data.lg = build_lg_plan(w.target, w.vl, text, probe, stats, nullptr, 1.0).first;
  SgdConfig sgd = opt.cav_sgd;
  sgd.seed = detail::mix_seed(w.cfg.seed, 0xc0);
  const Cav cav = train_cav(CavMode::lg, data, sgd);
  row.cav_cosine_planted = cosine(cav.vector, w.planted.row(k));

  AsrPlan plan;
  plan.epochs = opt.fine_tune_epochs;
  plan.learning_rate = opt.fine_tune_learning_rate;
  plan.seed = w.cfg.seed;
  AsrPlan::ClassWeights cw;
  cw.concept_name = cav.concept_name;
  for (std::size_t i = 0; i < train_ids.size(); ++i)
    if (train_labels[i] == k) cw.items.push_back(train_ids[i]);
  cw.weights = asr_weights(cav.vector, w.target, cw.items);
  plan.classes[k] = std::move(cw);

  const auto asr = fine_tune_head(w.head, Xtr, train_labels, train_ids, plan);
  const Vector ones(train_ids.size(), 1.0);
  const auto uni = fine_tune_head(w.head, Xtr, train_labels, ones, plan.epochs, plan.learning_rate, 0, plan.seed);
  const auto plain = train_head(w.head, Xtr, train_labels, plan.epochs, plan.learning_rate, 0, plan.seed);
  row.after_asr = head_accuracy(asr.head, Xte, test_labels);
  row.after_uniform = head_accuracy(uni.head, Xte, test_labels);
  row.uniform_matches_unweighted = uni.head.weights == plain.head.weights &&
                                   uni.head.biases == plain.head.biases && uni.trace == plain.trace;
  return row;
}

inline std::vector<CorrectionRow> run_correction_experiment(const SynthConfig& cfg, const CorrectionOptions& opt,
                                                            const std::vector<std::uint64_t>& seeds,
                                                            std::size_t jobs = 1) {
  std::vector<CorrectionRow> out(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t i) {
    SynthConfig c = cfg;
    c.seed = seeds[i];
    out[i] = run_correction_world(generate_world(c), opt);
  });
  return out;
}

}  // namespace lgcav
