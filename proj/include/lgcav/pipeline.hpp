#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "lgcav/cavtrain.hpp"
#include "lgcav/concepts.hpp"
#include "lgcav/correction.hpp"
#include "lgcav/embedstore.hpp"
#include "lgcav/error.hpp"
#include "lgcav/metrics.hpp"
#include "lgcav/numerics.hpp"
#include "lgcav/parallel.hpp"
#include "lgcav/synthbench.hpp"

namespace lgcav {

enum class Command { train, eval, correct, synth, sweep, probes };

inline std::string to_string(Command c) {
  switch (c) {
    case Command::train: return "train";
    case Command::eval: return "eval";
    case Command::correct: return "correct";
    case Command::synth: return "synth";
    case Command::sweep: return "sweep";
    case Command::probes: return "probes";
  }
  return "train";
}

struct SweepGrid {
  std::vector<ProbeStrategy> strategies{ProbeStrategy::activation, ProbeStrategy::random};
  std::vector<std::size_t> probe_counts{250, 500, 1000};
  std::vector<double> lambdas{1.0};
};

struct CorrectionConfig {
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  std::size_t batch = 0;
  std::map<std::string, std::string> class_concepts;  // class name -> concept name
};

// Declarative run configuration. Paths are stored as written and resolved
// against the config file's directory.
struct RunConfig {
  fs::path base_dir;
  std::string target_features, vl_features, manifest, concepts, head, similarity, pairs;
  CavMode mode = CavMode::combined;
  bool gaussian_alignment = true;
  bool concept_ensemble = true;
  bool sample_reweighting = true;
  std::size_t probe_count = 1000;  // |R|
  ProbeStrategy probe_strategy = ProbeStrategy::activation;
  std::size_t samples = 10;  // positives and negatives per concept, 0 = all listed
  double epsilon = 0.6;
  double lambda = 1.0;
  std::size_t pairwise_cap = kDefaultPairCap;
  SgdConfig sgd{1e-3, 10, 0, 0};
  std::size_t recall_k = 0;
  std::vector<std::string> metrics;  // empty = every metric the inputs allow
  CorrectionConfig correction;
  std::vector<std::uint64_t> seeds{0};
  std::string output = "out";
  std::size_t jobs = 0;  // 0 = hardware concurrency
  SweepGrid sweep;
  SynthConfig synth;

  fs::path resolve(const std::string& p) const {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
  fs::path out_dir() const { return resolve(output); }
  std::size_t worker_count() const { return jobs == 0 ? default_jobs() : jobs; }
  bool wants(const std::string& metric) const {
    return metrics.empty() || std::find(metrics.begin(), metrics.end(), metric) != metrics.end();
  }
  bool requested(const std::string& metric) const {
    return std::find(metrics.begin(), metrics.end(), metric) != metrics.end();
  }
};

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"concept_accuracy", "concept_to_class", "tcav_score", "recall_at_k"};
  return names;
}

inline json synth_to_json(const SynthConfig& s) {
  return json{{"d_target", s.d_target},
              {"d_vl", s.d_vl},
              {"n_images", s.n_images},
              {"n_concepts", s.n_concepts},
              {"noise", s.noise},
              {"concept_strength", s.concept_strength},
              {"seed", s.seed},
              {"off_concept", s.off_concept},
              {"shared_tilt", s.shared_tilt},
              {"nuisance_dims", s.nuisance_dims},
              {"nuisance_sd", s.nuisance_sd},
              {"isotropic_sd", s.isotropic_sd},
              {"vl_multiplicative", s.vl_multiplicative},
              {"vl_additive", s.vl_additive},
              {"modality_gap", s.modality_gap},
              {"n_prompts", s.n_prompts},
              {"prompt_noise", s.prompt_noise},
              {"pool_fraction", s.pool_fraction},
              {"train_fraction", s.train_fraction},
              {"background_fraction", s.background_fraction},
              {"spurious", s.spurious},
              {"spurious_class", s.spurious_class},
              {"spurious_scale", s.spurious_scale},
              {"p_spurious_in", s.p_spurious_in},
              {"p_spurious_out", s.p_spurious_out},
              {"p_spurious_test", s.p_spurious_test},
              {"p_context_only", s.p_context_only},
              {"head_epochs", s.head_epochs},
              {"head_learning_rate", s.head_learning_rate}};
}

inline json to_json(const RunConfig& c) {
  json strategies = json::array();
  for (auto s : c.sweep.strategies) strategies.push_back(to_string(s));
  return json{{"target_features", c.target_features},
              {"vl_features", c.vl_features},
              {"manifest", c.manifest},
              {"concepts", c.concepts},
              {"head", c.head},
              {"similarity", c.similarity},
              {"pairs", c.pairs},
              {"mode", to_string(c.mode)},
              {"gaussian_alignment", c.gaussian_alignment},
              {"concept_ensemble", c.concept_ensemble},
              {"sample_reweighting", c.sample_reweighting},
              {"probes", {{"count", c.probe_count}, {"strategy", to_string(c.probe_strategy)}}},
              {"samples", c.samples},
              {"epsilon", c.epsilon},
              {"lambda", c.lambda},
              {"pairwise_cap", c.pairwise_cap},
              {"sgd", {{"learning_rate", c.sgd.learning_rate}, {"epochs", c.sgd.epochs}, {"batch", c.sgd.batch}}},
              {"recall_k", c.recall_k},
              {"metrics", c.metrics},
              {"correction",
               {{"epochs", c.correction.epochs},
                {"learning_rate", c.correction.learning_rate},
                {"batch", c.correction.batch},
                {"class_concepts", c.correction.class_concepts}}},
              {"seeds", c.seeds},
              {"output", c.output},
              {"sweep",
               {{"strategies", strategies}, {"probe_counts", c.sweep.probe_counts}, {"lambdas", c.sweep.lambdas}}},
              {"synth", synth_to_json(c.synth)}};
}

namespace detail {

// Reads typed keys from a JSON object, collecting every problem.
class ConfigReader {
 public:
  ConfigReader(const json& j, std::string prefix, std::vector<std::string>& errors)
      : j_(j), prefix_(std::move(prefix)), errors_(errors) {
    if (!j_.is_object()) errors_.push_back(where("") + "must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.is_object() || !j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      errors_.push_back(where(key) + "has the wrong type");
    }
  }

  const json* child(const char* key) {
    if (!j_.is_object() || !j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  void error(const char* key, const std::string& msg) { errors_.push_back(where(key) + msg); }

  void reject_unknown() {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) errors_.push_back(where(k.c_str()) + "is not a recognized key");
  }

  std::string where(const std::string& key) const {
    const std::string full = prefix_.empty() ? key : key.empty() ? prefix_ : prefix_ + "." + key;
    return full.empty() ? "config " : "'" + full + "' ";
  }

 private:
  const json& j_;
  std::string prefix_;
  std::vector<std::string>& errors_;
  std::set<std::string, std::less<>> seen_;
};

inline std::string join_errors(const std::vector<std::string>& errors) {
  std::string msg = std::to_string(errors.size()) + " config error" + (errors.size() == 1 ? "" : "s") + ":";
  for (const auto& e : errors) msg += "\n  - " + e;
  return msg;
}

inline void read_synth(const json& j, SynthConfig& s, std::vector<std::string>& errors) {
  ConfigReader r(j, "synth", errors);
  r.get("d_target", s.d_target);
  r.get("d_vl", s.d_vl);
  r.get("n_images", s.n_images);
  r.get("n_concepts", s.n_concepts);
  r.get("noise", s.noise);
  r.get("concept_strength", s.concept_strength);
  r.get("seed", s.seed);
  r.get("off_concept", s.off_concept);
  r.get("shared_tilt", s.shared_tilt);
  r.get("nuisance_dims", s.nuisance_dims);
  r.get("nuisance_sd", s.nuisance_sd);
  r.get("isotropic_sd", s.isotropic_sd);
  r.get("vl_multiplicative", s.vl_multiplicative);
  r.get("vl_additive", s.vl_additive);
  r.get("modality_gap", s.modality_gap);
  r.get("n_prompts", s.n_prompts);
  r.get("prompt_noise", s.prompt_noise);
  r.get("pool_fraction", s.pool_fraction);
  r.get("train_fraction", s.train_fraction);
  r.get("background_fraction", s.background_fraction);
  r.get("spurious", s.spurious);
  r.get("spurious_class", s.spurious_class);
  r.get("spurious_scale", s.spurious_scale);
  r.get("p_spurious_in", s.p_spurious_in);
  r.get("p_spurious_out", s.p_spurious_out);
  r.get("p_spurious_test", s.p_spurious_test);
  r.get("p_context_only", s.p_context_only);
  r.get("head_epochs", s.head_epochs);
  r.get("head_learning_rate", s.head_learning_rate);
  r.reject_unknown();
  try {
    s.validate();
  } catch (const Error& e) {
    errors.push_back(e.what());
  }
}

}  // namespace detail

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
};

// Parses and validates for `cmd`; all problems are reported together.
inline RunConfig parse_run_config(const json& j, const fs::path& base_dir, Command cmd,
                                  const CliOverrides& ov = {}) {
  std::vector<std::string> errors;
  RunConfig c;
  c.base_dir = base_dir;
  detail::ConfigReader r(j, "", errors);
  r.get("target_features", c.target_features);
  r.get("vl_features", c.vl_features);
  r.get("manifest", c.manifest);
  r.get("concepts", c.concepts);
  r.get("head", c.head);
  r.get("similarity", c.similarity);
  r.get("pairs", c.pairs);
  std::string mode = to_string(c.mode);
  r.get("mode", mode);
  try {
    c.mode = parse_cav_mode(mode);
  } catch (const Error& e) {
    r.error("mode", e.what());
  }
  r.get("gaussian_alignment", c.gaussian_alignment);
  r.get("concept_ensemble", c.concept_ensemble);
  r.get("sample_reweighting", c.sample_reweighting);
  if (const json* p = r.child("probes")) {
    detail::ConfigReader pr(*p, "probes", errors);
    pr.get("count", c.probe_count);
    std::string st = to_string(c.probe_strategy);
    pr.get("strategy", st);
    try {
      c.probe_strategy = parse_probe_strategy(st);
    } catch (const Error& e) {
      pr.error("strategy", e.what());
    }
    pr.reject_unknown();
  }
  r.get("samples", c.samples);
  r.get("epsilon", c.epsilon);
  r.get("lambda", c.lambda);
  r.get("pairwise_cap", c.pairwise_cap);
  if (const json* p = r.child("sgd")) {
    detail::ConfigReader sr(*p, "sgd", errors);
    sr.get("learning_rate", c.sgd.learning_rate);
    sr.get("epochs", c.sgd.epochs);
    sr.get("batch", c.sgd.batch);
    sr.reject_unknown();
  }
  r.get("recall_k", c.recall_k);
  r.get("metrics", c.metrics);
  if (const json* p = r.child("correction")) {
    detail::ConfigReader cr(*p, "correction", errors);
    cr.get("epochs", c.correction.epochs);
    cr.get("learning_rate", c.correction.learning_rate);
    cr.get("batch", c.correction.batch);
    cr.get("class_concepts", c.correction.class_concepts);
    cr.reject_unknown();
  }
  r.get("seeds", c.seeds);
  r.get("output", c.output);
  r.get("jobs", c.jobs);
  if (const json* p = r.child("sweep")) {
    detail::ConfigReader wr(*p, "sweep", errors);
    std::vector<std::string> st;
    wr.get("strategies", st);
    if (!st.empty()) {
      c.sweep.strategies.clear();
      for (const auto& s : st) {
        try {
          c.sweep.strategies.push_back(parse_probe_strategy(s));
        } catch (const Error& e) {
          wr.error("strategies", e.what());
        }
      }
    }
    wr.get("probe_counts", c.sweep.probe_counts);
    wr.get("lambdas", c.sweep.lambdas);
    wr.reject_unknown();
  }
  if (const json* p = r.child("synth")) detail::read_synth(*p, c.synth, errors);
  r.reject_unknown();

  if (ov.seed) {
    c.seeds = {*ov.seed};
    c.synth.seed = *ov.seed;
  }
  if (ov.out) c.output = fs::absolute(*ov.out).lexically_normal().string();
  if (ov.jobs) c.jobs = *ov.jobs;

  // Ranges.
  if (c.sgd.learning_rate <= 0.0) errors.push_back("'sgd.learning_rate' must be > 0");
  if (c.sgd.epochs < 1) errors.push_back("'sgd.epochs' must be >= 1");
  if (c.lambda < 0.0) errors.push_back("'lambda' must be >= 0");
  if (c.epsilon < -1.0 || c.epsilon > 1.0) errors.push_back("'epsilon' must be in [-1, 1]");
  if (c.probe_count < 2 || c.probe_count % 2 != 0) errors.push_back("'probes.count' must be even and >= 2");
  if (c.pairwise_cap < 1) errors.push_back("'pairwise_cap' must be >= 1");
  if (c.seeds.empty()) errors.push_back("'seeds' must list at least one seed");
  if (c.correction.learning_rate <= 0.0) errors.push_back("'correction.learning_rate' must be > 0");
  if (c.output.empty()) errors.push_back("'output' must not be empty");
  for (auto n : c.sweep.probe_counts)
    if (n < 2 || n % 2 != 0) errors.push_back("'sweep.probe_counts' entries must be even and >= 2");
  for (auto l : c.sweep.lambdas)
    if (l < 0.0) errors.push_back("'sweep.lambdas' entries must be >= 0");
  for (const auto& m : c.metrics)
    if (std::find(metric_names().begin(), metric_names().end(), m) == metric_names().end())
      errors.push_back("'metrics' has unknown entry '" + m + "'");
  if (c.requested("recall_at_k") && c.recall_k == 0) errors.push_back("'metrics' requests recall_at_k but 'recall_k' is 0");
  if (cmd == Command::sweep && (c.sweep.strategies.empty() || c.sweep.probe_counts.empty() || c.sweep.lambdas.empty()))
    errors.push_back("'sweep' grid must have at least one strategy, probe count and lambda");

  // Inputs each command needs.
  auto need = [&](const std::string& value, const char* key) {
    if (value.empty()) {
      errors.push_back(std::string("'") + key + "' is required for " + to_string(cmd));
    } else if (!fs::exists(c.resolve(value))) {
      errors.push_back(std::string("'") + key + "' file not found: " + c.resolve(value).string());
    }
  };
  auto optional_file = [&](const std::string& value, const char* key) {
    if (!value.empty() && !fs::exists(c.resolve(value)))
      errors.push_back(std::string("'") + key + "' file not found: " + c.resolve(value).string());
  };
  if (cmd != Command::synth) {
    need(c.target_features, "target_features");
    need(c.manifest, "manifest");
    need(c.concepts, "concepts");
    if (cmd != Command::eval) need(c.vl_features, "vl_features");
    optional_file(c.similarity, "similarity");
    optional_file(c.pairs, "pairs");
    for (const char* m : {"concept_to_class", "tcav_score"}) {
      if (!c.requested(m)) continue;
      if (c.similarity.empty() && c.pairs.empty())
        errors.push_back(std::string("'metrics' requests ") + m +
                         ", which needs concept-class pairs: set 'similarity' (concepts x classes matrix) or 'pairs'");
      if (c.head.empty()) errors.push_back(std::string("'metrics' requests ") + m + ", which needs 'head'");
    }
    if (cmd == Command::correct) {
      need(c.head, "head");
      if (c.correction.class_concepts.empty() && c.similarity.empty() && c.pairs.empty())
        errors.push_back("correct needs 'correction.class_concepts', 'pairs' or 'similarity' to map classes to concepts");
    } else {
      optional_file(c.head, "head");
    }
  }
  if (!errors.empty()) fail(Errc::config, detail::join_errors(errors));
  return c;
}

inline RunConfig load_run_config(const fs::path& path, Command cmd, const CliOverrides& ov = {}) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const Error& e) {
    fail(Errc::config, e.what());
  }
  const json j = json::parse(text, nullptr, false);
  require(!j.is_discarded(), Errc::config, "config '" + path.string() + "' is not valid JSON");
  return parse_run_config(j, fs::absolute(path).parent_path(), cmd, ov);
}

// ---------------------------------------------------------------------------
// Reporting helpers

inline std::string fmt(double x, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& x, int prec = 4) { return x ? fmt(*x, prec) : "-"; }

// Left-aligned first column, right-aligned others.
inline std::string format_table(const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto grow = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  };
  grow(header);
  for (const auto& r : rows) grow(r);
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < width.size(); ++i) {
      const std::string cell = i < r.size() ? r[i] : "";
      const std::string pad(width[i] - cell.size(), ' ');
      if (i) os << "  ";
      os << (i == 0 ? cell + pad : pad + cell);
    }
    os << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : rows) line(r);
  return os.str();
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  m.n = xs.size();
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (double x : xs) m.std += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(m.std / static_cast<double>(xs.size()));
  return m;
}

inline json to_json(const MeanStd& m) { return json{{"mean", m.mean}, {"std", m.std}, {"n", m.n}}; }

inline std::string fmt_ms(const MeanStd& m) { return m.n ? fmt(m.mean) + " +- " + fmt(m.std) : "-"; }

struct CommandResult {
  json report;
  std::string table;
};

// All report files go through here, on the calling thread.
inline void write_report(const RunConfig& cfg, Command cmd, const CommandResult& res) {
  const fs::path dir = cfg.out_dir();
  write_json(dir / (to_string(cmd) + "_report.json"), res.report);
  detail::write_file(dir / (to_string(cmd) + "_report.txt"), res.table);
}

// ---------------------------------------------------------------------------
// Workspace: loaded inputs shared read-only by all workers.

struct Workspace {
  EmbeddingMatrix target;
  std::optional<EmbeddingMatrix> vl;
  DatasetManifest manifest;
  std::vector<ConceptSpec> concepts;
  std::optional<LinearHead> head;
  std::optional<Matrix> similarity;  // concepts x classes, concept order
  std::optional<PairSet> pairs;
  std::vector<std::string> warnings;

  std::vector<std::string> concept_names() const {
    std::vector<std::string> out;
    for (const auto& c : concepts) out.push_back(c.name);
    return out;
  }
};

inline Workspace load_workspace(const RunConfig& cfg, bool need_vl) {
  Workspace ws;
  ws.target = load_matrix(cfg.resolve(cfg.target_features));
  if (need_vl || !cfg.vl_features.empty()) ws.vl = load_matrix(cfg.resolve(cfg.vl_features));
  ws.manifest = load_manifest(cfg.resolve(cfg.manifest));
  ws.concepts = load_concepts(cfg.resolve(cfg.concepts));
  require(!ws.concepts.empty(), Errc::invalid_argument, "concepts file lists no concepts");
  if (ws.vl)
    for (const auto& c : ws.concepts)
      require(c.prompts.cols() == ws.vl->cols(), Errc::shape_mismatch,
              "concept '" + c.name + "' prompt dim " + std::to_string(c.prompts.cols()) +
                  " != VL feature dim " + std::to_string(ws.vl->cols()));
  if (!cfg.head.empty()) {
    ws.head = load_head(cfg.resolve(cfg.head));
    require(ws.head->num_classes() == ws.manifest.num_classes(), Errc::shape_mismatch,
            "head has " + std::to_string(ws.head->num_classes()) + " classes, manifest " +
                std::to_string(ws.manifest.num_classes()));
    require(ws.head->weights.cols() == ws.target.cols(), Errc::shape_mismatch,
            "head input dim differs from target feature dim");
  }
  const auto names = ws.concept_names();
  if (!cfg.similarity.empty()) {
    const EmbeddingMatrix sim = load_matrix(cfg.resolve(cfg.similarity));
    require(sim.cols() == ws.manifest.num_classes(), Errc::shape_mismatch,
            "similarity matrix columns differ from the class count");
    // Rows follow concept names when the sidecar names them, else concept order.
    bool by_name = true;
    for (const auto& n : names) by_name = by_name && sim.find(n).has_value();
    if (by_name) {
      ws.similarity = sim.gather(names);
    } else {
      require(sim.rows() == ws.concepts.size(), Errc::shape_mismatch,
              "similarity matrix has " + std::to_string(sim.rows()) + " rows for " +
                  std::to_string(ws.concepts.size()) + " concepts");
      ws.similarity = sim.matrix();
    }
  }
  const std::unordered_set<std::string> name_set(names.begin(), names.end());
  if (!cfg.pairs.empty()) {
    ws.pairs = load_pairs(cfg.resolve(cfg.pairs));
  } else if (ws.similarity) {
    ws.pairs = build_pair_set(*ws.similarity, names, cfg.epsilon);
  }
  if (ws.pairs) ws.pairs->validate(ws.manifest.num_classes(), name_set);
  return ws;
}

inline std::string concept_slug(std::size_t index, const std::string& name) {
  std::string s = std::to_string(index) + "_";
  for (unsigned char ch : name) s += (std::isalnum(ch) || ch == '-' || ch == '_') ? static_cast<char>(ch) : '_';
  return s;
}

inline fs::path cav_path(const RunConfig& cfg, std::uint64_t seed, std::size_t index, const std::string& name) {
  return cfg.out_dir() / "cavs" / ("seed-" + std::to_string(seed)) / (concept_slug(index, name) + ".json");
}

inline std::uint64_t concept_seed(std::uint64_t seed, std::size_t index) {
  return detail::mix_seed(seed, 0x1000 + index);
}

inline std::vector<std::string> first_n(const std::vector<std::string>& v, std::size_t n) {
  if (n == 0 || n >= v.size()) return v;
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)};
}

inline Vector concept_text(const RunConfig& cfg, const ConceptSpec& c) {
  if (cfg.concept_ensemble) return concept_ensemble(c.prompts);
  return Vector(c.prompts.row(0).begin(), c.prompts.row(0).end());
}

inline ProbeSet choose_probes(const RunConfig& cfg, const Workspace& ws, const ConceptSpec& c, std::size_t index,
                              std::uint64_t seed, ProbeStrategy strategy, std::size_t count) {
  const auto pool = ws.manifest.ids_in(Split::probe_pool);
  if (strategy == ProbeStrategy::random)
    return random_probes(ws.target, *ws.vl, pool, count / 2, detail::mix_seed(seed, 0x2000 + index));
  return select_probes(ws.target, *ws.vl, concept_text(cfg, c), pool, count / 2);
}

struct TrainedConcept {
  Cav cav;
  json info;
};

inline TrainedConcept train_concept(const RunConfig& cfg, const Workspace& ws, std::size_t index, std::uint64_t seed,
                                    ProbeStrategy strategy, std::size_t probe_count, double lambda) {
  const ConceptSpec& c = ws.concepts[index];
  CavTrainData data;
  data.concept_name = c.name;
  const auto pos = first_n(c.positives, cfg.samples);
  const auto neg = first_n(c.negatives, cfg.samples);
  json info{{"concept", c.name}, {"positives", pos.size()}, {"negatives", neg.size()}};
  if (cfg.mode != CavMode::lg) {
    require(!pos.empty() && !neg.empty(), Errc::invalid_argument,
            "concept '" + c.name + "' needs positives and negatives for mode " + to_string(cfg.mode));
    data.positives = ws.target.gather(pos);
    data.negatives = ws.target.gather(neg);
  }
  if (cfg.mode != CavMode::original) {
    require(ws.vl.has_value(), Errc::invalid_argument, "VL features required for mode " + to_string(cfg.mode));
    const ProbeSet probe = choose_probes(cfg, ws, c, index, seed, strategy, probe_count);
    std::optional<GaussianParams> stats;
    json ga = nullptr;
    if (cfg.gaussian_alignment) {
      const auto est = target_activation_population(ws.target, probe, cfg.pairwise_cap, seed);
      require(!est.degenerate, Errc::degenerate,
              "concept '" + c.name + "': probe target features have zero pairwise-cosine spread");
      stats = est.params;
      ga = json{{"target_mu", est.params.mu}, {"target_sigma", est.params.sigma}, {"pairs", est.count}};
    }
    const bool dsr = cfg.sample_reweighting && pos.size() >= 2;
    auto [plan, pinfo] = build_lg_plan(ws.target, *ws.vl, concept_text(cfg, c), probe, stats,
                                       dsr ? &pos : nullptr, lambda);
    if (!ga.is_null()) {
      ga["vl_mu"] = pinfo.vl.mu;
      ga["vl_sigma"] = pinfo.vl.sigma;
    }
    info["probes"] = probe.size();
    info["gaussian_alignment"] = ga;
    info["reweighted"] = pinfo.reweighted;
    data.lg = std::move(plan);
  }
  SgdConfig sgd = cfg.sgd;
  sgd.seed = concept_seed(seed, index);
  Cav cav = train_cav(cfg.mode, data, sgd);
  info["final_loss"] = cav.trace.empty() ? json(nullptr) : json(cav.trace.back());
  info["bias"] = cav.bias ? json(*cav.bias) : json(nullptr);
  info["norm"] = norm(cav.vector);
  info["rejitter_events"] = cav.rejitter_epochs.size();
  return {std::move(cav), std::move(info)};
}

// ---------------------------------------------------------------------------
// Commands

inline CommandResult cmd_train(const RunConfig& cfg) {
  const Workspace ws = load_workspace(cfg, cfg.mode != CavMode::original);
  const std::size_t nc = ws.concepts.size();
  json runs = json::array();
  std::vector<std::vector<double>> losses(nc);
  for (std::uint64_t seed : cfg.seeds) {
    std::vector<TrainedConcept> out(nc);
    parallel_for(nc, cfg.worker_count(), [&](std::size_t i) {
      out[i] = train_concept(cfg, ws, i, seed, cfg.probe_strategy, cfg.probe_count, cfg.lambda);
    });
    json per = json::array();
    for (std::size_t i = 0; i < nc; ++i) {
      const fs::path p = cav_path(cfg, seed, i, ws.concepts[i].name);
      save_cav(out[i].cav, p);
      out[i].info["file"] = fs::relative(p, cfg.out_dir()).generic_string();
      if (!out[i].cav.trace.empty()) losses[i].push_back(out[i].cav.trace.back());
      per.push_back(std::move(out[i].info));
    }
    runs.push_back({{"seed", seed}, {"concepts", std::move(per)}});
  }
  json summary = json::array();
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < nc; ++i) {
    const MeanStd m = mean_std(losses[i]);
    summary.push_back({{"concept", ws.concepts[i].name}, {"final_loss", to_json(m)}});
    rows.push_back({ws.concepts[i].name, to_string(cfg.mode), fmt_ms(m)});
  }
  CommandResult res;
  res.report = json{{"command", "train"}, {"config", to_json(cfg)}, {"runs", std::move(runs)},
                    {"summary", std::move(summary)}, {"warnings", ws.warnings}};
  res.table = format_table({"concept", "mode", "final loss (mean +- std)"}, rows);
  return res;
}

inline std::map<std::string, Cav> load_cavs(const RunConfig& cfg, const Workspace& ws, std::uint64_t seed) {
  std::map<std::string, Cav> out;
  for (std::size_t i = 0; i < ws.concepts.size(); ++i) {
    const fs::path p = cav_path(cfg, seed, i, ws.concepts[i].name);
    require(fs::exists(p), Errc::io, "missing CAV '" + p.string() + "' (run train first)");
    out.emplace(ws.concepts[i].name, load_cav(p));
  }
  return out;
}

// Evaluation of a set of CAVs; warnings are appended to `warnings`.
inline MetricReport evaluate_cavs(const RunConfig& cfg, const Workspace& ws, const std::map<std::string, Cav>& cavs,
                                  std::vector<std::string>* warnings) {
  auto warn = [&](const std::string& w) {
    if (warnings && std::find(warnings->begin(), warnings->end(), w) == warnings->end()) warnings->push_back(w);
  };
  MetricReport rep;
  rep.recall_k = cfg.recall_k;
  std::optional<EmbeddingMatrix> test_feats;
  if (cfg.recall_k > 0 && cfg.wants("recall_at_k")) {
    const auto ids = ws.manifest.ids_in(Split::test);
    test_feats = EmbeddingMatrix(ws.target.gather(ids), ids);
  }
  for (const auto& c : ws.concepts) {
    const Cav& cav = cavs.at(c.name);
    ConceptMetrics m;
    m.concept_name = c.name;
    if (!cfg.wants("concept_accuracy")) {
    } else if (!c.test_positives.empty() && !c.test_negatives.empty()) {
      const auto pos = first_n(c.positives, cfg.samples);
      const auto neg = first_n(c.negatives, cfg.samples);
      if (!cav.bias && (pos.empty() || neg.empty())) {
        warn("concept '" + c.name + "': no training positives/negatives to fit a threshold; accuracy omitted");
      } else {
        const auto r = concept_accuracy(cav, ws.target.gather(c.test_positives), ws.target.gather(c.test_negatives),
                                        cav.bias ? Matrix{} : ws.target.gather(pos),
                                        cav.bias ? Matrix{} : ws.target.gather(neg));
        m.accuracy = r.accuracy;
        m.threshold_fitted = r.threshold_fitted;
      }
    } else {
      warn("concept '" + c.name + "': no test_positives/test_negatives; accuracy omitted");
    }
    if (test_feats) {
      if (c.test_positives.empty()) {
        warn("concept '" + c.name + "': no test_positives; recall omitted");
      } else {
        m.recall = recall_at_k(cav.vector, *test_feats, c.test_positives, std::min(cfg.recall_k, test_feats->rows()));
      }
    }
    rep.concepts.push_back(std::move(m));
  }
  if (!cfg.wants("concept_to_class") && !cfg.wants("tcav_score")) {
  } else if (!ws.pairs) {
    warn("no pairs or similarity matrix: concept_to_class and tcav_score omitted");
  } else if (!ws.head) {
    warn("no head: concept_to_class and tcav_score omitted");
  } else if (ws.pairs->pairs.empty()) {
    warn("pair set is empty: concept_to_class and tcav_score omitted");
  } else {
    for (const auto& p : ws.pairs->pairs) {
      const auto& v = cavs.at(p.concept_name).vector;
      const double cs = concept_to_class(v, *ws.head, p.class_index);
      rep.pairs.push_back({p.concept_name, p.class_index, cs, dot(v, ws.head->weights.row(p.class_index)) > 0.0});
    }
  }
  return rep;
}

inline CommandResult cmd_eval(const RunConfig& cfg) {
  const Workspace ws = load_workspace(cfg, false);
  std::vector<std::string> warnings = ws.warnings;
  json per_seed = json::array();
  std::vector<double> acc, c2c, tcav, rec;
  std::vector<std::vector<std::string>> rows;
  for (std::uint64_t seed : cfg.seeds) {
    const auto cavs = load_cavs(cfg, ws, seed);
    const MetricReport rep = evaluate_cavs(cfg, ws, cavs, &warnings);
    if (auto x = rep.concept_accuracy()) acc.push_back(*x);
    if (auto x = rep.concept_to_class()) c2c.push_back(*x);
    if (auto x = rep.tcav_score()) tcav.push_back(*x);
    if (auto x = rep.recall_at_k()) rec.push_back(*x);
    rows.push_back({"seed " + std::to_string(seed), fmt_opt(rep.concept_accuracy()), fmt_opt(rep.concept_to_class()),
                    fmt_opt(rep.tcav_score()), fmt_opt(rep.recall_at_k())});
    per_seed.push_back({{"seed", seed}, {"metrics", rep.to_json()}});
  }
  json summary = json::object();
  auto put = [&](const char* key, const std::vector<double>& xs) {
    summary[key] = xs.empty() ? json(nullptr) : to_json(mean_std(xs));
  };
  put("concept_accuracy", acc);
  put("concept_to_class", c2c);
  put("tcav_score", tcav);
  put("recall_at_k", rec);
  rows.push_back({"mean +- std", fmt_ms(mean_std(acc)), fmt_ms(mean_std(c2c)), fmt_ms(mean_std(tcav)),
                  fmt_ms(mean_std(rec))});
  CommandResult res;
  res.report = json{{"command", "eval"}, {"config", to_json(cfg)}, {"seeds", std::move(per_seed)},
                    {"summary", std::move(summary)}, {"warnings", warnings}};
  res.table = format_table({"run", "concept acc", "concept-to-class", "tcav", "recall@k"}, rows);
  for (const auto& w : warnings) res.table += "warning: " + w + "\n";
  return res;
}

// Class index -> concept name used for ASR weights.
inline std::map<std::size_t, std::string> class_concept_map(const RunConfig& cfg, const Workspace& ws) {
  std::map<std::size_t, std::string> out;
  const auto& names = ws.manifest.class_names;
  const auto cnames = ws.concept_names();
  if (!cfg.correction.class_concepts.empty()) {
    for (const auto& [cls, concept_name] : cfg.correction.class_concepts) {
      const auto it = std::find(names.begin(), names.end(), cls);
      require(it != names.end(), Errc::config, "correction.class_concepts: unknown class '" + cls + "'");
      require(std::find(cnames.begin(), cnames.end(), concept_name) != cnames.end(), Errc::config,
              "correction.class_concepts: unknown concept '" + concept_name + "'");
      out[static_cast<std::size_t>(it - names.begin())] = concept_name;
    }
    return out;
  }
  if (!ws.pairs) return out;
  // Highest-similarity paired concept per class, else the first pair listed.
  std::map<std::size_t, double> best;
  for (const auto& p : ws.pairs->pairs) {
    double s = 0.0;
    if (ws.similarity) {
      const auto ci = static_cast<std::size_t>(std::find(cnames.begin(), cnames.end(), p.concept_name) - cnames.begin());
      s = (*ws.similarity)(ci, p.class_index);
    }
    if (!out.count(p.class_index) || s > best[p.class_index]) {
      out[p.class_index] = p.concept_name;
      best[p.class_index] = s;
    }
  }
  return out;
}

inline json confusion_to_json(const ConfusionMatrix& m) { return json(m); }

inline CommandResult cmd_correct(const RunConfig& cfg) {
  const Workspace ws = load_workspace(cfg, false);
  const auto mapping = class_concept_map(cfg, ws);
  std::vector<std::string> warnings = ws.warnings;
  if (mapping.empty()) warnings.push_back("no class has a related concept; fine-tuning uses uniform weights");
  const auto [train_ids, train_labels] = ws.manifest.labeled(Split::train);
  const auto [test_ids, test_labels] = ws.manifest.labeled(Split::test);
  require(!train_ids.empty(), Errc::invalid_argument, "manifest has no labeled train items");
  require(!test_ids.empty(), Errc::invalid_argument, "manifest has no labeled test items");
  const Matrix Xtr = ws.target.gather(train_ids);
  const Matrix Xte = ws.target.gather(test_ids);
  const LinearHead& head = *ws.head;
  const double before = head_accuracy(head, Xte, test_labels);
  const ConfusionMatrix conf_before = confusion_matrix(head, Xte, test_labels);

  json per_seed = json::array();
  std::vector<double> after_all;
  std::vector<std::vector<std::string>> rows;
  for (std::uint64_t seed : cfg.seeds) {
    const auto cavs = load_cavs(cfg, ws, seed);
    AsrPlan plan;
    plan.epochs = cfg.correction.epochs;
    plan.learning_rate = cfg.correction.learning_rate;
    plan.batch = cfg.correction.batch;
    plan.seed = seed;
    std::vector<std::size_t> classes;
    for (const auto& [k, _] : mapping) classes.push_back(k);
    std::vector<AsrPlan::ClassWeights> cw(classes.size());
    parallel_for(classes.size(), cfg.worker_count(), [&](std::size_t i) {
      const std::size_t k = classes[i];
      cw[i].concept_name = mapping.at(k);
      for (std::size_t j = 0; j < train_ids.size(); ++j)
        if (train_labels[j] == k) cw[i].items.push_back(train_ids[j]);
      if (!cw[i].items.empty()) cw[i].weights = asr_weights(cavs.at(cw[i].concept_name).vector, ws.target, cw[i].items);
    });
    json classes_json = json::array();
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (cw[i].items.empty()) continue;
      const auto [lo, hi] = std::minmax_element(cw[i].weights.begin(), cw[i].weights.end());
      classes_json.push_back({{"class", ws.manifest.class_names[classes[i]]},
                              {"concept", cw[i].concept_name},
                              {"images", cw[i].items.size()},
                              {"weight_min", *lo},
                              {"weight_max", *hi}});
      plan.classes[classes[i]] = std::move(cw[i]);
    }
    const HeadTrainResult tuned = fine_tune_head(head, Xtr, train_labels, train_ids, plan);
    const double after = head_accuracy(tuned.head, Xte, test_labels);
    after_all.push_back(after);
    const ConfusionMatrix conf_after = confusion_matrix(tuned.head, Xte, test_labels);

    json prompts = json::array();
    for (std::size_t k = 0; k < conf_after.size(); ++k) {
      std::size_t off = 0;
      for (std::size_t j = 0; j < conf_after[k].size(); ++j)
        if (j != k) off += conf_after[k][j];
      if (off == 0) continue;
      const std::size_t kc = confused_class(conf_after, k);
      prompts.push_back({{"class", ws.manifest.class_names[k]},
                         {"confused_with", ws.manifest.class_names[kc]},
                         {"prompt", confused_prompt(ws.manifest.class_names, k, kc)}});
    }

    LinearHead out_head = tuned.head;
    out_head.provenance = json{{"command", "correct"}, {"seed", seed}, {"epochs", plan.epochs},
                               {"learning_rate", plan.learning_rate}, {"base_head", cfg.head}};
    const fs::path hp = cfg.out_dir() / "heads" / ("seed-" + std::to_string(seed)) / "head.json";
    save_head(out_head, hp);
    per_seed.push_back({{"seed", seed},
                        {"accuracy_after", after},
                        {"trace", tuned.trace},
                        {"classes", std::move(classes_json)},
                        {"confusion_after", confusion_to_json(conf_after)},
                        {"confused_prompts", std::move(prompts)},
                        {"head", fs::relative(hp, cfg.out_dir()).generic_string()}});
    rows.push_back({"seed " + std::to_string(seed), fmt(before), fmt(after), fmt(after - before)});
  }
  const MeanStd ms = mean_std(after_all);
  rows.push_back({"mean +- std", fmt(before), fmt_ms(ms), fmt(ms.mean - before)});
  CommandResult res;
  res.report = json{{"command", "correct"},
                    {"config", to_json(cfg)},
                    {"accuracy_before", before},
                    {"confusion_before", confusion_to_json(conf_before)},
                    {"seeds", std::move(per_seed)},
                    {"summary", {{"accuracy_after", to_json(ms)}, {"delta", ms.mean - before}}},
                    {"warnings", warnings}};
  res.table = format_table({"run", "acc before", "acc after", "delta"}, rows);
  for (const auto& w : warnings) res.table += "warning: " + w + "\n";
  return res;
}

// Writes a synthetic world in the standard formats plus a run config that
// points at it.
inline CommandResult cmd_synth(const RunConfig& cfg, const json& raw_config = json::object()) {
  const SynthConfig& sc = cfg.synth;
  const SynthWorld w = generate_world(sc);
  const fs::path dir = cfg.out_dir();
  save_matrix(w.target, dir / "target.bin");
  save_matrix(w.vl, dir / "vl.bin");
  save_manifest(w.manifest, dir / "manifest.json");
  save_head(w.head, dir / "head.json");
  save_matrix(EmbeddingMatrix(w.planted, w.concept_names), dir / "truth" / "planted.bin");
  save_matrix(EmbeddingMatrix(w.text_clean, w.concept_names), dir / "truth" / "text_clean.bin");

  // Concept c pairs with class c.
  Matrix sim(sc.n_concepts, sc.n_concepts, 0.1);
  for (std::size_t c = 0; c < sc.n_concepts; ++c) sim(c, c) = 0.9;
  save_matrix(EmbeddingMatrix(sim, w.concept_names), dir / "similarity.bin");

  std::vector<ConceptSpec> specs;
  Rng rng(sc.seed, 0xc0ce);
  for (std::size_t c = 0; c < sc.n_concepts; ++c) {
    ConceptSpec s;
    s.name = w.concept_names[c];
    s.prompts_path = "prompts/" + concept_slug(c, s.name) + ".bin";
    save_matrix(w.prompts[c], dir / s.prompts_path);
    for (const auto& it : w.manifest.items) {
      if (!it.label) continue;
      const bool pos = *it.label == c;
      if (it.split == Split::train) (pos ? s.positives : s.negatives).push_back(it.id);
      if (it.split == Split::test) (pos ? s.test_positives : s.test_negatives).push_back(it.id);
    }
    Rng r = rng.split(c);
    r.shuffle(s.positives);
    r.shuffle(s.negatives);
    r.shuffle(s.test_negatives);
    s.test_negatives.resize(std::min(s.test_negatives.size(), s.test_positives.size()));
    specs.push_back(std::move(s));
  }
  save_concepts(specs, dir / "concepts.json");

  json run = raw_config.is_object() ? raw_config : json::object();
  run.erase("synth");
  run.erase("output");
  run["target_features"] = "target.bin";
  run["vl_features"] = "vl.bin";
  run["manifest"] = "manifest.json";
  run["concepts"] = "concepts.json";
  run["head"] = "head.json";
  run["similarity"] = "similarity.bin";
  run["output"] = "run";
  write_json(dir / "run_config.json", run);

  std::size_t counts[3] = {0, 0, 0};
  for (const auto& it : w.manifest.items) ++counts[static_cast<int>(it.split)];
  CommandResult res;
  res.report = json{{"command", "synth"},
                    {"config", to_json(cfg)},
                    {"world", synth_to_json(sc)},
                    {"splits", {{"train", counts[0]}, {"test", counts[1]}, {"probe-pool", counts[2]}}},
                    {"files", {"target.bin", "vl.bin", "manifest.json", "concepts.json", "head.json", "similarity.bin",
                               "truth/planted.bin", "truth/text_clean.bin", "run_config.json"}}};
  res.table = format_table({"split", "images"}, {{"train", std::to_string(counts[0])},
                                                  {"test", std::to_string(counts[1])},
                                                  {"probe-pool", std::to_string(counts[2])}});
  return res;
}

struct SweepPoint {
  ProbeStrategy strategy;
  std::size_t probes;
  double lambda;
};

// Grid points in declaration order, duplicates removed.
inline std::vector<SweepPoint> sweep_points(const SweepGrid& g) {
  std::vector<SweepPoint> out;
  std::set<std::tuple<int, std::size_t, double>> seen;
  for (auto s : g.strategies)
    for (auto r : g.probe_counts)
      for (auto l : g.lambdas)
        if (seen.insert({static_cast<int>(s), r, l}).second) out.push_back({s, r, l});
  return out;
}

inline CommandResult cmd_sweep(const RunConfig& cfg) {
  const Workspace ws = load_workspace(cfg, true);
  require(cfg.mode != CavMode::original, Errc::config, "sweep needs mode lg or combined (probe and lambda grid)");
  const auto points = sweep_points(cfg.sweep);
  const std::size_t nc = ws.concepts.size();
  std::vector<std::vector<double>> acc(points.size()), c2c(points.size());
  std::vector<std::string> warnings = ws.warnings;
  for (std::uint64_t seed : cfg.seeds) {
    for (std::size_t g = 0; g < points.size(); ++g) {
      std::vector<TrainedConcept> out(nc);
      parallel_for(nc, cfg.worker_count(), [&](std::size_t i) {
        out[i] = train_concept(cfg, ws, i, seed, points[g].strategy, points[g].probes, points[g].lambda);
      });
      std::map<std::string, Cav> cavs;
      for (auto& t : out) cavs.emplace(t.cav.concept_name, std::move(t.cav));
      const MetricReport rep = evaluate_cavs(cfg, ws, cavs, &warnings);
      if (auto x = rep.concept_accuracy()) acc[g].push_back(*x);
      if (auto x = rep.concept_to_class()) c2c[g].push_back(*x);
    }
  }
  std::string csv = "strategy,probes,lambda,concept_accuracy_mean,concept_accuracy_std,concept_to_class_mean,"
                    "concept_to_class_std,seeds\n";
  json grid = json::array();
  std::vector<std::vector<std::string>> rows;
  for (std::size_t g = 0; g < points.size(); ++g) {
    const MeanStd a = mean_std(acc[g]), c = mean_std(c2c[g]);
    auto cell = [](const MeanStd& m, bool sd) { return m.n ? fmt(sd ? m.std : m.mean, 6) : std::string(); };
    csv += to_string(points[g].strategy) + "," + std::to_string(points[g].probes) + "," + fmt(points[g].lambda, 6) +
           "," + cell(a, false) + "," + cell(a, true) + "," + cell(c, false) + "," + cell(c, true) + "," +
           std::to_string(cfg.seeds.size()) + "\n";
    grid.push_back({{"strategy", to_string(points[g].strategy)},
                    {"probes", points[g].probes},
                    {"lambda", points[g].lambda},
                    {"concept_accuracy", a.n ? to_json(a) : json(nullptr)},
                    {"concept_to_class", c.n ? to_json(c) : json(nullptr)}});
    rows.push_back({to_string(points[g].strategy), std::to_string(points[g].probes), fmt(points[g].lambda, 3),
                    fmt_ms(a), fmt_ms(c)});
  }
  detail::write_file(cfg.out_dir() / "sweep.csv", csv);
  CommandResult res;
  res.report = json{{"command", "sweep"}, {"config", to_json(cfg)}, {"grid", std::move(grid)}, {"warnings", warnings}};
  res.table = format_table({"strategy", "|R|", "lambda", "concept acc", "concept-to-class"}, rows);
  for (const auto& w : warnings) res.table += "warning: " + w + "\n";
  return res;
}

inline CommandResult cmd_probes(const RunConfig& cfg) {
  const Workspace ws = load_workspace(cfg, true);
  const std::size_t nc = ws.concepts.size();
  const std::uint64_t seed = cfg.seeds.front();
  std::vector<json> out(nc);
  parallel_for(nc, cfg.worker_count(), [&](std::size_t i) {
    const ProbeSet p = choose_probes(cfg, ws, ws.concepts[i], i, seed, cfg.probe_strategy, cfg.probe_count);
    const Vector act = vl_activations(concept_text(cfg, ws.concepts[i]), *ws.vl, p);
    out[i] = json{{"concept", ws.concepts[i].name}, {"strategy", to_string(cfg.probe_strategy)},
                  {"ids", p.item_ids}, {"activations", act}};
  });
  json summary = json::array();
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < nc; ++i) {
    const fs::path p = cfg.out_dir() / "probes" / (concept_slug(i, ws.concepts[i].name) + ".json");
    write_json(p, out[i]);
    const auto act = out[i]["activations"].get<Vector>();
    const auto est = estimate_gaussian(act);
    summary.push_back({{"concept", ws.concepts[i].name},
                       {"file", fs::relative(p, cfg.out_dir()).generic_string()},
                       {"count", act.size()},
                       {"vl_mu", est.params.mu},
                       {"vl_sigma", est.params.sigma}});
    rows.push_back({ws.concepts[i].name, std::to_string(act.size()), fmt(est.params.mu), fmt(est.params.sigma)});
  }
  CommandResult res;
  res.report = json{{"command", "probes"}, {"config", to_json(cfg)}, {"concepts", std::move(summary)}};
  res.table = format_table({"concept", "|R|", "VL act mean", "VL act std"}, rows);
  return res;
}

inline CommandResult run_command(Command cmd, const RunConfig& cfg, const json& raw_config = json::object()) {
  switch (cmd) {
    case Command::train: return cmd_train(cfg);
    case Command::eval: return cmd_eval(cfg);
    case Command::correct: return cmd_correct(cfg);
    case Command::synth: return cmd_synth(cfg, raw_config);
    case Command::sweep: return cmd_sweep(cfg);
    case Command::probes: return cmd_probes(cfg);
  }
  return {};
}

// CLI exit code for an error class.
inline int exit_code(ErrorClass c) {
  switch (c) {
    case ErrorClass::config: return 2;
    case ErrorClass::data: return 3;
    case ErrorClass::numeric: return 4;
  }
  return 3;
}

}  // namespace lgcav
