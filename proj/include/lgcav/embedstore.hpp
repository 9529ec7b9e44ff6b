#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lgcav/error.hpp"
#include "lgcav/numerics.hpp"

namespace lgcav {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr std::array<char, 4> kMatrixMagic = {'L', 'G', 'C', 'V'};
inline constexpr std::uint32_t kMatrixVersion = 1;
inline constexpr std::size_t kMatrixHeaderBytes = 16;

// Rows of feature vectors keyed by item id.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(Matrix data, std::vector<std::string> ids)
      : data_(std::move(data)), ids_(std::move(ids)) {
    require(ids_.size() == data_.rows(), Errc::shape_mismatch,
            "id count " + std::to_string(ids_.size()) + " != rows " +
                std::to_string(data_.rows()));
    for (std::size_t i = 0; i < data_.rows(); ++i) {
      const auto r = data_.row(i);
      for (std::size_t j = 0; j < r.size(); ++j)
        if (!std::isfinite(r[j])) fail(Errc::non_finite,
                "non-finite value at row " + std::to_string(i) + ", col " +
                    std::to_string(j));
    }
    index_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      const bool fresh = index_.emplace(ids_[i], i).second;
      require(fresh, Errc::duplicate_id, "duplicate item id '" + ids_[i] + "'");
    }
  }

  // Ids default to "0", "1", ...
  explicit EmbeddingMatrix(const Matrix& data)
      : EmbeddingMatrix(data, default_ids(data.rows())) {}

  std::size_t rows() const { return data_.rows(); }
  std::size_t cols() const { return data_.cols(); }
  const Matrix& matrix() const { return data_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> row(std::size_t i) const { return data_.row(i); }

  std::optional<std::size_t> find(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) fail(Errc::missing_id, "unknown item id '" + id + "'");
    return it->second;
  }

  std::span<const double> row(const std::string& id) const {
    return data_.row(index_of(id));
  }

  std::vector<std::size_t> indices_of(const std::vector<std::string>& ids) const {
    std::vector<std::size_t> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(index_of(id));
    return out;
  }

  Matrix gather(const std::vector<std::string>& ids) const {
    const auto idx = indices_of(ids);
    return data_.gather(idx);
  }

  static std::vector<std::string> default_ids(std::size_t n) {
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
    return ids;
  }

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.data_ == b.data_ && a.ids_ == b.ids_;
  }

 private:
  Matrix data_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
         (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io, "cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!in.bad(), Errc::io, "read failed for '" + path.string() + "'");
  return bytes;
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), Errc::io, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require(static_cast<bool>(out), Errc::io, "write failed for '" + path.string() + "'");
}

}  // namespace detail

// Serialize to the binary matrix format (header + f32 LE payload).
inline std::string encode_matrix(const Matrix& m) {
  require(m.rows() <= std::numeric_limits<std::uint32_t>::max() &&
              m.cols() <= std::numeric_limits<std::uint32_t>::max(),
          Errc::shape_mismatch, "matrix too large for format v1");
  std::string out;
  out.reserve(kMatrixHeaderBytes + 4 * m.rows() * m.cols());
  out.append(kMatrixMagic.data(), kMatrixMagic.size());
  detail::put_u32(out, kMatrixVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      const auto f = static_cast<float>(r[j]);
      if (!std::isfinite(r[j]) || !std::isfinite(f)) fail(Errc::non_finite,
              "non-finite value at row " + std::to_string(i) + ", col " +
                  std::to_string(j));
      detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

inline Matrix decode_matrix(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  require(bytes.size() >= kMatrixHeaderBytes, Errc::truncated,
          "file shorter than the 16-byte header");
  require(std::memcmp(p, kMatrixMagic.data(), 4) == 0, Errc::bad_magic,
          "bad magic (expected LGCV)");
  const std::uint32_t version = detail::get_u32(p + 4);
  require(version == kMatrixVersion, Errc::version_mismatch,
          "unsupported format version " + std::to_string(version));
  const std::size_t rows = detail::get_u32(p + 8);
  const std::size_t cols = detail::get_u32(p + 12);
  const std::size_t have = bytes.size() - kMatrixHeaderBytes;
  require(cols == 0 || rows <= have / 4 / cols, Errc::truncated,
          "payload has " + std::to_string(have) + " bytes, header implies " +
              std::to_string(rows) + "x" + std::to_string(cols) + " floats");
  const std::size_t want = rows * cols * 4;
  require(have >= want, Errc::truncated,
          "payload has " + std::to_string(have) + " bytes, header implies " +
              std::to_string(want));
  require(have == want, Errc::trailing_bytes,
          std::to_string(have - want) + " trailing bytes after payload");
  Matrix m(rows, cols);
  const unsigned char* q = p + kMatrixHeaderBytes;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j, q += 4) {
      const float f = std::bit_cast<float>(detail::get_u32(q));
      if (!std::isfinite(f)) fail(Errc::non_finite,
              "non-finite value at row " + std::to_string(i) + ", col " +
                  std::to_string(j));
      m(i, j) = f;
    }
  }
  return m;
}

// `dir/name.bin` -> `dir/name.ids.json`
inline fs::path sidecar_path(const fs::path& matrix_path) {
  fs::path p = matrix_path;
  p.replace_extension(".ids.json");
  return p;
}

inline json read_json(const fs::path& path) {
  const std::string text = detail::read_file(path);
  json j = json::parse(text, nullptr, false);
  require(!j.is_discarded(), Errc::invalid_argument,
          "malformed JSON in '" + path.string() + "'");
  return j;
}

inline void write_json(const fs::path& path, const json& j) {
  detail::write_file(path, j.dump(2) + "\n");
}

inline void save_matrix(const EmbeddingMatrix& m, const fs::path& path) {
  detail::write_file(path, encode_matrix(m.matrix()));
  write_json(sidecar_path(path), json{{"ids", m.ids()}});
}

// Missing sidecar: ids default to row indices.
inline EmbeddingMatrix load_matrix(const fs::path& path) {
  Matrix m = decode_matrix(detail::read_file(path));
  const fs::path side = sidecar_path(path);
  if (!fs::exists(side)) return EmbeddingMatrix(std::move(m));
  const json j = read_json(side);
  require(j.is_object() && j.contains("ids") && j["ids"].is_array(),
          Errc::invalid_argument, "sidecar '" + side.string() + "' lacks an ids array");
  std::vector<std::string> ids;
  for (const auto& id : j["ids"]) {
    require(id.is_string(), Errc::invalid_argument,
            "non-string id in '" + side.string() + "'");
    ids.push_back(id.get<std::string>());
  }
  return EmbeddingMatrix(std::move(m), std::move(ids));
}

// Row pairs (i, j) with a.ids[i] == b.ids[j], in the order of a.
inline std::vector<std::pair<std::size_t, std::size_t>> join_by_id(
    const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < a.rows(); ++i)
    if (const auto j = b.find(a.ids()[i])) out.emplace_back(i, *j);
  return out;
}

// ---------------------------------------------------------------------------
// JSON artifacts

enum class Split { train, test, probe_pool };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::probe_pool: return "probe-pool";
  }
  return "train";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "probe-pool") return Split::probe_pool;
  fail(Errc::invalid_argument, "unknown split '" + s + "'");
}

struct ManifestItem {
  std::string id;
  std::optional<std::size_t> label;
  Split split = Split::train;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ManifestItem> items;

  std::size_t num_classes() const { return class_names.size(); }

  void validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& it : items) {
      require(seen.insert(it.id).second, Errc::duplicate_id,
              "duplicate manifest id '" + it.id + "'");
      if (it.label)
        require(*it.label < class_names.size(), Errc::invalid_argument,
                "label " + std::to_string(*it.label) + " of '" + it.id +
                    "' outside [0, " + std::to_string(class_names.size()) + ")");
    }
  }

  std::vector<std::string> ids_in(Split s) const {
    std::vector<std::string> out;
    for (const auto& it : items)
      if (it.split == s) out.push_back(it.id);
    return out;
  }

  // Labeled items of a split, as (ids, labels).
  std::pair<std::vector<std::string>, std::vector<std::size_t>> labeled(Split s) const {
    std::pair<std::vector<std::string>, std::vector<std::size_t>> out;
    for (const auto& it : items)
      if (it.split == s && it.label) {
        out.first.push_back(it.id);
        out.second.push_back(*it.label);
      }
    return out;
  }
};

inline json to_json(const DatasetManifest& m) {
  json items = json::array();
  for (const auto& it : m.items) {
    json j{{"id", it.id}, {"split", to_string(it.split)}};
    j["label"] = it.label ? json(*it.label) : json(nullptr);
    items.push_back(std::move(j));
  }
  return json{{"class_names", m.class_names}, {"items", std::move(items)}};
}

inline DatasetManifest manifest_from_json(const json& j) {
  require(j.is_object() && j.contains("class_names") && j.contains("items"),
          Errc::invalid_argument, "manifest needs class_names and items");
  DatasetManifest m;
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  for (const auto& e : j.at("items")) {
    ManifestItem it;
    it.id = e.at("id").get<std::string>();
    if (e.contains("label") && !e["label"].is_null()) {
      const auto l = e["label"].get<long long>();
      require(l >= 0, Errc::invalid_argument, "negative label on '" + it.id + "'");
      it.label = static_cast<std::size_t>(l);
    }
    it.split = parse_split(e.value("split", std::string("train")));
    m.items.push_back(std::move(it));
  }
  m.validate();
  return m;
}

inline DatasetManifest load_manifest(const fs::path& path) {
  try {
    return manifest_from_json(read_json(path));
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, "manifest '" + path.string() + "': " + e.what());
  }
}

inline void save_manifest(const DatasetManifest& m, const fs::path& path) {
  write_json(path, to_json(m));
}

struct ConceptSpec {
  std::string name;
  fs::path prompts_path;  // as written in the concepts file
  EmbeddingMatrix prompts;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  std::vector<std::string> test_positives;
  std::vector<std::string> test_negatives;

  void validate() const {
    require(prompts.rows() >= 1, Errc::invalid_argument,
            "concept '" + name + "' has no prompt embeddings");
    const std::unordered_set<std::string> pos(positives.begin(), positives.end());
    for (const auto& id : negatives)
      require(!pos.count(id), Errc::invalid_argument,
              "concept '" + name + "': '" + id + "' is both positive and negative");
  }
};

inline json to_json(const ConceptSpec& c) {
  json j{{"name", c.name}, {"prompts", c.prompts_path.generic_string()}};
  j["positives"] = c.positives;
  j["negatives"] = c.negatives;
  if (!c.test_positives.empty()) j["test_positives"] = c.test_positives;
  if (!c.test_negatives.empty()) j["test_negatives"] = c.test_negatives;
  return j;
}

// Prompt paths resolve relative to `base_dir`.
inline ConceptSpec concept_from_json(const json& j, const fs::path& base_dir) {
  ConceptSpec c;
  c.name = j.at("name").get<std::string>();
  c.prompts_path = j.at("prompts").get<std::string>();
  c.prompts = load_matrix(base_dir / c.prompts_path);
  auto list = [&](const char* key) {
    return j.contains(key) ? j[key].get<std::vector<std::string>>()
                           : std::vector<std::string>{};
  };
  c.positives = list("positives");
  c.negatives = list("negatives");
  c.test_positives = list("test_positives");
  c.test_negatives = list("test_negatives");
  c.validate();
  return c;
}

// A concepts file is {"concepts": [ConceptSpec, ...]}.
inline std::vector<ConceptSpec> load_concepts(const fs::path& path) {
  try {
    const json j = read_json(path);
    require(j.contains("concepts") && j["concepts"].is_array(),
            Errc::invalid_argument, "'" + path.string() + "' lacks a concepts array");
    std::vector<ConceptSpec> out;
    std::unordered_set<std::string> names;
    for (const auto& e : j["concepts"]) {
      out.push_back(concept_from_json(e, path.parent_path()));
      require(names.insert(out.back().name).second, Errc::duplicate_id,
              "duplicate concept name '" + out.back().name + "'");
    }
    return out;
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, "concepts '" + path.string() + "': " + e.what());
  }
}

inline void save_concepts(const std::vector<ConceptSpec>& concepts, const fs::path& path) {
  json arr = json::array();
  for (const auto& c : concepts) arr.push_back(to_json(c));
  write_json(path, json{{"concepts", std::move(arr)}});
}

enum class PairSource { threshold, explicit_list };

struct ConceptClassPair {
  std::string concept_name;
  std::size_t class_index = 0;
  friend bool operator==(const ConceptClassPair&, const ConceptClassPair&) = default;
};

struct PairSet {
  PairSource source = PairSource::explicit_list;
  std::vector<ConceptClassPair> pairs;

  void validate(std::size_t num_classes,
                const std::unordered_set<std::string>& concept_names) const {
    for (const auto& p : pairs) {
      require(p.class_index < num_classes, Errc::invalid_argument,
              "pair class index " + std::to_string(p.class_index) + " out of range");
      require(concept_names.count(p.concept_name) > 0, Errc::missing_id,
              "pair names unknown concept '" + p.concept_name + "'");
    }
  }
};

inline json to_json(const PairSet& p) {
  json arr = json::array();
  for (const auto& q : p.pairs) arr.push_back({{"concept", q.concept_name}, {"class", q.class_index}});
  return json{{"source", p.source == PairSource::threshold ? "threshold" : "explicit"},
              {"pairs", std::move(arr)}};
}

inline PairSet pairs_from_json(const json& j) {
  PairSet p;
  const auto src = j.value("source", std::string("explicit"));
  require(src == "threshold" || src == "explicit", Errc::invalid_argument,
          "unknown pair source '" + src + "'");
  p.source = src == "threshold" ? PairSource::threshold : PairSource::explicit_list;
  for (const auto& e : j.at("pairs"))
    p.pairs.push_back({e.at("concept").get<std::string>(), e.at("class").get<std::size_t>()});
  return p;
}

inline PairSet load_pairs(const fs::path& path) {
  try {
    return pairs_from_json(read_json(path));
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, "pairs '" + path.string() + "': " + e.what());
  }
}

// Final linear layer: logits = W f + b.
struct LinearHead {
  Matrix weights;  // K x D
  Vector biases;   // K
  std::vector<std::string> class_names;
  json provenance = json::object();

  std::size_t num_classes() const { return weights.rows(); }

  void validate() const {
    require(biases.size() == weights.rows(), Errc::shape_mismatch,
            "head has " + std::to_string(weights.rows()) + " weight rows but " +
                std::to_string(biases.size()) + " biases");
    require(class_names.size() == weights.rows(), Errc::shape_mismatch,
            "head class name count differs from weight rows");
    for (double x : weights.data())
      require(std::isfinite(x), Errc::non_finite, "non-finite head weight");
    for (double x : biases)
      require(std::isfinite(x), Errc::non_finite, "non-finite head bias");
  }

  Vector logits(std::span<const double> f) const {
    Vector z(num_classes());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = dot(weights.row(k), f) + biases[k];
    return z;
  }
};

// Writes `<stem>.bin` (weights, ids = class names) next to the JSON file.
inline void save_head(const LinearHead& h, const fs::path& json_path) {
  h.validate();
  fs::path bin = json_path;
  bin.replace_extension(".bin");
  save_matrix(EmbeddingMatrix(h.weights, h.class_names), bin);
  write_json(json_path, json{{"weights", bin.filename().string()},
                             {"classes", h.class_names},
                             {"biases", h.biases},
                             {"provenance", h.provenance}});
}

inline LinearHead load_head(const fs::path& json_path) {
  try {
    const json j = read_json(json_path);
    LinearHead h;
    const auto w = load_matrix(json_path.parent_path() / j.at("weights").get<std::string>());
    h.weights = w.matrix();
    h.biases = j.at("biases").get<Vector>();
    h.class_names = j.contains("classes") ? j["classes"].get<std::vector<std::string>>() : w.ids();
    h.provenance = j.value("provenance", json::object());
    h.validate();
    return h;
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, "head '" + json_path.string() + "': " + e.what());
  }
}

enum class CavMode { original, lg, combined };

inline std::string to_string(CavMode m) {
  switch (m) {
    case CavMode::original: return "original";
    case CavMode::lg: return "lg";
    case CavMode::combined: return "combined";
  }
  return "combined";
}

inline CavMode parse_cav_mode(const std::string& s) {
  if (s == "original") return CavMode::original;
  if (s == "lg") return CavMode::lg;
  if (s == "combined") return CavMode::combined;
  fail(Errc::config, "unknown mode '" + s + "' (expected original, lg or combined)");
}

struct Cav {
  std::string concept_name;
  CavMode mode = CavMode::combined;
  Vector vector;
  std::optional<double> bias;  // absent in lg mode
  double lambda = 1.0;
  std::uint64_t seed = 0;
  Vector trace;
  std::vector<std::size_t> rejitter_epochs;
};

inline void save_cav(const Cav& c, const fs::path& json_path) {
  fs::path bin = json_path;
  bin.replace_extension(".bin");
  Matrix m(1, c.vector.size(), c.vector);
  save_matrix(EmbeddingMatrix(std::move(m), {c.concept_name}), bin);
  json j{{"name", c.concept_name},
         {"mode", to_string(c.mode)},
         {"vector", bin.filename().string()},
         {"lambda", c.lambda},
         {"seed", c.seed},
         {"trace", c.trace},
         {"rejitter_epochs", c.rejitter_epochs}};
  j["bias"] = c.bias ? json(*c.bias) : json(nullptr);
  write_json(json_path, j);
}

inline Cav load_cav(const fs::path& json_path) {
  try {
    const json j = read_json(json_path);
    Cav c;
    c.concept_name = j.at("name").get<std::string>();
    c.mode = parse_cav_mode(j.at("mode").get<std::string>());
    const auto v = load_matrix(json_path.parent_path() / j.at("vector").get<std::string>());
    require(v.rows() == 1, Errc::shape_mismatch, "CAV vector file must have one row");
    c.vector = v.matrix().data();
    if (j.contains("bias") && !j["bias"].is_null()) c.bias = j["bias"].get<double>();
    c.lambda = j.value("lambda", 1.0);
    c.seed = j.value("seed", std::uint64_t{0});
    c.trace = j.value("trace", Vector{});
    c.rejitter_epochs = j.value("rejitter_epochs", std::vector<std::size_t>{});
    return c;
  } catch (const json::exception& e) {
    fail(Errc::invalid_argument, "cav '" + json_path.string() + "': " + e.what());
  }
}

}  // namespace lgcav
