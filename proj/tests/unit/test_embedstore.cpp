#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "support.hpp"

using namespace lgcav;
using testutil::error_code_of;
using testutil::TempDir;

namespace {

std::string header(const char magic[4], std::uint32_t version, std::uint32_t rows, std::uint32_t cols) {
  std::string h(magic, 4);
  for (std::uint32_t v : {version, rows, cols})
    for (int k = 0; k < 4; ++k) h.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  return h;
}

}  // namespace

TEST(MatrixFormat, ZeroMatrixSizes) {
  const std::string bytes = encode_matrix(Matrix(2, 3));
  ASSERT_EQ(bytes.size(), 16u + 24u);  // six f32 values
  EXPECT_EQ(bytes.substr(0, 4), "LGCV");
  EXPECT_EQ(bytes.substr(4, 12), header("LGCV", 1, 2, 3).substr(4));
  for (std::size_t i = 16; i < bytes.size(); ++i) EXPECT_EQ(bytes[i], '\0');
}

TEST(MatrixFormat, LittleEndianFloatPayload) {
  const std::string bytes = encode_matrix(Matrix::from_rows({{1.0}}));
  // 1.0f = 0x3f800000
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[18]), 0x80);
  EXPECT_EQ(static_cast<unsigned char>(bytes[19]), 0x3f);
}

TEST(MatrixFormat, RoundTripIsByteIdentical) {
  oracle::Gen g(1);
  const Matrix m = testutil::to_matrix(g.rows(5, 4));
  const std::string a = encode_matrix(m);
  const Matrix back = decode_matrix(a);
  EXPECT_EQ(encode_matrix(back), a);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(back(i, j), static_cast<double>(static_cast<float>(m(i, j))));
}

TEST(MatrixFormat, NaNErrorNamesPosition) {
  Matrix m(2, 3);
  m(0, 2) = std::nan("");
  const std::string msg = testutil::error_message_of([&] { encode_matrix(m); });
  EXPECT_NE(msg.find("row 0, col 2"), std::string::npos) << msg;
  EXPECT_EQ(error_code_of([&] { encode_matrix(m); }), Errc::non_finite);
  EXPECT_EQ(error_code_of([&] { EmbeddingMatrix{m}; }), Errc::non_finite);
}

TEST(MatrixFormat, BadMagic) {
  const std::string bytes = header("XXXX", 1, 1, 1) + std::string(4, '\0');
  EXPECT_EQ(error_code_of([&] { decode_matrix(bytes); }), Errc::bad_magic);
}

TEST(MatrixFormat, VersionMismatch) {
  const std::string bytes = header("LGCV", 2, 1, 1) + std::string(4, '\0');
  EXPECT_EQ(error_code_of([&] { decode_matrix(bytes); }), Errc::version_mismatch);
}

TEST(MatrixFormat, ExactPayloadDecodes) {
  const Matrix m = decode_matrix(header("LGCV", 1, 3, 2) + std::string(24, '\0'));
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.cols(), 2u);
}

TEST(MatrixFormat, ShortPayloadIsTruncation) {
  EXPECT_EQ(error_code_of([] { decode_matrix(header("LGCV", 1, 3, 2) + std::string(20, '\0')); }), Errc::truncated);
  EXPECT_EQ(error_code_of([] { decode_matrix(std::string("LGCV")); }), Errc::truncated);
}

TEST(MatrixFormat, HugeHeaderIsTruncationNotOverflow) {
  EXPECT_EQ(error_code_of([] { decode_matrix(header("LGCV", 1, 0xffffffffu, 0xffffffffu)); }), Errc::truncated);
}

TEST(MatrixFormat, TrailingBytes) {
  EXPECT_EQ(error_code_of([] { decode_matrix(header("LGCV", 1, 1, 1) + std::string(5, '\0')); }),
            Errc::trailing_bytes);
}

TEST(MatrixFormat, NonFiniteOnLoad) {
  std::string bytes = header("LGCV", 1, 1, 2) + std::string(8, '\0');
  bytes[16 + 4 + 2] = static_cast<char>(0x80);  // +inf = 0x7f800000
  bytes[16 + 4 + 3] = static_cast<char>(0x7f);
  const std::string msg = testutil::error_message_of([&] { decode_matrix(bytes); });
  EXPECT_NE(msg.find("row 0, col 1"), std::string::npos) << msg;
}

TEST(EmbeddingMatrixFile, SaveLoadWithSidecar) {
  TempDir dir("emb");
  const EmbeddingMatrix m(Matrix::from_rows({{1, 2}, {3, 4}}), {"a", "b"});
  save_matrix(m, dir / "m.bin");
  EXPECT_TRUE(std::filesystem::exists(dir / "m.ids.json"));
  const EmbeddingMatrix back = load_matrix(dir / "m.bin");
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.row("b")[1], 4.0);
}

TEST(EmbeddingMatrixFile, MissingSidecarDefaultsToRowIndices) {
  TempDir dir("emb");
  detail::write_file(dir / "m.bin", encode_matrix(Matrix(3, 1)));
  const EmbeddingMatrix back = load_matrix(dir / "m.bin");
  EXPECT_EQ(back.ids(), (std::vector<std::string>{"0", "1", "2"}));
}

TEST(EmbeddingMatrixFile, SidecarLengthMismatch) {
  TempDir dir("emb");
  detail::write_file(dir / "m.bin", encode_matrix(Matrix(3, 1)));
  write_json(dir / "m.ids.json", json{{"ids", {"a", "b"}}});
  EXPECT_EQ(error_code_of([&] { load_matrix(dir / "m.bin"); }), Errc::shape_mismatch);
}

TEST(EmbeddingMatrixFile, DuplicateIdsRejected) {
  EXPECT_EQ(error_code_of([] { EmbeddingMatrix(Matrix(2, 1), {"a", "a"}); }), Errc::duplicate_id);
}

TEST(EmbeddingMatrixFile, MissingFileIsIoError) {
  EXPECT_EQ(error_code_of([] { load_matrix("/nonexistent/x.bin"); }), Errc::io);
}

TEST(JoinById, PartialOverlap) {
  const EmbeddingMatrix a(Matrix(2, 1), {"x", "y"});
  const EmbeddingMatrix b(Matrix(2, 1), {"y", "z"});
  const auto j = join_by_id(a, b);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0], (std::pair<std::size_t, std::size_t>{1, 0}));
}

TEST(JoinById, IdenticalAndDisjoint) {
  const EmbeddingMatrix a(Matrix(3, 1), {"p", "q", "r"});
  const auto same = join_by_id(a, a);
  ASSERT_EQ(same.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(same[i], (std::pair<std::size_t, std::size_t>{i, i}));
  EXPECT_TRUE(join_by_id(a, EmbeddingMatrix(Matrix(1, 1), {"s"})).empty());
}

TEST(Manifest, RoundTripAndSplits) {
  TempDir dir("man");
  DatasetManifest m;
  m.class_names = {"cat", "dog"};
  m.items = {{"a", 0, Split::train}, {"b", 1, Split::test}, {"c", std::nullopt, Split::probe_pool}};
  save_manifest(m, dir / "m.json");
  const DatasetManifest back = load_manifest(dir / "m.json");
  EXPECT_EQ(back.class_names, m.class_names);
  EXPECT_EQ(back.ids_in(Split::probe_pool), std::vector<std::string>{"c"});
  const auto [ids, labels] = back.labeled(Split::test);
  EXPECT_EQ(ids, std::vector<std::string>{"b"});
  EXPECT_EQ(labels, std::vector<std::size_t>{1});
  const json j = read_json(dir / "m.json");
  EXPECT_EQ(j["items"][2]["split"], "probe-pool");
}

TEST(Manifest, LabelOutOfRangeRejected) {
  DatasetManifest m;
  m.class_names = {"cat"};
  m.items = {{"a", 3, Split::train}};
  EXPECT_TRUE(error_code_of([&] { m.validate(); }).has_value());
}

TEST(Manifest, UnknownSplitRejected) {
  EXPECT_TRUE(error_code_of([] { parse_split("validation"); }).has_value());
}

TEST(Concepts, LoadResolvesPromptPathsRelativeToFile) {
  TempDir dir("con");
  save_matrix(EmbeddingMatrix(Matrix::from_rows({{1, 0}, {0, 1}})), dir / "prompts" / "stripes.bin");
  write_json(dir / "concepts.json",
             json{{"concepts",
                   {{{"name", "stripes"}, {"prompts", "prompts/stripes.bin"}, {"positives", {"a"}},
                     {"negatives", {"b"}}}}}});
  const auto cs = load_concepts(dir / "concepts.json");
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].name, "stripes");
  EXPECT_EQ(cs[0].prompts.rows(), 2u);
  EXPECT_EQ(cs[0].positives, std::vector<std::string>{"a"});
  EXPECT_TRUE(cs[0].test_positives.empty());
}

TEST(Pairs, RoundTripAndValidation) {
  PairSet p;
  p.pairs = {{"stripes", 1}};
  const PairSet back = pairs_from_json(to_json(p));
  ASSERT_EQ(back.pairs.size(), 1u);
  EXPECT_EQ(back.pairs[0].concept_name, "stripes");
  EXPECT_EQ(back.pairs[0].class_index, 1u);
  EXPECT_TRUE(error_code_of([&] { back.validate(1, {"stripes"}); }).has_value());
  EXPECT_TRUE(error_code_of([&] { back.validate(2, {"spots"}); }).has_value());
  EXPECT_FALSE(error_code_of([&] { back.validate(2, {"stripes"}); }).has_value());
}

TEST(Head, SaveLoadRoundTrip) {
  TempDir dir("head");
  LinearHead h;
  h.weights = Matrix::from_rows({{0.5, -1}, {2, 0.25}});
  h.biases = {0.125, -0.5};
  h.class_names = {"cat", "dog"};
  save_head(h, dir / "head.json");
  const LinearHead back = load_head(dir / "head.json");
  EXPECT_EQ(back.weights, h.weights);
  EXPECT_EQ(back.biases, h.biases);
  EXPECT_EQ(back.class_names, h.class_names);
  const Vector z = back.logits(Vector{1, 1});
  EXPECT_DOUBLE_EQ(z[0], -0.5 + 0.125);
}

TEST(Head, RowCountMustMatchClasses) {
  LinearHead h;
  h.weights = Matrix(2, 3);
  h.biases = {0, 0};
  h.class_names = {"only"};
  EXPECT_TRUE(error_code_of([&] { h.validate(); }).has_value());
}

TEST(CavFile, RoundTripKeepsOptionalBias) {
  TempDir dir("cav");
  Cav c;
  c.concept_name = "stripes";
  c.mode = CavMode::lg;
  c.vector = {0.5, -0.25, 1.0};
  c.trace = {1.0, 0.5};
  save_cav(c, dir / "c.json");
  Cav back = load_cav(dir / "c.json");
  EXPECT_EQ(back.vector, c.vector);
  EXPECT_FALSE(back.bias.has_value());
  EXPECT_EQ(back.mode, CavMode::lg);
  c.bias = 0.75;
  c.mode = CavMode::combined;
  save_cav(c, dir / "c.json");
  back = load_cav(dir / "c.json");
  ASSERT_TRUE(back.bias.has_value());
  EXPECT_EQ(*back.bias, 0.75);
}

TEST(CavMode, ParseRejectsUnknown) {
  EXPECT_EQ(parse_cav_mode("combined"), CavMode::combined);
  EXPECT_EQ(error_code_of([] { parse_cav_mode("hybrid"); }), Errc::config);
}

TEST(ErrorClass, MapsToExitCategories) {
  EXPECT_EQ(classify(Errc::config), ErrorClass::config);
  EXPECT_EQ(classify(Errc::truncated), ErrorClass::data);
  EXPECT_EQ(classify(Errc::numeric), ErrorClass::numeric);
  EXPECT_EQ(classify(Errc::degenerate), ErrorClass::numeric);
}
