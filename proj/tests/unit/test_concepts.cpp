#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "support.hpp"

using namespace lgcav;
using testutil::error_code_of;

namespace {

// VL rows whose cosine with text [1, 0] equals the given activation.
EmbeddingMatrix vl_with_activations(const std::vector<double>& acts, const std::vector<std::string>& ids) {
  Matrix m(acts.size(), 2);
  for (std::size_t i = 0; i < acts.size(); ++i) {
    m(i, 0) = acts[i];
    m(i, 1) = std::sqrt(1.0 - acts[i] * acts[i]);
  }
  return EmbeddingMatrix(m, ids);
}

}  // namespace

TEST(ConceptEnsemble, SinglePromptIsIdentity) {
  EXPECT_EQ(concept_ensemble(Matrix::from_rows({{0.25, -1.5}})), (Vector{0.25, -1.5}));
}

TEST(ConceptEnsemble, DuplicatePromptsAreIdempotent) {
  EXPECT_EQ(concept_ensemble(Matrix::from_rows({{0.25, -1.5}, {0.25, -1.5}})), (Vector{0.25, -1.5}));
}

TEST(ConceptEnsemble, AveragesWithoutRenormalizing) {
  EXPECT_EQ(concept_ensemble(Matrix::from_rows({{1, 0}, {0, 1}})), (Vector{0.5, 0.5}));
}

TEST(SelectProbes, MostThenLeastActivated) {
  const auto ids = testutil::ids(5);
  const auto vl = vl_with_activations({0.9, 0.1, 0.5, 0.8, 0.2}, ids);
  const auto chosen = select_probe_ids(vl, Vector{1, 0}, ids, 2);
  EXPECT_EQ(chosen, (std::vector<std::string>{"i0", "i3", "i1", "i4"}));
}

TEST(SelectProbes, HalfPoolTakesWholePool) {
  const auto ids = testutil::ids(6);
  const auto vl = vl_with_activations({0.3, 0.1, 0.5, 0.8, 0.2, 0.6}, ids);
  const auto chosen = select_probe_ids(vl, Vector{1, 0}, ids, 3);
  EXPECT_EQ(std::set<std::string>(chosen.begin(), chosen.end()), std::set<std::string>(ids.begin(), ids.end()));
}

TEST(SelectProbes, EqualActivationsBreakTiesById) {
  const std::vector<std::string> ids{"d", "b", "a", "c", "e"};
  const auto vl = vl_with_activations({0.5, 0.5, 0.5, 0.5, 0.5}, ids);
  const auto chosen = select_probe_ids(vl, Vector{1, 0}, ids, 2);
  EXPECT_EQ(chosen, (std::vector<std::string>{"a", "b", "c", "d"}));
}

TEST(SelectProbes, PoolTooSmall) {
  const auto ids = testutil::ids(3);
  const auto vl = vl_with_activations({0.1, 0.2, 0.3}, ids);
  EXPECT_EQ(error_code_of([&] { select_probe_ids(vl, Vector{1, 0}, ids, 2); }), Errc::invalid_argument);
}

TEST(SelectProbes, ProbeMissingFromTargetFeatures) {
  const auto ids = testutil::ids(4);
  const auto vl = vl_with_activations({0.1, 0.2, 0.3, 0.4}, ids);
  const EmbeddingMatrix target(Matrix(3, 2, 1.0), {"i0", "i1", "i2"});
  EXPECT_EQ(error_code_of([&] { select_probes(target, vl, Vector{1, 0}, ids, 2); }), Errc::missing_id);
}

TEST(RandomProbes, WholePoolIsAPermutation) {
  const auto ids = testutil::ids(10);
  const auto chosen = random_probe_ids(ids, 5, 1);
  EXPECT_EQ(std::set<std::string>(chosen.begin(), chosen.end()), std::set<std::string>(ids.begin(), ids.end()));
}

TEST(RandomProbes, SeedDeterminesSet) {
  const auto ids = testutil::ids(200);
  EXPECT_EQ(random_probe_ids(ids, 10, 9), random_probe_ids(ids, 10, 9));
  const auto base = random_probe_ids(ids, 10, 0);
  const std::set<std::string> base_set(base.begin(), base.end());
  int differ = 0;
  for (std::uint64_t s = 1; s <= 100; ++s) {
    const auto other = random_probe_ids(ids, 10, s);
    differ += std::set<std::string>(other.begin(), other.end()) != base_set;
  }
  EXPECT_EQ(differ, 100);
}

TEST(PairSetBuild, ThresholdIsStrict) {
  const auto p = build_pair_set(Matrix::from_rows({{0.7, 0.5}}), {"c0"}, 0.6);
  ASSERT_EQ(p.pairs.size(), 1u);
  EXPECT_EQ(p.pairs[0].concept_name, "c0");
  EXPECT_EQ(p.pairs[0].class_index, 0u);
  EXPECT_EQ(p.source, PairSource::threshold);
  EXPECT_TRUE(build_pair_set(Matrix::from_rows({{0.6, 0.59}}), {"c0"}, 0.6).pairs.empty());
  EXPECT_TRUE(build_pair_set(Matrix::from_rows({{1.0, 0.3}}), {"c0"}, 1.0).pairs.empty());
}

TEST(PairSetBuild, ShapeChecked) {
  EXPECT_EQ(error_code_of([] { build_pair_set(Matrix(2, 2), {"c0"}, 0.5); }), Errc::shape_mismatch);
}
