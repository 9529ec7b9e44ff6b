#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace lgcav;
using testutil::error_code_of;

namespace {

ProbeSet identity_probe(const EmbeddingMatrix& target, const EmbeddingMatrix& vl) {
  return make_probe_set(target.ids(), target, vl);
}

}  // namespace

TEST(VlActivations, TextEqualToProbeRowGivesOne) {
  const EmbeddingMatrix vl(Matrix::from_rows({{0.3, 0.4}, {1, -2}}), {"a", "b"});
  const auto p = identity_probe(vl, vl);
  const auto a = vl_activations(Vector{1, -2}, vl, p);
  EXPECT_NEAR(a[1], 1.0, 1e-15);
}

TEST(VlActivations, OrthogonalTextGivesZeros) {
  const EmbeddingMatrix vl(Matrix::from_rows({{1, 0, 0}, {0, 2, 0}}), {"a", "b"});
  const auto a = vl_activations(Vector{0, 0, 5}, vl, identity_probe(vl, vl));
  EXPECT_EQ(a, (Vector{0.0, 0.0}));
}

TEST(VlActivations, MatchesOracle) {
  oracle::Gen g(3);
  const auto rows = g.rows(30, 9);
  const auto text = g.vec(9);
  const EmbeddingMatrix vl(testutil::to_matrix(rows), testutil::ids(30));
  const auto a = vl_activations(text, vl, identity_probe(vl, vl));
  const auto b = oracle::vl_activations(text, rows);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(TargetPopulation, TwoProbesGiveSinglePair) {
  const EmbeddingMatrix t(Matrix::from_rows({{1, 0}, {1, 1}}), {"a", "b"});
  const auto e = target_activation_population(t, identity_probe(t, t));
  EXPECT_EQ(e.count, 1u);
  EXPECT_TRUE(e.degenerate);
  EXPECT_NEAR(e.params.mu, 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(TargetPopulation, SameDirectionGivesMeanOneSigmaZero) {
  const EmbeddingMatrix t(Matrix::from_rows({{1, 2}, {2, 4}, {0.5, 1}}), {"a", "b", "c"});
  const auto e = target_activation_population(t, identity_probe(t, t));
  EXPECT_NEAR(e.params.mu, 1.0, 1e-15);
  EXPECT_NEAR(e.params.sigma, 0.0, 1e-7);
}

TEST(TargetPopulation, ExhaustiveBelowCap) {
  oracle::Gen g(8);
  const EmbeddingMatrix t(testutil::to_matrix(g.rows(1000, 4)), testutil::ids(1000));
  const auto e = target_activation_population(t, identity_probe(t, t), kDefaultPairCap);
  EXPECT_EQ(e.count, 499500u);
}

TEST(TargetPopulation, MatchesPairwiseOracle) {
  oracle::Gen g(9);
  const auto rows = g.rows(25, 6);
  const EmbeddingMatrix t(testutil::to_matrix(rows), testutil::ids(25));
  const auto e = target_activation_population(t, identity_probe(t, t));
  oracle::Vec cos;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) cos.push_back(oracle::cosine(rows[i], rows[j]));
  EXPECT_NEAR(e.params.mu, oracle::mean(cos), 1e-12);
  EXPECT_NEAR(e.params.sigma, oracle::pop_std(cos), 1e-12);
}

TEST(TargetPopulation, SampledAboveCapIsSeededAndClose) {
  oracle::Gen g(10);
  const EmbeddingMatrix t(testutil::to_matrix(g.rows(300, 5)), testutil::ids(300));
  const auto p = identity_probe(t, t);
  const auto full = target_activation_population(t, p);
  const auto a = target_activation_population(t, p, 20000, 1);
  const auto b = target_activation_population(t, p, 20000, 1);
  EXPECT_EQ(a.count, 20000u);
  EXPECT_EQ(a.params, b.params);
  EXPECT_NEAR(a.params.mu, full.params.mu, 0.02);
  EXPECT_NEAR(a.params.sigma, full.params.sigma, 0.02);
}

TEST(GaTransform, MeanMapsToMean) {
  EXPECT_NEAR(ga_transform(Vector{0.5}, {0.5, 0.1}, {0.1, 0.05})[0], 0.1, 1e-15);
}

TEST(GaTransform, OneSigmaMapsToOneSigma) {
  EXPECT_NEAR(ga_transform(Vector{0.6}, {0.5, 0.1}, {0.1, 0.05})[0], 0.15, 1e-15);
}

TEST(GaTransform, ZScoreThree) {
  EXPECT_NEAR(ga_transform(Vector{0.8}, {0.5, 0.1}, {0.1, 0.05})[0], 0.25, 1e-15);
}

TEST(GaTransform, ZeroVlSpreadIsDegenerate) {
  EXPECT_EQ(error_code_of([] { ga_transform(Vector{0.1}, {0.5, 0.0}, {0.1, 0.05}); }), Errc::degenerate);
}

TEST(DsrWeights, EqualSpreadGivesOnes) {
  // Every probe is the same direction, so every std is identical.
  const EmbeddingMatrix t(Matrix::from_rows({{1, 0}, {2, 0}, {0.6, 0.8}, {0.8, 0.6}}), {"p0", "p1", "x", "y"});
  const auto probe = make_probe_set({"p0", "p1"}, t, t);
  for (double w : dsr_weights(t, probe, {"x", "y"})) EXPECT_NEAR(w, 1.0, 1e-15);
}

TEST(DsrWeights, MatchesOracle) {
  oracle::Gen g(12);
  const auto probe_rows = g.rows(15, 7);
  const auto pos_rows = g.rows(6, 7);
  oracle::Rows all = probe_rows;
  all.insert(all.end(), pos_rows.begin(), pos_rows.end());
  auto ids = testutil::ids(15, "r");
  const auto pos_ids = testutil::ids(6, "p");
  ids.insert(ids.end(), pos_ids.begin(), pos_ids.end());
  const EmbeddingMatrix t(testutil::to_matrix(all), ids);
  const auto probe = make_probe_set(testutil::ids(15, "r"), t, t);
  const auto a = dsr_weights(t, probe, pos_ids);
  const auto b = oracle::dsr_weights(probe_rows, pos_rows);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(LgLoss, PerfectFitHasZeroLossAndGradient) {
  oracle::Gen g(4);
  const auto f = g.rows(6, 5);
  const auto v = g.vec(5);
  Vector t;
  for (const auto& r : f) t.push_back(oracle::cosine(v, r));
  const auto [loss, grad] = lg_loss_and_grad(v, testutil::to_matrix(f), t);
  EXPECT_NEAR(loss, 0.0, 1e-28);
  for (double x : grad) EXPECT_NEAR(x, 0.0, 1e-14);
}

TEST(LgLoss, HandComputedTwoDimensionalCase) {
  const auto [loss, grad] = lg_loss_and_grad(Vector{1, 1}, Matrix::from_rows({{1, 0}}), Vector{0.5});
  EXPECT_NEAR(loss, 0.75 - 1.0 / std::sqrt(2.0), 1e-15);
  const double g = (2.0 - std::sqrt(2.0)) / 4.0;
  EXPECT_NEAR(grad[0], g, 1e-15);
  EXPECT_NEAR(grad[1], -g, 1e-15);
}

TEST(LgLoss, GradientMatchesFiniteDifferences) {
  oracle::Gen g(21);
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = g.integer(2, 16), n = g.integer(1, 12);
    const auto f = g.rows(n, d);
    const auto v = g.vec(d);
    const auto tg = g.vec(n, 0.4);
    oracle::Vec w(n);
    for (double& x : w) x = g.uniform(0.2, 2.0);
    const auto [loss, grad] = lg_loss_and_grad(v, testutil::to_matrix(f), tg, w);
    EXPECT_NEAR(loss, oracle::lg_loss(v, f, tg, w), 1e-12);
    const auto fd = oracle::finite_difference([&](const oracle::Vec& x) { return oracle::lg_loss(x, f, tg, w); }, v);
    EXPECT_LT(oracle::max_rel_error(grad, fd), 1e-4);
  }
}

TEST(LgLoss, ScaleInvariant) {
  oracle::Gen g(22);
  const auto f = g.rows(8, 4);
  const auto v = g.vec(4);
  const auto tg = g.vec(8, 0.3);
  const double base = lg_loss_and_grad(v, testutil::to_matrix(f), tg).first;
  for (double alpha : {1e-3, 1e3}) {
    Vector s = v;
    for (double& x : s) x *= alpha;
    EXPECT_NEAR(lg_loss_and_grad(s, testutil::to_matrix(f), tg).first, base, 1e-12);
  }
}

TEST(ClsLoss, ZeroParametersGiveLogTwo) {
  const auto r = cls_loss_and_grad(Vector{0, 0}, 0.0, Matrix::from_rows({{1, 2}}), Matrix::from_rows({{3, -1}}));
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
}

TEST(ClsLoss, GradientMatchesFiniteDifferences) {
  oracle::Gen g(23);
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = g.integer(1, 16);
    const auto pos = g.rows(g.integer(1, 8), d), neg = g.rows(g.integer(1, 8), d);
    auto x = g.vec(d + 1, 0.5);
    const Vector v(x.begin(), x.end() - 1);
    const auto r = cls_loss_and_grad(v, x.back(), testutil::to_matrix(pos), testutil::to_matrix(neg));
    auto f = [&](const oracle::Vec& p) {
      return oracle::cls_loss(oracle::Vec(p.begin(), p.end() - 1), p.back(), pos, neg);
    };
    EXPECT_NEAR(r.loss, f(x), 1e-12);
    Vector analytic = r.grad_v;
    analytic.push_back(r.grad_b);
    EXPECT_LT(oracle::max_rel_error(analytic, oracle::finite_difference(f, x)), 1e-4);
  }
}

TEST(ClsLoss, ExtremeLogitsStayFinite) {
  const auto r = cls_loss_and_grad(Vector{1000}, 0.0, Matrix::from_rows({{-1}}), Matrix::from_rows({{1}}));
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 1000.0, 1e-9);
}

namespace {

struct Separable {
  Matrix pos, neg;
};

Separable separable(std::uint64_t seed, std::size_t n, std::size_t d) {
  oracle::Gen g(seed);
  oracle::Rows p, q;
  for (std::size_t i = 0; i < n; ++i) {
    auto a = g.vec(d, 0.3), b = g.vec(d, 0.3);
    a[0] += 2.0;
    b[0] -= 2.0;
    p.push_back(a);
    q.push_back(b);
  }
  return {testutil::to_matrix(p), testutil::to_matrix(q)};
}

}  // namespace

TEST(TrainCav, OriginalModeSeparatesSeparableData) {
  const auto s = separable(1, 10, 6);
  CavTrainData data{"c", s.pos, s.neg, std::nullopt};
  const Cav cav = train_cav(CavMode::original, data, SgdConfig{0.5, 300, 0, 7});
  ASSERT_TRUE(cav.bias.has_value());
  EXPECT_EQ(concept_accuracy(cav.vector, *cav.bias, s.pos, s.neg), 1.0);
  EXPECT_EQ(cav.trace.size(), 300u);
}

TEST(TrainCav, LgModeRecoversPlantedDirection) {
  oracle::Gen g(2);
  const std::size_t d = 10;
  auto u = g.vec(d);
  const double nu = std::sqrt(static_cast<double>(oracle::dot(u, u)));
  for (double& x : u) x /= nu;
  const auto f = g.rows(200, d);
  LgTrainPlan plan;
  plan.probe_features = testutil::to_matrix(f);
  for (const auto& r : f) plan.targets.push_back(oracle::cosine(u, r));
  CavTrainData data{"c", {}, {}, plan};
  const Cav cav = train_cav(CavMode::lg, data, SgdConfig{5.0, 500, 0, 3});
  EXPECT_FALSE(cav.bias.has_value());
  EXPECT_GE(oracle::cosine(cav.vector, u), 0.99);
}

TEST(TrainCav, CombinedWithZeroLambdaEqualsOriginal) {
  const auto s = separable(4, 10, 5);
  oracle::Gen g(5);
  LgTrainPlan plan;
  plan.probe_features = testutil::to_matrix(g.rows(12, 5));
  plan.targets = g.vec(12, 0.2);
  plan.lambda = 0.0;
  const SgdConfig cfg{0.3, 50, 0, 11};
  const Cav a = train_cav(CavMode::original, CavTrainData{"c", s.pos, s.neg, std::nullopt}, cfg);
  const Cav b = train_cav(CavMode::combined, CavTrainData{"c", s.pos, s.neg, plan}, cfg);
  EXPECT_EQ(a.vector, b.vector);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.bias, b.bias);
}

TEST(TrainCav, SameSeedIsBitwiseRepeatable) {
  const auto s = separable(6, 10, 5);
  oracle::Gen g(7);
  LgTrainPlan plan;
  plan.probe_features = testutil::to_matrix(g.rows(20, 5));
  plan.targets = g.vec(20, 0.2);
  const CavTrainData data{"c", s.pos, s.neg, plan};
  const SgdConfig cfg{0.1, 40, 4, 99};
  const Cav a = train_cav(CavMode::combined, data, cfg);
  const Cav b = train_cav(CavMode::combined, data, cfg);
  EXPECT_EQ(a.vector, b.vector);
  EXPECT_EQ(a.trace, b.trace);
}

TEST(TrainCav, MissingInputsRejected) {
  const auto s = separable(6, 3, 2);
  EXPECT_EQ(error_code_of([&] { train_cav(CavMode::lg, CavTrainData{"c", s.pos, s.neg, std::nullopt}, {}); }),
            Errc::invalid_argument);
  EXPECT_EQ(error_code_of([&] { train_cav(CavMode::original, CavTrainData{"c", {}, {}, std::nullopt}, {}); }),
            Errc::invalid_argument);
}

TEST(LgPlan, WeightsMustHaveMeanOne) {
  LgTrainPlan plan;
  plan.probe_features = Matrix(2, 2, 1.0);
  plan.targets = {0.1, 0.2};
  plan.weights = {1.0, 2.0};
  EXPECT_EQ(error_code_of([&] { plan.validate(); }), Errc::invalid_argument);
}

TEST(LgPlan, BuildAlignsToTargetStatistics) {
  oracle::Gen g(30);
  const EmbeddingMatrix t(testutil::to_matrix(g.rows(40, 6)), testutil::ids(40));
  const EmbeddingMatrix vl(testutil::to_matrix(g.rows(40, 8)), testutil::ids(40));
  const auto probe = identity_probe(t, vl);
  const GaussianParams stats{0.05, 0.2};
  const auto [plan, info] = build_lg_plan(t, vl, g.vec(8), probe, stats, nullptr, 1.0);
  const auto e = estimate_gaussian(plan.targets);
  EXPECT_NEAR(e.params.mu, stats.mu, 1e-12);
  EXPECT_NEAR(e.params.sigma, stats.sigma, 1e-12);
  EXPECT_TRUE(info.aligned);
  EXPECT_FALSE(info.reweighted);
  EXPECT_TRUE(plan.weights.empty());
}
