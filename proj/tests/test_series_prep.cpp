#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <map>

#include "rnphi/series_prep.hpp"
#include "test_util.hpp"

using namespace rnphi;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int r, int c) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

Eigen::MatrixXd from_json(const nlohmann::json& j) {
  Eigen::MatrixXd m(j.size(), j[0].size());
  for (std::size_t i = 0; i < j.size(); ++i)
    for (std::size_t k = 0; k < j[i].size(); ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

PermutationSpec spatio(int seed, SpatioMode mode = SpatioMode::shared) {
  return {PermutationKind::Spatio, seed, mode};
}

PermutationSpec temporal(int seed) { return {PermutationKind::Temporal, seed}; }

}  // namespace

TEST(Concatenate, PreservesOrder) {
  Rng rng(1);
  const auto a = random_matrix(rng, 3, 4), b = random_matrix(rng, 2, 4);
  EXPECT_EQ(concatenate_series({a}), a);
  const auto ab = concatenate_series({a, b});
  ASSERT_EQ(ab.rows(), 5);
  EXPECT_EQ(ab.topRows(3), a);
  EXPECT_EQ(ab.bottomRows(2), b);
  EXPECT_THROW(concatenate_series({a, random_matrix(rng, 2, 5)}), ShapeError);
  EXPECT_THROW(concatenate_series({}), ValidationError);
}

TEST(Pca, ExactRankFourIsReconstructed) {
  Rng rng(2);
  const Eigen::MatrixXd X = random_matrix(rng, 30, 4) * random_matrix(rng, 4, 10);
  const auto r = pca_reduce(X, 4);
  const Eigen::MatrixXd back = (r.scores * r.components).rowwise() + r.column_means;
  EXPECT_LT((back - X).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Pca, InvariantsHold) {
  Rng rng(3);
  for (auto [t, d] : {std::pair{40, 6}, {10, 30}, {25, 25}}) {
    const auto r = pca_reduce(random_matrix(rng, t, d), 4);
    const Eigen::MatrixXd gram = r.components * r.components.transpose();
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(r.scores.colwise().mean().cwiseAbs().maxCoeff(), 1e-9);
    for (int i = 1; i < 4; ++i) EXPECT_GE(r.explained_variance(i - 1), r.explained_variance(i));
    for (int i = 0; i < 4; ++i) {
      Eigen::Index arg;
      r.components.row(i).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(r.components(i, arg), 0.0);
    }
  }
}

TEST(Pca, MatchesDenseEigensolverOracle) {
  const auto g = testutil::load_fixture("pca_golden.json");
  for (const auto& rec : g["records"]) {
    SCOPED_TRACE(rec["name"].get<std::string>());
    const auto X = from_json(rec["x"]);
    const auto r = pca_reduce(X, 4);
    const auto ev = rec["eigenvalues"].get<std::vector<double>>();
    const auto comps = from_json(rec["components"]);
    const auto scores = from_json(rec["scores"]);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(r.explained_variance(i), ev[i], 1e-9 * std::max(1.0, ev[0]));
    EXPECT_LT((r.components - comps).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((r.scores - scores).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Pca, RotationLeavesEigenvaluesUnchanged) {
  Rng rng(4);
  const auto X = random_matrix(rng, 50, 6);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, 6, 6));
  const Eigen::MatrixXd Q = qr.householderQ();
  const auto a = pca_reduce(X, 4), b = pca_reduce(X * Q, 4);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(a.explained_variance(i), b.explained_variance(i), 1e-8);
}

TEST(Pca, RejectsDegenerateInput) {
  Rng rng(5);
  EXPECT_THROW(pca_reduce(random_matrix(rng, 4, 8), 4), ValidationError);
  EXPECT_THROW(pca_reduce(random_matrix(rng, 10, 3), 4), ValidationError);
  EXPECT_THROW(pca_reduce(Eigen::MatrixXd::Constant(10, 6, 2.5), 4), ValidationError);
}

TEST(Binarize, Examples) {
  Eigen::MatrixXd s(4, 1);
  s << 1, 2, 3, 4;
  const auto b = standardize_binarize(s);
  EXPECT_EQ(b.at(0, 0), 0);
  EXPECT_EQ(b.at(1, 0), 0);
  EXPECT_EQ(b.at(2, 0), 1);
  EXPECT_EQ(b.at(3, 0), 1);
  EXPECT_NEAR(b.node_means[0], 0.0, 1e-15);
}

TEST(Binarize, ConstantNodeIsDegenerate) {
  Eigen::MatrixXd s(5, 3);
  s << 1, 7, 0, 2, 7, 1, 3, 7, 0, 4, 7, 1, 5, 7, 0;
  try {
    standardize_binarize(s);
    FAIL() << "expected a degenerate node";
  } catch (const DegenerateNodeError& e) {
    EXPECT_EQ(e.node(), 1);
  }
}

TEST(Binarize, SymmetricSeriesSplitsEvenly) {
  Eigen::MatrixXd s(6, 1);
  s << -3, 1, 2, -1, 3, -2;
  const auto b = standardize_binarize(s);
  int ones = 0;
  for (int t = 0; t < 6; ++t) ones += b.at(t, 0);
  EXPECT_EQ(ones, 3);
}

TEST(Binarize, BitIsPositiveZScore) {
  Rng rng(6);
  const auto s = random_matrix(rng, 50, 4);
  const auto b = standardize_binarize(s);
  for (int j = 0; j < 4; ++j) {
    const double mean = s.col(j).mean();
    for (int t = 0; t < 50; ++t) EXPECT_EQ(b.at(t, j), s(t, j) > mean ? 1 : 0);
  }
}

TEST(SpatioPermute, SharedModeIsInvertibleAndDeterministic) {
  Rng rng(7);
  const auto X = random_matrix(rng, 5, 9);
  const auto spec = spatio(44);
  const auto a = spatio_permute(X, spec, "row"), b = spatio_permute(X, spec, "row");
  EXPECT_EQ(a, b);
  const auto p = spatio_permutation(9, spec, "row");
  Eigen::MatrixXd back(5, 9);
  for (int j = 0; j < 9; ++j) back.col(p[j]) = a.col(j);
  EXPECT_EQ(back, X);
  for (int i = 0; i < 5; ++i) {
    std::vector<double> x(X.row(i).begin(), X.row(i).end()), y(a.row(i).begin(), a.row(i).end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    EXPECT_EQ(x, y);
  }
}

TEST(SpatioPermute, IdentityDrawLeavesInputUnchanged) {
  Rng rng(8);
  const auto X = random_matrix(rng, 3, 1);
  EXPECT_EQ(spatio_permute(X, spatio(42)), X);
}

TEST(SpatioPermute, PerTimepointModeDiffersByRow) {
  Eigen::MatrixXd X(2, 12);
  for (int j = 0; j < 12; ++j) X(0, j) = X(1, j) = j;
  const auto a = spatio_permute(X, spatio(45, SpatioMode::per_timepoint), "k");
  EXPECT_NE(a.row(0), a.row(1));
  EXPECT_EQ(a, spatio_permute(X, spatio(45, SpatioMode::per_timepoint), "k"));
}

TEST(SpatioPermute, SeedRangeEnforced) {
  EXPECT_THROW(spatio_permute(Eigen::MatrixXd::Ones(2, 2), spatio(41)), ValidationError);
  EXPECT_THROW(spatio_permute(Eigen::MatrixXd::Ones(2, 2), temporal(42)), ValidationError);
}

TEST(TemporalPermute, SingleItemAndDeterminism) {
  EXPECT_EQ(temporal_permute(std::vector<int>{7}, temporal(50)), std::vector<int>{7});
  std::vector<int> items{0, 1, 2, 3, 4, 5, 6};
  EXPECT_EQ(temporal_permute(items, temporal(43), "s"), temporal_permute(items, temporal(43), "s"));
}

TEST(TemporalPermute, UniformOverSeeds) {
  std::map<std::vector<int>, int> freq;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i)
    ++freq[temporal_permute(std::vector<int>{0, 1, 2}, temporal(42 + i % 10), "draw " + std::to_string(i / 10))];
  ASSERT_EQ(freq.size(), 6u);
  double chi2 = 0.0;
  for (auto& [k, c] : freq) chi2 += (c - draws / 6.0) * (c - draws / 6.0) / (draws / 6.0);
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(5), chi2));
  EXPECT_GT(p, 0.01);
}

TEST(SpanRepresentation, Examples) {
  Eigen::MatrixXd h(1, 4);
  h << 1, 2, 0, -1;
  EXPECT_EQ(span_representation(h, 0, 0), (std::vector<double>{1, 2, 0, -1, 1, 2, 0, -1, 1, 4, 0, 1, 0, 0, 0, 0}));
  Eigen::MatrixXd e(2, 4);
  e << 1, 0, 0, 0, 0, 1, 0, 0;
  EXPECT_EQ(span_representation(e, 0, 1), (std::vector<double>{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, -1, 0, 0}));
  EXPECT_THROW(span_representation(e, 1, 0), ValidationError);
  EXPECT_THROW(span_representation(e, 0, 2), ValidationError);
}

TEST(SpanRepresentation, MatchesDirectRecomputation) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_matrix(rng, 20, 4);
    const int a = static_cast<int>(rng.below(20));
    const int b = a + static_cast<int>(rng.below(20 - a));
    const auto v = span_representation(s, a, b);
    ASSERT_EQ(v.size(), 16u);
    for (int j = 0; j < 4; ++j) {
      EXPECT_NEAR(v[j], s(a, j), 1e-12);
      EXPECT_NEAR(v[4 + j], s(b, j), 1e-12);
      EXPECT_NEAR(v[8 + j], s(a, j) * s(b, j), 1e-12);
      EXPECT_NEAR(v[12 + j], s(a, j) - s(b, j), 1e-12);
    }
  }
}
