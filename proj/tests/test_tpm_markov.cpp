#include <gtest/gtest.h>

#include <cmath>

#include "rnphi/tpm_markov.hpp"
#include "test_util.hpp"

using namespace rnphi;

namespace {

/// First-order chain with a random kernel over S states.
StateSeq first_order_chain(Rng& rng, int S, int T) {
  std::vector<double> K(static_cast<std::size_t>(S) * S);
  for (int a = 0; a < S; ++a) {
    double s = 0.0;
    for (int b = 0; b < S; ++b) s += K[a * S + b] = rng.uniform();
    for (int b = 0; b < S; ++b) K[a * S + b] /= s;
  }
  StateSeq x{static_cast<int>(rng.below(S))};
  for (int t = 1; t < T; ++t) {
    const double u = rng.uniform();
    double c = 0.0;
    int b = 0;
    for (; b < S - 1; ++b) {
      c += K[x.back() * S + b];
      if (u < c) break;
    }
    x.push_back(b);
  }
  return x;
}

Tpm tpm_from_rows(const std::vector<double>& sbs, int nodes) {
  Tpm t;
  t.nodes = nodes;
  t.sbs = sbs;
  t.sbn = marginalize(sbs, nodes);
  t.visited.assign(t.states(), 1);
  t.counts.assign(sbs.size(), 0);
  return t;
}

}  // namespace

TEST(EncodeStates, LittleEndianConvention) {
  BinarySeries b;
  b.T = 3;
  b.nodes = 4;
  b.bits = {0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1};
  EXPECT_EQ(encode_states(b), (StateSeq{0, 1, 8}));
}

TEST(EncodeStates, RoundTripAllPatterns) {
  StateSeq all(16);
  for (int s = 0; s < 16; ++s) all[s] = s;
  EXPECT_EQ(encode_states(decode_states(all, 4)), all);
}

TEST(BuildTpm, Alternation) {
  const auto t = build_tpm({0, 1, 0, 1, 0});
  EXPECT_EQ(t.state_by_state(0, 1), 1.0);
  EXPECT_EQ(t.state_by_state(1, 0), 1.0);
  EXPECT_TRUE(t.visited[0] && t.visited[1] && !t.visited[2]);
  for (int b = 0; b < 16; ++b) EXPECT_EQ(t.state_by_state(7, b), 1.0 / 16);
}

TEST(BuildTpm, ConstantSequence) {
  const auto t = build_tpm({5, 5, 5});
  EXPECT_EQ(t.state_by_state(5, 5), 1.0);
  EXPECT_EQ(t.count(5, 5), 2);
  for (int a = 0; a < 16; ++a)
    if (a != 5)
      for (int b = 0; b < 16; ++b) EXPECT_EQ(t.state_by_state(a, b), 1.0 / 16);
}

TEST(BuildTpm, CountsMatchBruteForceRecount) {
  Rng rng(1);
  StateSeq s{static_cast<int>(rng.below(16))};
  for (int i = 0; i < 199; ++i) s.push_back(static_cast<int>((s.back() ^ (1u << rng.below(4))) & 15u));
  const auto t = build_tpm(s);
  for (int a = 0; a < 16; ++a)
    for (int b = 0; b < 16; ++b) {
      long n = 0;
      for (std::size_t i = 0; i + 1 < s.size(); ++i) n += s[i] == a && s[i + 1] == b;
      EXPECT_EQ(t.count(a, b), n);
    }
}

TEST(BuildTpm, RowsStochasticAndMarginalsConsistent) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = build_tpm(first_order_chain(rng, 16, 150));
    for (int a = 0; a < 16; ++a) {
      double row = 0.0;
      for (int b = 0; b < 16; ++b) {
        EXPECT_GE(t.state_by_state(a, b), 0.0);
        row += t.state_by_state(a, b);
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
    EXPECT_EQ(marginalize(t.sbs, 4), t.sbn);
  }
}

TEST(BuildTpm, RelabelingPermutesRowsAndColumns) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = first_order_chain(rng, 16, 200);
    auto perm = rng.permutation(4);
    StateSeq r(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) r[i] = static_cast<int>(testutil::relabel_state(s[i], perm));
    const auto a = build_tpm(s), b = build_tpm(r);
    for (unsigned x = 0; x < 16; ++x)
      for (unsigned y = 0; y < 16; ++y)
        EXPECT_EQ(a.state_by_state(x, y), b.state_by_state(testutil::relabel_state(x, perm), testutil::relabel_state(y, perm)));
  }
}

TEST(CiDistance, ProductOfNodeConditionalsIsZero) {
  Rng rng(4);
  std::vector<double> sbs(256);
  for (int a = 0; a < 16; ++a) {
    double q[4];
    for (double& v : q) v = rng.uniform();
    for (int b = 0; b < 16; ++b) {
      double p = 1.0;
      for (int j = 0; j < 4; ++j) p *= (b >> j & 1) ? q[j] : 1.0 - q[j];
      sbs[a * 16 + b] = p;
    }
  }
  EXPECT_NEAR(conditional_independence_distance(tpm_from_rows(sbs, 4)), 0.0, 1e-10);
}

TEST(CiDistance, JointlyConstrainedIsPositive) {
  // Next state is either 0000 or 1111, each with probability 1/2: nodes are perfectly coupled.
  std::vector<double> sbs(256, 0.0);
  for (int a = 0; a < 16; ++a) sbs[a * 16 + 0] = sbs[a * 16 + 15] = 0.5;
  EXPECT_GT(conditional_independence_distance(tpm_from_rows(sbs, 4)), 0.0);
}

TEST(CiDistance, HandBuiltTwoVisitedRows) {
  // Two visited rows over a 2-node system.
  Tpm t;
  t.nodes = 2;
  t.sbs = {0.5, 0.0, 0.0, 0.5, /**/ 0.25, 0.25, 0.25, 0.25, /**/ 0.1, 0.2, 0.3, 0.4, /**/ 0.25, 0.25, 0.25, 0.25};
  t.sbn = marginalize(t.sbs, 2);
  t.visited = {1, 0, 1, 0};
  t.counts.assign(16, 0);
  // Row 0: marginals (0.5, 0.5) -> product 0.25 each, |diff| = 0.25 * 4 = 1.0.
  // Row 2: marginals (0.6, 0.7) -> product (0.12, 0.18, 0.28, 0.42), |diff| = 0.02 + 0.02 + 0.02 + 0.02.
  const double expect = 100.0 * (1.0 + 0.08) / 2.0;
  EXPECT_NEAR(conditional_independence_distance(t), expect, 1e-12);
}

TEST(MarkovTest, DeterministicCycleHasZeroStatistic) {
  const auto r = markov_property_test({0, 1, 0, 1, 0, 1, 0, 1});
  EXPECT_EQ(r.g, 0.0);
  EXPECT_EQ(r.p, 1.0);
}

TEST(MarkovTest, UndefinedWithoutDistinctTransitions) {
  EXPECT_THROW(markov_property_test({3, 3, 3, 3}), TestUndefinedError);
  EXPECT_THROW(markov_property_test({1, 2}), TestUndefinedError);
}

TEST(MarkovTest, StatisticMatchesDirectFormula) {
  const StateSeq s{0, 1, 2, 1, 0, 1, 1, 2, 0, 1, 2, 2, 1, 0};
  double g = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        double n = 0, nab = 0, nbc = 0, nb = 0;
        for (std::size_t i = 0; i + 2 < s.size(); ++i) {
          n += s[i] == a && s[i + 1] == b && s[i + 2] == c;
          nab += s[i] == a && s[i + 1] == b;
          nbc += s[i + 1] == b && s[i + 2] == c;
          nb += s[i + 1] == b;
        }
        if (n > 0) g += 2 * n * std::log((n / nab) / (nbc / nb));
      }
  EXPECT_NEAR(markov_property_test(s).g, g, 1e-12);
}

TEST(MarkovTest, FirstOrderChainsCalibrated) {
  Rng rng(stream_seed("markov-calibration", 7));
  int rejected = 0;
  for (int i = 0; i < 500; ++i) rejected += markov_property_test(first_order_chain(rng, 4, 3000)).p < 0.05;
  const double rate = rejected / 500.0;
  EXPECT_GE(rate, 0.02);
  EXPECT_LE(rate, 0.09);
}

TEST(MarkovTest, PlantedSecondOrderRejected) {
  Rng rng(stream_seed("markov-power", 8));
  int rejected = 0;
  for (int i = 0; i < 200; ++i) {
    StateSeq s{static_cast<int>(rng.below(4)), static_cast<int>(rng.below(4))};
    for (int t = 2; t < 600; ++t)
      s.push_back(rng.uniform() < 0.3 ? s[t - 2] : static_cast<int>(rng.below(4)));
    rejected += markov_property_test(s).p < 0.05;
  }
  EXPECT_GE(rejected, 180);
}
