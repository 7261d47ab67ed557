#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numeric>

#include "rnphi/iit4.hpp"
#include "test_util.hpp"

using namespace rnphi;
using namespace rnphi::iit4;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(Iit4IntrinsicDifference, EqualDistributionsGiveZero) {
  std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(intrinsic_difference(p, p), 0.0);
}

TEST(Iit4IntrinsicDifference, PointMassAgainstUniform) {
  std::vector<double> p(16, 0.0), q(16, 1.0 / 16);
  p[9] = 1.0;
  EXPECT_NEAR(intrinsic_difference(p, q), 4.0, 1e-15);
}

TEST(Iit4IntrinsicDifference, MatchesDirectFormula) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(8), q(8);
    double sp = 0, sq = 0;
    for (int i = 0; i < 8; ++i) {
      p[i] = rng.uniform();
      q[i] = rng.uniform() + 1e-3;
      sp += p[i];
      sq += q[i];
    }
    double expect = -1e300;
    for (int i = 0; i < 8; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    for (int i = 0; i < 8; ++i) expect = std::max(expect, p[i] * std::log(p[i] / q[i]) / std::log(2.0));
    EXPECT_NEAR(intrinsic_difference(p, q), expect, 1e-12);
  }
}

TEST(Iit4IntrinsicDifference, ZeroReferenceMassIsInfinite) {
  std::vector<double> p{0.5, 0.5}, q{1.0, 0.0};
  EXPECT_TRUE(std::isinf(intrinsic_difference(p, q)));
}

TEST(Iit4Partitions, CountsForSmallSets) {
  // One mechanism unit: only the full disconnection.
  EXPECT_EQ(detail::partitions(0b1, 0b110).size(), 1u);
  // Two units: the full disconnection plus 3^|Z| labelings of the split.
  EXPECT_EQ(detail::partitions(0b11, 0b100).size(), 1u + 3u);
  EXPECT_EQ(detail::partitions(0b11, 0b1100).size(), 1u + 9u);
  // Three units: 1 + 3 * 3^1 + 1 * 4^1 for a one-unit purview.
  EXPECT_EQ(detail::partitions(0b111, 0b1000).size(), 1u + 9u + 4u);
  for (const auto& p : detail::partitions(0b1011, 0b0110)) EXPECT_GE(p.cut, 1);
}

TEST(Iit4Distinction, CopyNetworkMatchesOracle) {
  const auto g = testutil::load_fixture("iit4_golden.json");
  for (const auto& r : g["records"]) {
    if (r["name"] != "copy2_s1") continue;
    Analyzer a(testutil::network_from_json(r["tpm"]), r["state"].get<unsigned>());
    auto d = a.distinction(0b01);
    ASSERT_TRUE(d.has_value());
    double expect = -1;
    for (const auto& e : r["distinctions"])
      if (e["mechanism"] == 1) expect = e["phi"].get<double>();
    EXPECT_NEAR(d->phi, expect, 1e-9);
    EXPECT_EQ(d->cause.purview, 0b10u);
    EXPECT_EQ(d->effect.purview, 0b10u);
    return;
  }
  FAIL() << "copy2_s1 missing from fixtures";
}

TEST(Iit4Distinction, ProductTpmHasNone) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Analyzer a(testutil::product_network(rng, 4), static_cast<unsigned>(rng.below(16)));
    EXPECT_TRUE(a.distinctions().empty());
  }
}

TEST(Iit4Distinction, PhiIsNonNegative) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    auto net = testutil::random_network(rng, 3);
    Analyzer a(net, static_cast<unsigned>(rng.below(8)));
    for (Mask m = 1; m < 8; ++m) {
      for (Direction d : {Direction::cause, Direction::effect}) EXPECT_GE(a.best_face(d, m).phi, 0.0);
    }
  }
}

TEST(Iit4Relations, NoDistinctionsNoRelations) {
  std::vector<Distinction> none;
  EXPECT_TRUE(relations(none).empty());
  EXPECT_EQ(relation_sum(none, nullptr), 0.0);
}

TEST(Iit4Relations, DisjointPurviewsGiveNone) {
  Distinction a, b;
  a.mechanism = 1;
  a.phi = 0.5;
  a.cause.purview = 0b0001;
  a.effect.purview = 0b0010;
  b.mechanism = 2;
  b.phi = 0.25;
  b.cause.purview = 0b0100;
  b.effect.purview = 0b1000;
  std::vector<Distinction> ds{a, b};
  EXPECT_TRUE(relations(ds).empty());
  EXPECT_EQ(relation_sum(ds, nullptr), 0.0);
}

TEST(Iit4Relations, SelfRelationOfOneDistinction) {
  Distinction a;
  a.mechanism = 3;
  a.phi = 0.6;
  a.cause.purview = 0b011;
  a.cause.state = 0b001;
  a.effect.purview = 0b110;
  a.effect.state = 0b000;
  // Overlap {1}, both faces specify unit 1 off: one relation of weight 0.6 / 4.
  std::vector<Distinction> ds{a};
  const auto rel = relations(ds);
  ASSERT_EQ(rel.size(), 1u);
  EXPECT_EQ(rel[0].overlap, 0b010u);
  EXPECT_NEAR(rel[0].phi, 0.15, 1e-15);
  std::vector<double> attr;
  EXPECT_NEAR(relation_sum(ds, &attr), 0.15, 1e-15);
  EXPECT_NEAR(attr[0], 0.15, 1e-15);
}

TEST(Iit4Relations, IncongruentOverlapGivesNone) {
  Distinction a;
  a.mechanism = 1;
  a.phi = 0.6;
  a.cause.purview = 0b1;
  a.cause.state = 0b1;
  a.effect.purview = 0b1;
  a.effect.state = 0b0;
  std::vector<Distinction> ds{a};
  EXPECT_TRUE(relations(ds).empty());
  EXPECT_EQ(relation_sum(ds, nullptr), 0.0);
}

TEST(Iit4Relations, ClosedFormMatchesEnumeration) {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(2));
    auto net = testutil::random_network(rng, n);
    Analyzer a(net, static_cast<unsigned>(rng.below(1u << n)));
    const auto ds = a.distinctions();
    const auto rel = relations(ds);
    std::vector<double> brute(ds.size(), 0.0);
    double total = 0.0;
    for (const auto& r : rel) {
      total += r.phi;
      for (Mask m : r.mechanisms)
        for (std::size_t i = 0; i < ds.size(); ++i)
          if (ds[i].mechanism == m) brute[i] += r.phi / static_cast<double>(r.mechanisms.size());
    }
    std::vector<double> attr;
    const double closed = relation_sum(ds, &attr);
    EXPECT_NEAR(closed, total, 1e-9 * (1.0 + total));
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_NEAR(attr[i], brute[i], 1e-9 * (1.0 + total));
  }
}

TEST(Iit4PhiStructure, MatchesOracleGoldens) {
  const auto g = testutil::load_fixture("iit4_golden.json");
  ASSERT_GE(g["records"].size(), 20u);
  for (const auto& r : g["records"]) {
    SCOPED_TRACE(r["name"].get<std::string>());
    const auto res = phi_structure_full_subsystem(testutil::network_from_json(r["tpm"]), r["state"].get<unsigned>());
    const double phi = r["phi"].get<double>();
    EXPECT_NEAR(res.phi, phi, 1e-6 * std::max(1.0, phi));
    EXPECT_NEAR(res.distinction_sum, r["distinction_sum"].get<double>(), 1e-6);
    EXPECT_NEAR(sum(res.structure), res.phi, 1e-9 * std::max(1.0, res.phi));
    ASSERT_EQ(res.distinctions.size(), r["distinctions"].size());
    for (std::size_t i = 0; i < res.distinctions.size(); ++i) {
      const auto& e = r["distinctions"][i];
      EXPECT_EQ(res.distinctions[i].mechanism, e["mechanism"].get<unsigned>());
      EXPECT_EQ(res.distinctions[i].cause.purview, e["cause_purview"].get<unsigned>());
      EXPECT_EQ(res.distinctions[i].effect.purview, e["effect_purview"].get<unsigned>());
      EXPECT_EQ(res.distinctions[i].cause.state, e["cause_state"].get<unsigned>());
      EXPECT_EQ(res.distinctions[i].effect.state, e["effect_state"].get<unsigned>());
      EXPECT_NEAR(res.distinctions[i].phi, e["phi"].get<double>(), 1e-9);
    }
    for (std::size_t m = 0; m < res.structure.size(); ++m)
      EXPECT_NEAR(res.structure[m], r["structure"][m].get<double>(), 1e-6 * std::max(1.0, phi));
  }
}

TEST(Iit4PhiStructure, ProductTpmIsZero) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto res = phi_structure_full_subsystem(testutil::product_network(rng, 4), static_cast<unsigned>(rng.below(16)));
    EXPECT_LE(res.phi, 1e-10);
    for (double v : res.structure) EXPECT_EQ(v, 0.0);
  }
}

TEST(Iit4PhiStructure, NoDistinctionsImpliesZero) {
  Rng rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const auto res = phi_structure_full_subsystem(testutil::product_network(rng, 3), static_cast<unsigned>(rng.below(8)));
    EXPECT_TRUE(res.distinctions.empty());
    EXPECT_EQ(res.relation_sum, 0.0);
    EXPECT_EQ(res.phi, 0.0);
  }
}

TEST(Iit4PhiStructure, DecompositionIdentity) {
  Rng rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    const auto res = phi_structure_full_subsystem(testutil::random_network(rng, 4), static_cast<unsigned>(rng.below(16)));
    EXPECT_NEAR(sum(res.structure), res.phi, 1e-9 * std::max(1.0, res.phi));
    EXPECT_NEAR(res.distinction_sum + res.relation_sum, res.phi, 1e-9 * std::max(1.0, res.phi));
    EXPECT_EQ(res.structure[0], 0.0);
    for (double v : res.structure) EXPECT_GE(v, 0.0);
  }
}

TEST(Iit4PhiStructure, RelabelingInvariance) {
  Rng rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    auto net = testutil::random_network(rng, 4);
    const unsigned s = static_cast<unsigned>(rng.below(16));
    auto perm = rng.permutation(4);
    std::vector<int> p(perm.begin(), perm.end());
    const auto a = phi_structure_full_subsystem(net, s);
    const auto b = phi_structure_full_subsystem(testutil::relabel(net, p), testutil::relabel_state(s, p));
    EXPECT_NEAR(a.phi, b.phi, 1e-9 * std::max(1.0, a.phi));
    for (unsigned m = 0; m < 16; ++m)
      EXPECT_NEAR(a.structure[m], b.structure[testutil::relabel_state(m, p)], 1e-9 * std::max(1.0, a.phi));
  }
}

TEST(Iit4PhiStructure, UnreachableStateThrows) {
  // Node 0 is always on next, so any state with it off cannot arise.
  std::vector<double> rows;
  for (int s = 0; s < 4; ++s) rows.insert(rows.end(), {1.0, 0.5});
  auto net = Network::from_state_by_node(2, rows);
  EXPECT_THROW(Analyzer(net, 0b10), StateUnreachableError);
  EXPECT_NO_THROW(Analyzer(net, 0b01));
}

TEST(Iit4PhiStructure, FourNodeStateIsFast) {
  Rng rng(35);
  auto net = testutil::random_network(rng, 4);
  const auto t0 = std::chrono::steady_clock::now();
  phi_structure_full_subsystem(net, 6);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 10.0);
}
