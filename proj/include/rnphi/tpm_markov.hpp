#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "error.hpp"
#include "repertoire.hpp"
#include "series_prep.hpp"

namespace rnphi {

using StateSeq = std::vector<int>;

/// Little-endian state codes: node j contributes bit j.
inline StateSeq encode_states(const BinarySeries& b) {
  if (b.nodes < 1 || b.nodes > iit::kMaxNodes) throw ValidationError("state encoding supports 1 to 5 nodes");
  StateSeq s(b.T);
  for (int t = 0; t < b.T; ++t) {
    int v = 0;
    for (int j = 0; j < b.nodes; ++j) v |= b.at(t, j) << j;
    s[t] = v;
  }
  return s;
}

inline BinarySeries decode_states(const StateSeq& s, int nodes) {
  BinarySeries b;
  b.T = static_cast<int>(s.size());
  b.nodes = nodes;
  b.bits.resize(s.size() * nodes);
  for (int t = 0; t < b.T; ++t)
    for (int j = 0; j < nodes; ++j) b.bits[static_cast<std::size_t>(t) * nodes + j] = (s[t] >> j) & 1;
  b.node_means.assign(nodes, 0.0);
  return b;
}

struct Tpm {
  int nodes = 4;
  std::vector<double> sbs;      // S x S
  std::vector<double> sbn;      // S x nodes
  std::vector<char> visited;    // S
  std::vector<long> counts;     // S x S

  int states() const { return 1 << nodes; }
  double state_by_state(int a, int b) const { return sbs[static_cast<std::size_t>(a) * states() + b]; }
  double state_by_node(int a, int j) const { return sbn[static_cast<std::size_t>(a) * nodes + j]; }
  long count(int a, int b) const { return counts[static_cast<std::size_t>(a) * states() + b]; }

  iit::Network network() const { return iit::Network::from_state_by_node(nodes, sbn); }
};

/// Marginal on-probabilities of each node from a state-by-state matrix.
inline std::vector<double> marginalize(const std::vector<double>& sbs, int nodes) {
  const int S = 1 << nodes;
  std::vector<double> sbn(static_cast<std::size_t>(S) * nodes, 0.0);
  for (int a = 0; a < S; ++a)
    for (int b = 0; b < S; ++b)
      for (int j = 0; j < nodes; ++j)
        if (b >> j & 1) sbn[static_cast<std::size_t>(a) * nodes + j] += sbs[static_cast<std::size_t>(a) * S + b];
  return sbn;
}

/// Empirical transition matrix; rows never left are uniform.
inline Tpm build_tpm(const StateSeq& s, int nodes = 4) {
  if (s.size() < 2) throw ValidationError("a TPM needs at least 2 time points");
  Tpm t;
  t.nodes = nodes;
  const int S = t.states();
  t.counts.assign(static_cast<std::size_t>(S) * S, 0);
  t.visited.assign(S, 0);
  for (int v : s)
    if (v < 0 || v >= S) throw ValidationError("state " + std::to_string(v) + " out of range");
  for (std::size_t i = 0; i + 1 < s.size(); ++i) ++t.counts[static_cast<std::size_t>(s[i]) * S + s[i + 1]];
  t.sbs.assign(static_cast<std::size_t>(S) * S, 0.0);
  for (int a = 0; a < S; ++a) {
    long total = 0;
    for (int b = 0; b < S; ++b) total += t.count(a, b);
    t.visited[a] = total > 0;
    for (int b = 0; b < S; ++b)
      t.sbs[static_cast<std::size_t>(a) * S + b] =
          total > 0 ? static_cast<double>(t.count(a, b)) / static_cast<double>(total) : 1.0 / S;
  }
  t.sbn = marginalize(t.sbs, nodes);
  return t;
}

/// Percent L1 gap between the TPM and the product of its node marginals,
/// averaged over visited rows.
inline double conditional_independence_distance(const Tpm& t) {
  const int S = t.states();
  double num = 0.0, den = 0.0;
  for (int a = 0; a < S; ++a) {
    if (!t.visited[a]) continue;
    for (int b = 0; b < S; ++b) {
      double ci = 1.0;
      for (int j = 0; j < t.nodes; ++j) ci *= (b >> j & 1) ? t.state_by_node(a, j) : 1.0 - t.state_by_node(a, j);
      num += std::abs(t.state_by_state(a, b) - ci);
      den += t.state_by_state(a, b);
    }
  }
  if (den == 0.0) throw ValidationError("TPM has no visited rows");
  return 100.0 * num / den;
}

struct MarkovTest {
  double g = 0.0;
  int df = 0;
  double p = 1.0;
};

/// Likelihood-ratio test of first- against second-order dependence.
inline MarkovTest markov_property_test(const StateSeq& s) {
  if (s.size() < 3) throw TestUndefinedError("Markov test needs at least 3 time points");
  std::set<std::pair<int, int>> transitions;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) transitions.insert({s[i], s[i + 1]});
  if (transitions.size() < 2) throw TestUndefinedError("fewer than 2 distinct transitions observed");

  std::map<std::tuple<int, int, int>, long> nabc;
  std::map<std::pair<int, int>, long> nab, nbc;
  std::map<int, long> nb;
  for (std::size_t i = 0; i + 2 < s.size(); ++i) {
    const int a = s[i], b = s[i + 1], c = s[i + 2];
    ++nabc[{a, b, c}];
    ++nab[{a, b}];
    ++nbc[{b, c}];
    ++nb[b];
  }
  MarkovTest r;
  for (const auto& [k, n] : nabc) {
    const auto [a, b, c] = k;
    const double second = static_cast<double>(n) / static_cast<double>(nab[{a, b}]);
    const double first = static_cast<double>(nbc[{b, c}]) / static_cast<double>(nb[b]);
    r.g += 2.0 * static_cast<double>(n) * std::log(second / first);
  }
  std::map<int, std::set<int>> pred, succ;
  for (const auto& [k, n] : nabc) {
    pred[std::get<1>(k)].insert(std::get<0>(k));
    succ[std::get<1>(k)].insert(std::get<2>(k));
  }
  for (const auto& [b, ps] : pred)
    r.df += (static_cast<int>(ps.size()) - 1) * (static_cast<int>(succ[b].size()) - 1);
  r.g = std::max(0.0, r.g);
  r.p = r.df > 0 ? boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.df), r.g)) : 1.0;
  return r;
}

}  // namespace rnphi
