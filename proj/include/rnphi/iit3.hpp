#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "emd.hpp"
#include "error.hpp"
#include "repertoire.hpp"

namespace rnphi::iit3 {

using iit::Dist;
using iit::Mask;
using iit::Network;
using iit::Repertoires;
using iit::Severed;

enum class Direction { cause, effect };

inline constexpr double kPhiThreshold = 1e-10;
inline constexpr double kTieTolerance = 1e-10;
inline constexpr double kZeroPhi = 5e-13;

namespace detail {

inline std::vector<int> nodes_of(Mask m) {
  std::vector<int> v;
  for (int i = 0; m; ++i, m >>= 1)
    if (m & 1u) v.push_back(i);
  return v;
}

/// Nonempty or empty subsets of {0..n-1} by size, then lexicographically.
inline std::vector<Mask> powerset(int n, bool nonempty) {
  std::vector<Mask> out;
  if (!nonempty) out.push_back(0);
  for (int r = 1; r <= n; ++r) {
    std::vector<int> idx(r);
    for (int i = 0; i < r; ++i) idx[i] = i;
    for (;;) {
      Mask m = 0;
      for (int i : idx) m |= 1u << i;
      out.push_back(m);
      int i = r - 1;
      while (i >= 0 && idx[i] == n - r + i) --i;
      if (i < 0) break;
      ++idx[i];
      for (int k = i + 1; k < r; ++k) idx[k] = idx[k - 1] + 1;
    }
  }
  return out;
}

/// Unordered bipartitions of a node set as (part0, part1).
inline std::vector<std::pair<Mask, Mask>> bipartitions(Mask set) {
  const auto nodes = nodes_of(set);
  const int k = static_cast<int>(nodes.size());
  std::vector<std::pair<Mask, Mask>> out;
  if (k == 0) return out;
  for (int i = 0; i < (1 << (k - 1)); ++i) {
    Mask a = 0, b = 0;
    for (int j = 0; j < k; ++j) ((i >> j) & 1 ? a : b) |= 1u << nodes[j];
    out.emplace_back(a, b);
  }
  return out;
}

/// Ordered bipartitions: the unordered list followed by its reversal with
/// each pair swapped.
inline std::vector<std::pair<Mask, Mask>> directed_bipartitions(Mask set) {
  auto out = bipartitions(set);
  const std::size_t k = out.size();
  for (std::size_t i = k; i-- > 0;) out.emplace_back(out[i].second, out[i].first);
  return out;
}

/// Whether every connection between the two node sets can be separated
/// trivially, under the connectivity left by a cut.
inline bool block_reducible(const Severed& cut, Mask from, Mask to) {
  if (!from || !to) return true;
  const auto rows = nodes_of(from);
  const auto cols = nodes_of(to);
  const int r = static_cast<int>(rows.size()), c = static_cast<int>(cols.size());
  auto conn = [&](int i, int j) { return !(cut.in[cols[j]] >> rows[i] & 1u); };
  std::vector<int> rs(r, 0), cs(c, 0);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      if (conn(i, j)) ++rs[i], ++cs[j];
  for (int v : rs)
    if (!v) return true;
  for (int v : cs)
    if (!v) return true;
  if (r < 2 || c < 2) return false;
  if (std::all_of(rs.begin(), rs.end(), [](int v) { return v == 1; })) return true;
  auto outputs_of = [&](unsigned src) {
    unsigned o = 0;
    for (int i = 0; i < r; ++i)
      if (src >> i & 1u)
        for (int j = 0; j < c; ++j)
          if (conn(i, j)) o |= 1u << j;
    return o;
  };
  auto inputs_to = [&](unsigned snk) {
    unsigned o = 0;
    for (int j = 0; j < c; ++j)
      if (snk >> j & 1u)
        for (int i = 0; i < r; ++i)
          if (conn(i, j)) o |= 1u << i;
    return o;
  };
  const unsigned all_outputs = (1u << c) - 1u;
  unsigned sources = 1u << (std::max_element(rs.begin(), rs.end()) - rs.begin());
  unsigned sinks = outputs_of(sources);
  unsigned sink_inputs = inputs_to(sinks);
  for (;;) {
    if (sink_inputs == sources) return true;
    sources = sink_inputs;
    sinks = outputs_of(sources);
    sink_inputs = inputs_to(sinks);
    if (sinks == all_outputs) return false;
  }
}

}  // namespace detail

/// Irreducibility analysis of one mechanism over one purview.
struct Ria {
  Mask mechanism = 0;
  Mask purview = 0;
  double phi = 0.0;
  Dist repertoire;
};

struct Concept {
  Mask mechanism = 0;
  double phi = 0.0;
  Ria cause;
  Ria effect;
};

struct Ces {
  std::vector<Concept> concepts;
};

struct Phi3Result {
  double phi = 0.0;
  std::vector<double> ci;  // indexed by mechanism bitmask
  unsigned state = 0;
  Mask cut_from = 0, cut_to = 0;
};

inline double repertoire_distance(Direction d, const Dist& a, const Dist& b) {
  if (a.purview != b.purview) throw ShapeError("repertoire distance: purview mismatch");
  if (d == Direction::cause) return hamming_emd(a.values(), b.values());
  // Effect repertoires are products of node marginals, so the EMD reduces to
  // the sum of per-node marginal differences.
  double s = 0.0;
  for (Mask m = a.purview; m; m &= m - 1) {
    const int node = std::countr_zero(m);
    s += std::abs(a.marginal_on(node) - b.marginal_on(node));
  }
  return s;
}

/// IIT 3.0 analysis of the full system of a binary network in one state.
class Analyzer {
 public:
  Analyzer(Network net, unsigned state) : net_(std::move(net)), state_(state), base_(net_, Severed::none()) {
    if (state_ >= static_cast<unsigned>(net_.states())) throw ValidationError("state out of range");
  }

  const Network& network() const { return net_; }
  unsigned state() const { return state_; }

  Dist cause_repertoire(Mask mechanism, Mask purview) const { return base_.cause(mechanism, purview, state_); }
  Dist effect_repertoire(Mask mechanism, Mask purview) const { return base_.effect(mechanism, purview, state_); }

  Dist repertoire(const Repertoires& r, Direction d, Mask m, Mask z) const {
    return d == Direction::cause ? r.cause(m, z, state_) : r.effect(m, z, state_);
  }

  /// Minimum over mechanism/purview bipartitions of the distance between the
  /// whole and the partitioned repertoire.
  Ria find_mip(const Repertoires& r, Direction d, Mask mechanism, Mask purview) const {
    Ria out;
    out.mechanism = mechanism;
    out.purview = purview;
    if (!purview) return out;
    out.repertoire = repertoire(r, d, mechanism, purview);
    if (d == Direction::cause && out.repertoire.all_zero()) return out;
    double best = std::numeric_limits<double>::infinity();
    const auto nums = detail::bipartitions(mechanism);
    const auto dens = detail::directed_bipartitions(purview);
    for (const auto& [m0, m1] : nums) {
      for (const auto& [z0, z1] : dens) {
        if (!((m0 || z0) && (m1 || z1))) continue;
        const Dist part = iit::product(repertoire(r, d, m0, z0), repertoire(r, d, m1, z1));
        double phi;
        if (d == Direction::cause) {
          if (part == out.repertoire) {
            phi = 0.0;
          } else {
            if (hamming_emd_lower_bound(out.repertoire.values(), part.values()) >= best) continue;
            phi = hamming_emd(out.repertoire.values(), part.values());
          }
        } else {
          phi = repertoire_distance(d, out.repertoire, part);
        }
        if (phi <= kZeroPhi) {
          out.phi = 0.0;
          return out;
        }
        if (phi < best) best = phi;
      }
    }
    out.phi = std::isinf(best) ? 0.0 : best;
    return out;
  }

  /// Maximally irreducible cause or effect over all admissible purviews.
  Ria find_mice(const Repertoires& r, Direction d, Mask mechanism) const {
    Ria best;
    best.mechanism = mechanism;
    bool have = false;
    for (Mask z : purviews_) {
      const bool red = d == Direction::cause ? detail::block_reducible(r.cut(), z, mechanism)
                                             : detail::block_reducible(r.cut(), mechanism, z);
      if (red) continue;
      Ria cand = find_mip(r, d, mechanism, z);
      if (!have || cand.phi > best.phi + kTieTolerance ||
          (std::abs(cand.phi - best.phi) <= kTieTolerance && iit::popcount(z) > iit::popcount(best.purview))) {
        best = cand;
        have = true;
      }
    }
    if (!have) {
      best.purview = 0;
      best.phi = 0.0;
      best.repertoire = Dist::over(0);
      best.repertoire.p[0] = 1.0;
    }
    return best;
  }

  Concept concept_of(Mask mechanism) const { return concept_under(base_, mechanism, nullptr); }

  Ces ces() const {
    Ces c;
    for (Mask m : mechanisms_) {
      Concept k = concept_of(m);
      if (k.phi > kPhiThreshold) c.concepts.push_back(std::move(k));
    }
    return c;
  }

  /// Distance between a concept and the null concept.
  double null_distance(const Concept& c) const { return concept_distance(c, null_concept()); }

  double concept_distance(const Concept& a, const Concept& b) const {
    const Mask cz = a.cause.purview | b.cause.purview;
    const Mask ez = a.effect.purview | b.effect.purview;
    return repertoire_distance(Direction::cause, expand(Direction::cause, a.cause.repertoire, cz),
                               expand(Direction::cause, b.cause.repertoire, cz)) +
           repertoire_distance(Direction::effect, expand(Direction::effect, a.effect.repertoire, ez),
                               expand(Direction::effect, b.effect.repertoire, ez));
  }

  /// Extended EMD between two constellations. `attrib` (indexed by mechanism
  /// bitmask) receives each mechanism's share of the distance.
  double ces_distance(const Ces& c1, const Ces& c2, std::vector<double>* attrib = nullptr) const {
    std::vector<double> local(std::size_t{1} << net_.n, 0.0);
    auto only_in = [&](const Ces& x, const Ces& y) {
      std::vector<const Concept*> out;
      for (const auto& a : x.concepts) {
        bool found = false;
        for (const auto& b : y.concepts)
          if (same_concept(a, b)) {
            found = true;
            break;
          }
        if (!found) out.push_back(&a);
      }
      return out;
    };
    const auto u1 = only_in(c1, c2);
    const auto u2 = only_in(c2, c1);
    if (u1.empty() || u2.empty()) {
      const bool swap = c2.concepts.size() > c1.concepts.size();
      const auto destroyed = swap ? u2 : u1;
      for (const Concept* c : destroyed) local[c->mechanism] += c->phi * null_distance(*c);
    } else {
      const std::size_t n = u1.size(), m = u2.size();
      std::vector<double> cost((n + 1) * (m + 1), 0.0);
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) cost[i * (m + 1) + j] = concept_distance(*u1[i], *u2[j]);
        cost[i * (m + 1) + m] = null_distance(*u1[i]);
        s1 += u1[i]->phi;
      }
      for (std::size_t j = 0; j < m; ++j) {
        cost[n * (m + 1) + j] = null_distance(*u2[j]);
        s2 += u2[j]->phi;
      }
      std::vector<double> supply(n + 1, 0.0), demand(m + 1, 0.0);
      for (std::size_t i = 0; i < n; ++i) supply[i] = u1[i]->phi;
      for (std::size_t j = 0; j < m; ++j) demand[j] = u2[j]->phi;
      const double diff = s1 - s2;
      if (diff >= 0) {
        demand[m] = diff;
      } else {
        supply[n] = -diff;
      }
      std::vector<double> plan;
      transport(supply, demand, cost, &plan);
      for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t j = 0; j <= m; ++j) {
          const double f = plan[i * (m + 1) + j];
          if (f <= 0.0) continue;
          const double term = f * cost[i * (m + 1) + j];
          if (i < n) {
            local[u1[i]->mechanism] += term;
          } else if (j < m) {
            local[u2[j]->mechanism] += term;
          }
        }
    }
    double total = 0.0;
    for (std::size_t i = 1; i < local.size(); ++i) total += local[i];
    if (attrib) *attrib = std::move(local);
    return total;
  }

  /// Full-system integrated information with its per-mechanism decomposition.
  Phi3Result big_phi() const {
    Phi3Result res;
    res.state = state_;
    res.ci.assign(std::size_t{1} << net_.n, 0.0);
    if (net_.n < 2) return res;
    if (!net_.reachable(state_)) throw StateUnreachableError("state " + std::to_string(state_) + " is unreachable");

    std::vector<std::optional<Ria>> cache_c(res.ci.size()), cache_e(res.ci.size());
    Ces whole;
    for (Mask m : mechanisms_) {
      Concept k = concept_under(base_, m, nullptr);
      if (k.cause.phi > 0.0) cache_c[m] = k.cause;
      if (k.effect.phi > 0.0) cache_e[m] = k.effect;
      if (k.phi > kPhiThreshold) whole.concepts.push_back(std::move(k));
    }
    if (whole.concepts.empty()) return res;

    double best = std::numeric_limits<double>::infinity();
    const auto cuts = detail::directed_bipartitions(net_.all());
    for (std::size_t ci = 1; ci + 1 < cuts.size(); ++ci) {
      const auto [from, to] = cuts[ci];
      const Severed sev = Severed::directed(from, to, net_.n);
      const Repertoires cut_rep(net_, sev);
      Ces part;
      for (Mask m : mechanisms_) {
        const bool split = (m & from) && (m & to);
        bool in_whole = false;
        for (const auto& k : whole.concepts) in_whole = in_whole || k.mechanism == m;
        if (!split && !in_whole) continue;
        const Reuse reuse{&cache_c, &cache_e};
        Concept k = concept_under(cut_rep, m, &reuse);
        if (k.phi > kPhiThreshold) part.concepts.push_back(std::move(k));
      }
      std::vector<double> attrib;
      const double phi = ces_distance(whole, part, &attrib);
      if (phi <= kZeroPhi) {
        res.phi = 0.0;
        std::fill(res.ci.begin(), res.ci.end(), 0.0);
        res.cut_from = from;
        res.cut_to = to;
        return res;
      }
      if (phi < best) {
        best = phi;
        res.phi = phi;
        res.ci = std::move(attrib);
        res.cut_from = from;
        res.cut_to = to;
      }
    }
    return res;
  }

 private:
  struct Reuse {
    const std::vector<std::optional<Ria>>* cause;
    const std::vector<std::optional<Ria>>* effect;
  };

  static bool same_concept(const Concept& a, const Concept& b) {
    if (a.mechanism != b.mechanism || std::abs(a.phi - b.phi) > kTieTolerance) return false;
    auto close = [](const Dist& x, const Dist& y) {
      if (x.purview != y.purview) return false;
      for (int i = 0; i < x.size; ++i)
        if (std::abs(x.p[i] - y.p[i]) > 1e-12) return false;
      return true;
    };
    return close(a.cause.repertoire, b.cause.repertoire) && close(a.effect.repertoire, b.effect.repertoire);
  }

  Concept null_concept() const {
    Concept c;
    c.cause.purview = net_.all();
    c.cause.repertoire = base_.unconstrained_cause(net_.all());
    c.effect.purview = net_.all();
    c.effect.repertoire = base_.unconstrained_effect(net_.all());
    return c;
  }

  Dist expand(Direction d, const Dist& r, Mask to) const {
    const Mask extra = to & ~r.purview;
    if (!extra) return r;
    const Dist uc = d == Direction::cause ? base_.unconstrained_cause(extra) : base_.unconstrained_effect(extra);
    Dist out = iit::product(r, uc);
    out.normalize();
    return out;
  }

  /// A cached uncut result is reused unless the cut touches the mechanism or
  /// the connections between it and the cached purview.
  Ria mice_under(const Repertoires& r, Direction d, Mask m, const Reuse* reuse) const {
    if (reuse) {
      const auto& slot = d == Direction::cause ? (*reuse->cause)[m] : (*reuse->effect)[m];
      if (slot) {
        const Severed& cut = r.cut();
        const bool damaged = cut.severs(m, m) || (d == Direction::cause ? cut.severs(slot->purview, m)
                                                                        : cut.severs(m, slot->purview));
        if (!damaged) return *slot;
      }
    }
    return find_mice(r, d, m);
  }

  Concept concept_under(const Repertoires& r, Mask m, const Reuse* reuse) const {
    Concept c;
    c.mechanism = m;
    c.cause = mice_under(r, Direction::cause, m, reuse);
    c.effect = mice_under(r, Direction::effect, m, reuse);
    c.phi = std::min(c.cause.phi, c.effect.phi);
    return c;
  }

  Network net_;
  unsigned state_;
  Repertoires base_;
  std::vector<Mask> purviews_ = detail::powerset(net_.n, true);
  std::vector<Mask> mechanisms_ = detail::powerset(net_.n, true);
};

/// State-frequency weighted mean of per-state values. States with zero
/// weight may be absent from `values`.
inline double state_weighted_average(const std::vector<std::optional<double>>& values,
                                     const std::vector<double>& alpha) {
  if (values.size() != alpha.size()) throw ShapeError("state weights and values differ in length");
  double mu = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (alpha[j] == 0.0) continue;
    if (!values[j]) throw ValidationError("missing value for weighted state " + std::to_string(j));
    mu += alpha[j] * *values[j];
  }
  return mu;
}

inline std::vector<double> state_weighted_average(const std::vector<std::optional<std::vector<double>>>& values,
                                                  const std::vector<double>& alpha) {
  if (values.size() != alpha.size()) throw ShapeError("state weights and values differ in length");
  std::vector<double> mu;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (alpha[j] == 0.0) continue;
    if (!values[j]) throw ValidationError("missing value for weighted state " + std::to_string(j));
    if (mu.empty()) mu.assign(values[j]->size(), 0.0);
    if (values[j]->size() != mu.size()) throw ShapeError("per-state vectors differ in length");
    for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += alpha[j] * (*values[j])[i];
  }
  return mu;
}

}  // namespace rnphi::iit3
