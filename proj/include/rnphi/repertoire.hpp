#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <span>
#include <vector>

#include "error.hpp"

namespace rnphi::iit {

inline constexpr int kMaxNodes = 5;
inline constexpr int kMaxStates = 1 << kMaxNodes;

using Mask = unsigned;

inline int popcount(Mask m) { return std::popcount(m); }

/// Pack the bits of `s` selected by `mask` into a dense index.
inline unsigned compress(unsigned s, Mask mask) {
  unsigned out = 0;
  int k = 0;
  for (Mask m = mask; m; m &= m - 1, ++k) {
    const unsigned bit = std::countr_zero(m);
    out |= ((s >> bit) & 1u) << k;
  }
  return out;
}

/// Inverse of compress: spread a dense index over the bits in `mask`.
inline unsigned expand(unsigned z, Mask mask) {
  unsigned out = 0;
  int k = 0;
  for (Mask m = mask; m; m &= m - 1, ++k) {
    const unsigned bit = std::countr_zero(m);
    out |= ((z >> k) & 1u) << bit;
  }
  return out;
}

/// Distribution over the joint states of a purview, indexed by `compress`.
struct Dist {
  Mask purview = 0;
  int size = 1;
  std::array<double, kMaxStates> p{};

  static Dist over(Mask purview) {
    Dist d;
    d.purview = purview;
    d.size = 1 << popcount(purview);
    return d;
  }
  std::span<const double> values() const { return {p.data(), static_cast<std::size_t>(size)}; }
  double sum() const {
    double s = 0.0;
    for (int i = 0; i < size; ++i) s += p[i];
    return s;
  }
  bool all_zero() const {
    for (int i = 0; i < size; ++i)
      if (p[i] != 0.0) return false;
    return true;
  }
  void normalize() {
    const double s = sum();
    if (s == 0.0) return;
    for (int i = 0; i < size; ++i) p[i] /= s;
  }
  /// Probability that the purview node `node` is on.
  double marginal_on(int node) const {
    const unsigned bit = 1u << popcount(purview & ((1u << node) - 1));
    double s = 0.0;
    for (int i = 0; i < size; ++i)
      if (i & bit) s += p[i];
    return s;
  }
  friend bool operator==(const Dist& a, const Dist& b) {
    if (a.purview != b.purview) return false;
    for (int i = 0; i < a.size; ++i)
      if (a.p[i] != b.p[i]) return false;
    return true;
  }
};

/// Product of two distributions over disjoint purviews.
inline Dist product(const Dist& a, const Dist& b) {
  Dist r = Dist::over(a.purview | b.purview);
  for (int z = 0; z < r.size; ++z) {
    const unsigned s = expand(z, r.purview);
    r.p[z] = a.p[compress(s, a.purview)] * b.p[compress(s, b.purview)];
  }
  return r;
}

/// Binary network in state-by-node form: p_on[s * n + j] is the probability
/// that node j is on at t+1 given joint state s at t (bit j of s = node j).
struct Network {
  int n = 0;
  std::vector<double> p_on;

  int states() const { return 1 << n; }
  Mask all() const { return (1u << n) - 1u; }

  static Network from_state_by_node(int n, std::span<const double> rows) {
    if (n < 1 || n > kMaxNodes) throw ValidationError("network size must be in [1, 5]");
    if (rows.size() != static_cast<std::size_t>(n) << n) throw ShapeError("state-by-node TPM must be 2^n x n");
    for (double v : rows)
      if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) throw ValidationError("TPM entries must lie in [0, 1]");
    Network net;
    net.n = n;
    net.p_on.assign(rows.begin(), rows.end());
    return net;
  }

  /// Whether some prior state gives the current state nonzero probability.
  bool reachable(unsigned state) const {
    for (int s = 0; s < states(); ++s) {
      bool ok = true;
      for (int j = 0; j < n && ok; ++j) {
        const double q = p_on[s * n + j];
        ok = ((state >> j) & 1u) ? q > 0.0 : q < 1.0;
      }
      if (ok) return true;
    }
    return false;
  }
};

/// Severed connections: severed[j] holds the inputs of node j that are cut.
struct Severed {
  std::array<Mask, kMaxNodes> in{};

  static Severed none() { return {}; }
  /// Every connection from `from` to `to` is cut.
  static Severed directed(Mask from, Mask to, int n) {
    Severed s;
    for (int j = 0; j < n; ++j)
      if (to >> j & 1u) s.in[j] = from;
    return s;
  }
  bool any() const {
    for (Mask m : in)
      if (m) return true;
    return false;
  }
  /// Whether any connection from a node in `a` to a node in `b` is cut.
  bool severs(Mask a, Mask b) const {
    for (int j = 0; j < kMaxNodes; ++j)
      if ((b >> j & 1u) && (in[j] & a)) return true;
    return false;
  }
};

/// Conditional marginals of each node under a cut, precomputed for every
/// conditioning set. Repertoires are products of these tables.
class Repertoires {
 public:
  Repertoires(const Network& net, const Severed& cut) : n_(net.n), cut_(cut) {
    const int ns = net.states();
    table_.assign(static_cast<std::size_t>(n_) * ns * ns, 0.0);
    std::array<double, kMaxStates> acc{};
    std::array<int, kMaxStates> cnt{};
    for (int j = 0; j < n_; ++j) {
      for (unsigned cond = 0; cond < static_cast<unsigned>(ns); ++cond) {
        const Mask live = cond & ~cut.in[j];
        const int kc = popcount(cond);
        acc.fill(0.0);
        cnt.fill(0);
        for (int s = 0; s < ns; ++s) {
          const unsigned key = compress(s, live);
          acc[key] += net.p_on[s * n_ + j];
          ++cnt[key];
        }
        double* out = &table_[(static_cast<std::size_t>(j) * ns + cond) * ns];
        for (int z = 0; z < (1 << kc); ++z) {
          const unsigned key = compress(expand(z, cond), live);
          out[z] = acc[key] / cnt[key];
        }
      }
    }
  }

  int size() const { return n_; }
  const Severed& cut() const { return cut_; }

  /// P(node j on next | nodes in `cond` at state z), others averaged uniformly.
  double on(int j, Mask cond, unsigned z) const {
    const int ns = 1 << n_;
    return table_[(static_cast<std::size_t>(j) * ns + cond) * ns + z];
  }

  /// Past-state distribution over `purview` given the current state of
  /// `mechanism`. All zeros when the mechanism state cannot arise.
  Dist cause(Mask mechanism, Mask purview, unsigned state) const {
    Dist d = Dist::over(purview);
    if (mechanism == 0) {
      for (int z = 0; z < d.size; ++z) d.p[z] = 1.0 / d.size;
      return d;
    }
    for (int z = 0; z < d.size; ++z) {
      double v = 1.0;
      for (Mask m = mechanism; m; m &= m - 1) {
        const int j = std::countr_zero(m);
        const double q = on(j, purview, z);
        v *= (state >> j & 1u) ? q : 1.0 - q;
      }
      d.p[z] = v;
    }
    d.normalize();
    return d;
  }

  /// Next-state distribution over `purview` given the current state of `mechanism`.
  Dist effect(Mask mechanism, Mask purview, unsigned state) const {
    Dist d = Dist::over(purview);
    std::array<double, kMaxNodes> q{};
    int k = 0;
    const unsigned zm = compress(state, mechanism);
    for (Mask m = purview; m; m &= m - 1, ++k) q[k] = on(std::countr_zero(m), mechanism, zm);
    for (int z = 0; z < d.size; ++z) {
      double v = 1.0;
      for (int i = 0; i < k; ++i) v *= (z >> i & 1) ? q[i] : 1.0 - q[i];
      d.p[z] = v;
    }
    return d;
  }

  Dist unconstrained_cause(Mask purview) const { return cause(0, purview, 0); }
  Dist unconstrained_effect(Mask purview) const { return effect(0, purview, 0); }

 private:
  int n_;
  Severed cut_;
  std::vector<double> table_;
};

}  // namespace rnphi::iit
