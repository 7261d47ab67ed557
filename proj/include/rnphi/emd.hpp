#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "error.hpp"

namespace rnphi {

/// Uncapacitated min-cost flow on a dense graph.
///
/// `cost` is n*n row-major; an infinite entry means no arc. `supply` sums to
/// zero (positive = source). Successive shortest paths with Johnson
/// potentials, so the optimum is exact up to floating-point rounding.
struct MinCostFlow {
  double cost = 0.0;
  std::vector<double> flow;  // n*n

  /// `mass` sets the rounding scale; it defaults to the total absolute supply.
  static MinCostFlow solve(std::span<const double> cost, int n, std::span<const double> supply,
                           double mass = 0.0) {
    if (cost.size() != static_cast<std::size_t>(n) * n || supply.size() != static_cast<std::size_t>(n))
      throw ShapeError("min-cost flow: size mismatch");
    constexpr double inf = std::numeric_limits<double>::infinity();
    MinCostFlow r;
    r.flow.assign(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> excess(supply.begin(), supply.end());
    double scale = 0.0;
    for (double s : supply) scale += std::abs(s);
    if (scale == 0.0) return r;
    scale = std::max(scale, mass);
    const double eps = 1e-15 * scale;
    std::vector<double> pot(n, 0.0), dist(n);
    std::vector<int> pred(n);
    std::vector<char> pred_back(n), done(n);

    for (;;) {
      bool any = false;
      for (int v = 0; v < n; ++v) {
        if (excess[v] > eps) {
          dist[v] = 0.0;
          any = true;
        } else {
          dist[v] = inf;
        }
        pred[v] = -1;
        done[v] = 0;
      }
      if (!any) break;
      int target = -1;
      for (;;) {
        int u = -1;
        for (int v = 0; v < n; ++v)
          if (!done[v] && dist[v] < inf && (u < 0 || dist[v] < dist[u])) u = v;
        if (u < 0) break;
        done[u] = 1;
        if (excess[u] < -eps) {
          target = u;
          break;
        }
        for (int v = 0; v < n; ++v) {
          if (done[v]) continue;
          const double c = cost[static_cast<std::size_t>(u) * n + v];
          if (c < inf) {
            const double nd = dist[u] + std::max(0.0, c + pot[u] - pot[v]);
            if (nd < dist[v]) {
              dist[v] = nd;
              pred[v] = u;
              pred_back[v] = 0;
            }
          }
          if (r.flow[static_cast<std::size_t>(v) * n + u] > eps) {
            const double cb = -cost[static_cast<std::size_t>(v) * n + u];
            const double nd = dist[u] + std::max(0.0, cb + pot[u] - pot[v]);
            if (nd < dist[v]) {
              dist[v] = nd;
              pred[v] = u;
              pred_back[v] = 1;
            }
          }
        }
      }
      if (target < 0) {
        // Only rounding residue from an imbalance of the inputs may remain.
        double left = 0.0;
        for (int u = 0; u < n; ++u) left += std::max(0.0, excess[u]);
        if (left <= 1e-11 * scale) break;
        throw Error("min-cost flow: supplies and demands do not balance");
      }
      const double dt = dist[target];
      for (int v = 0; v < n; ++v) pot[v] += std::min(dist[v], dt);

      double delta = -excess[target];
      int v = target;
      while (pred[v] >= 0) {
        const int u = pred[v];
        if (pred_back[v]) delta = std::min(delta, r.flow[static_cast<std::size_t>(v) * n + u]);
        v = u;
      }
      delta = std::min(delta, excess[v]);
      const int source = v;
      v = target;
      while (pred[v] >= 0) {
        const int u = pred[v];
        if (pred_back[v]) {
          double& f = r.flow[static_cast<std::size_t>(v) * n + u];
          f -= delta;
          if (f < eps) f = 0.0;
        } else {
          r.flow[static_cast<std::size_t>(u) * n + v] += delta;
        }
        v = u;
      }
      excess[source] -= delta;
      excess[target] += delta;
    }
    for (std::size_t i = 0; i < r.flow.size(); ++i)
      if (r.flow[i] > 0.0) r.cost += r.flow[i] * cost[i];
    return r;
  }
};

/// Optimal transport between `supply` (n) and `demand` (m) under an n*m cost
/// matrix. Masses are balanced by the caller. If `plan` is given it receives
/// the n*m transport plan.
inline double transport(std::span<const double> supply, std::span<const double> demand,
                        std::span<const double> cost, std::vector<double>* plan = nullptr) {
  const int n = static_cast<int>(supply.size());
  const int m = static_cast<int>(demand.size());
  if (cost.size() != static_cast<std::size_t>(n) * m) throw ShapeError("transport: cost matrix shape");
  const int v = n + m;
  std::vector<double> c(static_cast<std::size_t>(v) * v, std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) c[static_cast<std::size_t>(i) * v + n + j] = cost[static_cast<std::size_t>(i) * m + j];
  std::vector<double> s(v);
  for (int i = 0; i < n; ++i) s[i] = supply[i];
  for (int j = 0; j < m; ++j) s[n + j] = -demand[j];
  auto r = MinCostFlow::solve(c, v, s);
  if (plan) {
    plan->assign(static_cast<std::size_t>(n) * m, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        (*plan)[static_cast<std::size_t>(i) * m + j] = r.flow[static_cast<std::size_t>(i) * v + n + j];
  }
  return r.cost;
}

/// EMD between two distributions with an explicit ground-cost matrix.
inline double emd(std::span<const double> p, std::span<const double> q, std::span<const double> cost) {
  if (p.size() != q.size()) throw ShapeError("emd: mismatched supports");
  return transport(p, q, cost);
}

/// EMD with Hamming ground metric over binary state labels. Supports must have
/// length 2^k; bit i of an index is the state of the i-th node.
///
/// Solved as transshipment on the hypercube graph, which has the same optimum
/// as the dense transport problem because Hamming distance is its path metric.
inline double hamming_emd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("emd: mismatched supports");
  const std::size_t n = p.size();
  if (n == 0 || !std::has_single_bit(n)) throw ShapeError("emd: support size must be a power of two");
  if (n == 1) return 0.0;
  bool same = true;
  for (std::size_t i = 0; i < n && same; ++i) same = p[i] == q[i];
  if (same) return 0.0;
  const int nn = static_cast<int>(n);
  std::vector<double> c(n * n, std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 1; b < n; b <<= 1) c[a * n + (a ^ b)] = 1.0;
  std::vector<double> s(n);
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = p[i] - q[i];
    mass += std::abs(p[i]) + std::abs(q[i]);
  }
  return MinCostFlow::solve(c, nn, s, mass).cost;
}

/// Lower bound on hamming_emd: the sum over coordinates of the 1-D distances
/// between the per-node marginals.
inline double hamming_emd_lower_bound(std::span<const double> p, std::span<const double> q) {
  const std::size_t n = p.size();
  double lb = 0.0;
  for (std::size_t b = 1; b < n; b <<= 1) {
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (i & b) d += p[i] - q[i];
    lb += std::abs(d);
  }
  return lb;
}

/// Hamming cost matrix over 2^k states.
inline std::vector<double> hamming_cost_matrix(int k) {
  const std::size_t n = std::size_t{1} << k;
  std::vector<double> c(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) c[a * n + b] = std::popcount(a ^ b);
  return c;
}

}  // namespace rnphi
