#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bundle_io.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace rnphi {

struct ReducedSeries {
  Eigen::MatrixXd scores;      // T x k
  Eigen::MatrixXd components;  // k x D, orthonormal rows
  Eigen::VectorXd explained_variance;
  Eigen::RowVectorXd column_means;

  int length() const { return static_cast<int>(scores.rows()); }
  int nodes() const { return static_cast<int>(scores.cols()); }
};

struct BinarySeries {
  int T = 0;
  int nodes = 0;
  std::vector<std::uint8_t> bits;  // T x nodes, row-major
  std::vector<double> node_means;

  std::uint8_t at(int t, int j) const { return bits[static_cast<std::size_t>(t) * nodes + j]; }
};

enum class SpatioMode { shared, per_timepoint };

inline const char* to_string(SpatioMode m) { return m == SpatioMode::shared ? "shared" : "per_timepoint"; }

inline SpatioMode parse_spatio_mode(const std::string& s) {
  if (s == "shared") return SpatioMode::shared;
  if (s == "per_timepoint") return SpatioMode::per_timepoint;
  throw ValidationError("unknown spatio mode '" + s + "'");
}

struct PermutationSpec {
  PermutationKind kind = PermutationKind::Temporal;
  int seed = 42;
  SpatioMode spatio_mode = SpatioMode::shared;
  bool allow_any_seed = false;

  void validate() const {
    if (!allow_any_seed && (seed < 42 || seed > 51))
      throw ValidationError("seed " + std::to_string(seed) + " outside [42, 51]");
  }
};

/// Row-wise concatenation in the given order.
inline TokenMatrix concatenate_series(const std::vector<TokenMatrix>& items) {
  if (items.empty()) throw ValidationError("nothing to concatenate");
  const Eigen::Index d = items.front().cols();
  Eigen::Index rows = 0;
  for (const auto& m : items) {
    if (m.cols() != d) throw ShapeError("items differ in embedding dimension");
    rows += m.rows();
  }
  TokenMatrix out(rows, d);
  Eigen::Index r = 0;
  for (const auto& m : items) {
    out.middleRows(r, m.rows()) = m;
    r += m.rows();
  }
  return out;
}

namespace detail {

/// Flips each row so its largest-magnitude entry (lowest index on ties) is positive.
inline void fix_signs(Eigen::MatrixXd& comps) {
  for (Eigen::Index i = 0; i < comps.rows(); ++i) {
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < comps.cols(); ++j)
      if (std::abs(comps(i, j)) > std::abs(comps(i, arg))) arg = j;
    if (comps(i, arg) < 0) comps.row(i) *= -1.0;
  }
}

/// Extends orthonormal rows to `k` rows with unit vectors orthogonalized
/// against them (used when the data has rank below k).
inline void complete_basis(Eigen::MatrixXd& comps, Eigen::Index have, Eigen::Index k) {
  const Eigen::Index d = comps.cols();
  for (Eigen::Index e = 0; e < d && have < k; ++e) {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Unit(d, e);
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index i = 0; i < have; ++i) v -= v.dot(comps.row(i)) * comps.row(i);
    const double nv = v.norm();
    if (nv > 1e-6) comps.row(have++) = v / nv;
  }
}

}  // namespace detail

/// Principal components of the mean-centred rows of X, top k by variance.
inline ReducedSeries pca_reduce(const TokenMatrix& X, int k = 4) {
  const Eigen::Index T = X.rows(), D = X.cols();
  if (k < 1) throw ValidationError("PCA needs k >= 1");
  if (T <= k) throw ValidationError("PCA needs more than " + std::to_string(k) + " rows, got " + std::to_string(T));
  if (D < k) throw ValidationError("PCA needs at least " + std::to_string(k) + " columns");
  if (!X.allFinite()) throw ValidationError("PCA input has non-finite entries");
  ReducedSeries r;
  r.column_means = X.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - r.column_means;
  const double total = Xc.squaredNorm();
  const double rms = std::sqrt(total / static_cast<double>(T * D));
  if (total == 0.0 || rms <= 1e-12 * X.cwiseAbs().maxCoeff()) throw ValidationError("PCA input has zero variance");

  r.components.resize(k, D);
  r.explained_variance.resize(k);
  Eigen::Index have = 0;
  const double floor = 1e-12 * total;
  if (D <= T) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Xc.transpose() * Xc);
    for (int i = 0; i < k; ++i) {
      const Eigen::Index c = D - 1 - i;
      const double lam = std::max(0.0, es.eigenvalues()(c));
      r.explained_variance(i) = lam / static_cast<double>(T - 1);
      if (lam > floor) r.components.row(have++) = es.eigenvectors().col(c).transpose();
    }
  } else {
    // Gram trick: eigenvectors of Xc Xc^T map to those of the covariance.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Xc * Xc.transpose());
    for (int i = 0; i < k; ++i) {
      const Eigen::Index c = T - 1 - i;
      const double lam = std::max(0.0, es.eigenvalues()(c));
      r.explained_variance(i) = lam / static_cast<double>(T - 1);
      if (lam > floor) {
        Eigen::RowVectorXd v = (Xc.transpose() * es.eigenvectors().col(c)).transpose();
        r.components.row(have++) = v / v.norm();
      }
    }
  }
  detail::complete_basis(r.components, have, k);
  detail::fix_signs(r.components);
  r.scores = Xc * r.components.transpose();
  return r;
}

/// z-scores each node over time; bit = 1 iff z > 0.
inline BinarySeries standardize_binarize(const Eigen::MatrixXd& scores) {
  BinarySeries b;
  b.T = static_cast<int>(scores.rows());
  b.nodes = static_cast<int>(scores.cols());
  if (b.T < 2) throw ValidationError("binarization needs at least 2 time points");
  b.bits.assign(static_cast<std::size_t>(b.T) * b.nodes, 0);
  b.node_means.assign(b.nodes, 0.0);
  const double scale = std::max(1.0, scores.cwiseAbs().maxCoeff());
  for (int j = 0; j < b.nodes; ++j) {
    const double mean = scores.col(j).mean();
    const double sd = std::sqrt((scores.col(j).array() - mean).square().sum() / (b.T - 1));
    if (!(sd > 1e-10 * scale)) throw DegenerateNodeError(j);
    double zmean = 0.0;
    for (int t = 0; t < b.T; ++t) {
      const double z = (scores(t, j) - mean) / sd;
      zmean += z;
      b.bits[static_cast<std::size_t>(t) * b.nodes + j] = z > 0.0 ? 1 : 0;
    }
    b.node_means[j] = zmean / b.T;
  }
  return b;
}

inline BinarySeries standardize_binarize(const ReducedSeries& r) { return standardize_binarize(r.scores); }

/// Column order used by shared-mode spatio permutation: output column j
/// takes input column p[j].
inline std::vector<int> spatio_permutation(int d, const PermutationSpec& spec, std::string_view stream = {}) {
  spec.validate();
  Rng rng(stream_seed(stream, static_cast<std::uint64_t>(spec.seed)));
  return rng.permutation(d);
}

/// Shuffles embedding columns: one permutation for all rows (shared) or an
/// independent one per row.
inline TokenMatrix spatio_permute(const TokenMatrix& X, const PermutationSpec& spec, std::string_view stream = {}) {
  if (spec.kind != PermutationKind::Spatio) throw ValidationError("spatio_permute needs a Spatio spec");
  spec.validate();
  const int d = static_cast<int>(X.cols());
  TokenMatrix out(X.rows(), X.cols());
  if (spec.spatio_mode == SpatioMode::shared) {
    const auto p = spatio_permutation(d, spec, stream);
    for (int j = 0; j < d; ++j) out.col(j) = X.col(p[j]);
  } else {
    Rng rng(stream_seed(stream, static_cast<std::uint64_t>(spec.seed)));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const auto p = rng.permutation(d);
      for (int j = 0; j < d; ++j) out(i, j) = X(i, p[j]);
    }
  }
  return out;
}

/// Seeded shuffle of item order; tokens within an item keep their order.
template <class T>
std::vector<T> temporal_permute(std::vector<T> items, const PermutationSpec& spec, std::string_view stream = {}) {
  if (spec.kind != PermutationKind::Temporal) throw ValidationError("temporal_permute needs a Temporal spec");
  spec.validate();
  Rng rng(stream_seed(stream, static_cast<std::uint64_t>(spec.seed)));
  rng.shuffle(items);
  return items;
}

/// [h_s0; h_s1; h_s0 * h_s1; h_s0 - h_s1] over the node dimensions.
inline std::vector<double> span_representation(const Eigen::MatrixXd& scores, int s0, int s1) {
  const int T = static_cast<int>(scores.rows());
  if (s0 < 0 || s1 < s0 || s1 >= T)
    throw ValidationError("span boundaries (" + std::to_string(s0) + ", " + std::to_string(s1) + ") outside 0.." +
                          std::to_string(T - 1));
  const int k = static_cast<int>(scores.cols());
  std::vector<double> v(4 * static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const double a = scores(s0, j), b = scores(s1, j);
    v[j] = a;
    v[k + j] = b;
    v[2 * k + j] = a * b;
    v[3 * k + j] = a - b;
  }
  return v;
}

inline std::vector<double> span_representation(const ReducedSeries& r, int s0, int s1) {
  return span_representation(r.scores, s0, s1);
}

}  // namespace rnphi
