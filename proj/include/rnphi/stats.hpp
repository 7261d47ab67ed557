#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace rnphi {

enum class Alternative { two_sided, greater };

namespace detail {

/// Midranks (1-based) of the pooled values.
inline std::vector<double> midranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mid;
    i = j + 1;
  }
  return r;
}

inline void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw ValidationError(std::string(what) + " contains a non-finite value");
}

}  // namespace detail

/// Mann-Whitney rank-sum p-value; `greater` tests whether b tends to exceed a.
/// Exact over all rank assignments when the pooled size is at most 8,
/// otherwise the tie-corrected normal approximation with continuity correction.
inline double wilcoxon_rank_sum(const std::vector<double>& a, const std::vector<double>& b, Alternative alt) {
  if (a.empty() || b.empty()) throw ValidationError("rank-sum test needs both samples non-empty");
  detail::check_finite(a, "rank-sum sample");
  detail::check_finite(b, "rank-sum sample");
  std::vector<double> pooled(b);
  pooled.insert(pooled.end(), a.begin(), a.end());
  if (std::all_of(pooled.begin(), pooled.end(), [&](double x) { return x == pooled.front(); })) return 1.0;

  const auto ranks = detail::midranks(pooled);
  const std::size_t nb = b.size(), na = a.size(), n = nb + na;
  const double shift = 0.5 * static_cast<double>(nb * (nb + 1));
  double rb = 0.0;
  for (std::size_t i = 0; i < nb; ++i) rb += ranks[i];
  const double u = rb - shift;

  if (n <= 8) {
    constexpr double eps = 1e-9;
    long ge = 0, le = 0, total = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(mask)) != nb) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1) s += ranks[i];
      s -= shift;
      ++total;
      ge += s >= u - eps;
      le += s <= u + eps;
    }
    const double pg = static_cast<double>(ge) / static_cast<double>(total);
    const double pl = static_cast<double>(le) / static_cast<double>(total);
    return alt == Alternative::greater ? pg : std::min(1.0, 2.0 * std::min(pg, pl));
  }

  std::map<double, long> ties;
  for (double r : ranks) ++ties[r];
  double tie_term = 0.0;
  for (const auto& [r, t] : ties) tie_term += static_cast<double>(t * t * t - t);
  const double dn = static_cast<double>(n), prod = static_cast<double>(na * nb);
  const double mu = prod / 2.0;
  const double sd = std::sqrt(prod / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0))));
  if (!(sd > 0.0)) return 1.0;
  const double stat = alt == Alternative::greater ? u : std::max(u, prod - u);
  const double z = (stat - mu - 0.5) / sd;
  double p = boost::math::cdf(boost::math::complement(boost::math::normal(), z));
  if (alt == Alternative::two_sided) p *= 2.0;
  return std::clamp(p, 0.0, 1.0);
}

/// Holm step-down adjustment, monotone and capped at 1, in input order.
inline std::vector<double> holm_correct(const std::vector<double>& p) {
  for (double x : p)
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("p-values must lie in [0, 1]");
  const std::size_t m = p.size();
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - k) * p[idx[k]]));
    out[idx[k]] = running;
  }
  return out;
}

enum class Verdict { Good, Bad };

inline const char* to_string(Verdict v) { return v == Verdict::Good ? "Good" : "Bad"; }

/// Two scores: Good iff mean(1) > mean(0). Three: Good iff mean(2) >= mean(1) >= mean(0).
inline Verdict good_bad_classify(const std::map<int, double>& mean_by_score, int levels) {
  if (levels != 2 && levels != 3) throw ValidationError("score levels must be 2 or 3");
  for (int s = 0; s < levels; ++s)
    if (!mean_by_score.count(s)) throw ValidationError("missing mean for score " + std::to_string(s));
  const auto& m = mean_by_score;
  if (levels == 2) return m.at(1) > m.at(0) ? Verdict::Good : Verdict::Bad;
  return m.at(2) >= m.at(1) && m.at(1) >= m.at(0) ? Verdict::Good : Verdict::Bad;
}

/// ROC AUC by midrank pair counting: P(score_pos > score_neg) + half the ties.
inline double auc(const std::vector<double>& scores, const std::vector<int>& positive) {
  if (scores.size() != positive.size()) throw ShapeError("scores and labels differ in length");
  const auto r = detail::midranks(scores);
  double npos = 0.0, nneg = 0.0, rsum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (positive[i]) {
      npos += 1.0;
      rsum += r[i];
    } else {
      nneg += 1.0;
    }
  }
  if (npos == 0.0 || nneg == 0.0) throw ValidationError("AUC needs both classes");
  return (rsum - npos * (npos + 1.0) / 2.0) / (npos * nneg);
}

struct LogRegConfig {
  double grad_tol = 1e-6;
  int max_iter = 10000;
};

/// Unpenalized multinomial logistic regression with class 0 as reference
/// (binary when classes == 2), fitted by damped Newton steps.
class LogisticModel {
 public:
  int classes = 2;
  Eigen::MatrixXd coef;  // (classes - 1) x (features + 1), intercept first
  int iterations = 0;
  bool converged = false;

  /// Class probabilities, n x classes.
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& X) const {
    if (X.cols() + 1 != coef.cols()) throw ShapeError("feature count differs from the fitted model");
    Eigen::MatrixXd Z(X.rows(), X.cols() + 1);
    Z.col(0).setOnes();
    Z.rightCols(X.cols()) = X;
    return predict_proba_design(Z);
  }

  static LogisticModel fit(const Eigen::MatrixXd& X, const std::vector<int>& y, int classes,
                           const LogRegConfig& cfg = {}) {
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw ShapeError("design and labels differ in length");
    if (classes < 2) throw ValidationError("logistic regression needs at least 2 classes");
    for (int v : y)
      if (v < 0 || v >= classes) throw ValidationError("label out of range");
    const Eigen::Index n = X.rows(), p = X.cols() + 1, K = classes - 1, dim = K * p;
    Eigen::MatrixXd Z(n, p);
    Z.col(0).setOnes();
    Z.rightCols(p - 1) = X;

    LogisticModel m;
    m.classes = classes;
    m.coef = Eigen::MatrixXd::Zero(K, p);

    auto nll = [&](const Eigen::MatrixXd& W) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd eta(K + 1);
        eta(0) = 0.0;
        for (Eigen::Index k = 0; k < K; ++k) eta(k + 1) = Z.row(i).dot(W.row(k));
        const double mx = eta.maxCoeff();
        s += mx + std::log((eta.array() - mx).exp().sum()) - eta(y[i]);
      }
      return s;
    };

    double f = nll(m.coef);
    for (m.iterations = 0; m.iterations < cfg.max_iter; ++m.iterations) {
      const Eigen::MatrixXd P = m.predict_proba_design(Z);
      Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
      Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < K; ++k) {
          const double r = P(i, k + 1) - (y[i] == k + 1 ? 1.0 : 0.0);
          g.segment(k * p, p) += r * Z.row(i).transpose();
          for (Eigen::Index l = 0; l < K; ++l) {
            const double w = P(i, k + 1) * ((k == l ? 1.0 : 0.0) - P(i, l + 1));
            H.block(k * p, l * p, p, p).noalias() += w * Z.row(i).transpose() * Z.row(i);
          }
        }
      }
      if (g.lpNorm<Eigen::Infinity>() < cfg.grad_tol) {
        m.converged = true;
        break;
      }
      Eigen::VectorXd step;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
      bool newton = ldlt.info() == Eigen::Success;
      if (newton) {
        step = ldlt.solve(g);
        newton = step.allFinite() && step.dot(g) > 0.0;
      }
      if (!newton) step = g;
      double t = 1.0;
      bool moved = false;
      for (int half = 0; half < 60; ++half, t *= 0.5) {
        Eigen::MatrixXd W = m.coef;
        for (Eigen::Index k = 0; k < K; ++k) W.row(k) -= t * step.segment(k * p, p).transpose();
        const double fn = nll(W);
        if (fn <= f - 1e-4 * t * step.dot(g)) {
          m.coef = W;
          f = fn;
          moved = true;
          break;
        }
      }
      if (!moved) break;  // no descent possible at machine precision
    }
    return m;
  }

 private:
  Eigen::MatrixXd predict_proba_design(const Eigen::MatrixXd& Z) const {
    const Eigen::Index n = Z.rows(), K = classes;
    Eigen::MatrixXd P(n, K);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd eta(K);
      eta(0) = 0.0;
      for (Eigen::Index k = 1; k < K; ++k) eta(k) = Z.row(i).dot(coef.row(k - 1));
      const double mx = eta.maxCoeff();
      const Eigen::VectorXd e = (eta.array() - mx).exp();
      P.row(i) = (e / e.sum()).transpose();
    }
    return P;
  }
};

/// Binary AUC of P(class 1), or the one-vs-rest macro average for more classes.
inline double macro_auc(const Eigen::MatrixXd& proba, const std::vector<int>& y) {
  const int K = static_cast<int>(proba.cols());
  auto column = [&](int k) { return std::vector<double>(proba.col(k).data(), proba.col(k).data() + proba.rows()); };
  auto is = [&](int k) {
    std::vector<int> v(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) v[i] = y[i] == k;
    return v;
  };
  if (K == 2) return auc(column(1), is(1));
  double s = 0.0;
  for (int k = 0; k < K; ++k) s += auc(column(k), is(k));
  return s / K;
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin,
/// continuing where the previous class stopped.
inline std::vector<int> stratified_folds(const std::vector<int>& y, int classes, int folds, Rng& rng) {
  std::vector<int> fold(y.size(), -1);
  int next = 0;
  for (int c = 0; c < classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == c) members.push_back(i);
    rng.shuffle(members);
    for (std::size_t i : members) {
      fold[i] = next;
      next = (next + 1) % folds;
    }
  }
  return fold;
}

struct CvConfig {
  int repeats = 5;
  int folds = 5;
  std::uint64_t seed = 42;
  LogRegConfig logreg;
};

struct AucSummary {
  double mean = 0.0;
  double sd = 0.0;  // population sd over all fold evaluations
  std::vector<double> fold_aucs;
  int dropped_features = 0;  // summed over folds
  int unconverged_fits = 0;
};

/// Repeated stratified k-fold AUC of an unpenalized logistic model.
/// Training-fold z-scoring; zero-variance training features are dropped.
inline AucSummary cv_logreg_auc(const Eigen::MatrixXd& X, const std::vector<int>& y, int classes,
                                const CvConfig& cfg = {}, std::string_view stream = "cv") {
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw ShapeError("features and labels differ in length");
  if (cfg.repeats < 1 || cfg.folds < 2) throw ValidationError("need repeats >= 1 and folds >= 2");
  std::vector<int> count(classes, 0);
  for (int v : y) {
    if (v < 0 || v >= classes) throw ValidationError("label out of range");
    ++count[v];
  }
  for (int c : count)
    if (c < cfg.folds) throw ValidationError("every class needs at least as many samples as folds");
  if (!X.allFinite()) throw ValidationError("features contain non-finite values");

  AucSummary out;
  for (int rep = 0; rep < cfg.repeats; ++rep) {
    Rng rng(stream_seed(std::string(stream) + "|repeat|" + std::to_string(rep), cfg.seed));
    const auto fold = stratified_folds(y, classes, cfg.folds, rng);
    for (int f = 0; f < cfg.folds; ++f) {
      std::vector<Eigen::Index> tr, te;
      for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
      std::vector<Eigen::Index> keep;
      std::vector<double> mean, sd;
      for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double m = 0.0;
        for (auto i : tr) m += X(i, j);
        m /= static_cast<double>(tr.size());
        double v = 0.0;
        for (auto i : tr) v += (X(i, j) - m) * (X(i, j) - m);
        const double s = std::sqrt(v / static_cast<double>(tr.size()));
        if (s > 1e-12 * std::max(1.0, std::abs(m))) {
          keep.push_back(j);
          mean.push_back(m);
          sd.push_back(s);
        } else {
          ++out.dropped_features;
        }
      }
      auto design = [&](const std::vector<Eigen::Index>& rows) {
        Eigen::MatrixXd D(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(keep.size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
          for (std::size_t c = 0; c < keep.size(); ++c) D(r, c) = (X(rows[r], keep[c]) - mean[c]) / sd[c];
        return D;
      };
      std::vector<int> ytr, yte;
      for (auto i : tr) ytr.push_back(y[i]);
      for (auto i : te) yte.push_back(y[i]);
      const auto model = LogisticModel::fit(design(tr), ytr, classes, cfg.logreg);
      out.unconverged_fits += !model.converged;
      out.fold_aucs.push_back(macro_auc(model.predict_proba(design(te)), yte));
    }
  }
  const double n = static_cast<double>(out.fold_aucs.size());
  out.mean = std::accumulate(out.fold_aucs.begin(), out.fold_aucs.end(), 0.0) / n;
  double v = 0.0;
  for (double a : out.fold_aucs) v += (a - out.mean) * (a - out.mean);
  out.sd = std::sqrt(v / n);
  return out;
}

}  // namespace rnphi
