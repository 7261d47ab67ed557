#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "bundle_io.hpp"
#include "stats.hpp"

namespace rnphi {

/// Rows sharing a model, task, layer, span and permutation control.
struct GroupKey {
  std::string task, model, layer, span, permutation;

  static GroupKey of(const ResultRow& r) {
    return {to_string(r.task), r.model_name, r.transformer_layer, to_string(r.linguistic_span),
            to_string(r.permutation_control)};
  }
  std::string str() const { return task + "|" + model + "|" + layer + "|" + span + "|" + permutation; }
  auto tie() const { return std::tie(task, model, layer, span, permutation); }
  friend bool operator<(const GroupKey& a, const GroupKey& b) { return a.tie() < b.tie(); }
  friend bool operator==(const GroupKey& a, const GroupKey& b) { return a.tie() == b.tie(); }
};

inline const std::vector<std::string>& scalar_metrics() {
  static const std::vector<std::string> m{"phi_max_3", "phi_4"};
  return m;
}

/// The five metrics compared by cross-validated AUC, in canonical order.
inline const std::vector<std::string>& auc_metrics() {
  static const std::vector<std::string> m{"phi_max_3", "phi_4", "ci_3", "phi_structure_4", "span_rep"};
  return m;
}

inline std::vector<double> metric_features(const ResultRow& r, const std::string& metric) {
  if (metric == "phi_max_3") return {r.phi_max_3};
  if (metric == "phi_4") return {r.phi_4};
  if (metric == "ci_3") return r.ci_3;
  if (metric == "phi_structure_4") return r.phi_structure_4;
  if (metric == "span_rep") return r.span_rep;
  throw ValidationError("unknown metric '" + metric + "'");
}

inline bool usable(const ResultRow& r, const std::string& metric) {
  if (!r.valid) return false;
  for (double v : metric_features(r, metric))
    if (!std::isfinite(v)) return false;
  return true;
}

/// Score pairs compared within a task: (0,1), or (0,1), (0,2), (1,2).
inline std::vector<std::pair<int, int>> score_pairs(int levels) {
  if (levels == 2) return {{0, 1}};
  return {{0, 1}, {0, 2}, {1, 2}};
}

struct PairTest {
  int lo = 0, hi = 1;
  int n_lo = 0, n_hi = 0;
  double p_raw = std::numeric_limits<double>::quiet_NaN();
  double p_adj = std::numeric_limits<double>::quiet_NaN();
  bool significant = false;
};

namespace detail {

/// Rank tests over score pairs; b is the higher score. Holm applies when
/// more than one pair is tested. Pairs with an empty side stay NaN.
inline std::vector<PairTest> pair_tests(const std::map<int, std::vector<double>>& by_score, int levels, Alternative alt) {
  std::vector<PairTest> out;
  std::vector<double> raw;
  std::vector<std::size_t> tested;
  for (auto [lo, hi] : score_pairs(levels)) {
    PairTest t;
    t.lo = lo;
    t.hi = hi;
    const auto a = by_score.count(lo) ? by_score.at(lo) : std::vector<double>{};
    const auto b = by_score.count(hi) ? by_score.at(hi) : std::vector<double>{};
    t.n_lo = static_cast<int>(a.size());
    t.n_hi = static_cast<int>(b.size());
    if (!a.empty() && !b.empty()) {
      t.p_raw = wilcoxon_rank_sum(a, b, alt);
      raw.push_back(t.p_raw);
      tested.push_back(out.size());
    }
    out.push_back(t);
  }
  const auto adj = holm_correct(raw);
  for (std::size_t k = 0; k < tested.size(); ++k) {
    out[tested[k]].p_adj = adj[k];
    out[tested[k]].significant = adj[k] < 0.05;
  }
  return out;
}

inline std::map<GroupKey, std::vector<const ResultRow*>> group_rows(const std::vector<ResultRow>& rows) {
  std::map<GroupKey, std::vector<const ResultRow*>> g;
  for (const auto& r : rows) g[GroupKey::of(r)].push_back(&r);
  return g;
}

}  // namespace detail

struct StimulusVerdict {
  std::string sheet, stimulus_id;
  std::map<int, double> seed_mean;  // per score
  std::map<int, int> n_valid;       // per score
  Verdict verdict = Verdict::Bad;
};

struct Criterion1Group {
  GroupKey key;
  std::string metric;
  int levels = 2;
  int stimuli = 0;        // stimuli seen in the group
  int valid_stimuli = 0;  // with at least one usable value per score
  int good = 0;
  int bad = 0;
  double fraction = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;
  bool no_data = true;
  std::vector<StimulusVerdict> verdicts;
  std::vector<PairTest> tests;  // one-sided, higher score greater
};

/// Per-stimulus Good/Bad ordering of seed-averaged metrics; a group passes
/// when strictly more than 80% of its valid stimuli are Good.
inline std::vector<Criterion1Group> criterion1_evaluate(const std::vector<ResultRow>& rows,
                                                        const std::vector<std::string>& metrics = scalar_metrics()) {
  std::vector<Criterion1Group> out;
  for (const auto& [key, members] : detail::group_rows(rows)) {
    const int levels = score_levels(members.front()->task);
    std::map<std::pair<std::string, std::string>, std::vector<const ResultRow*>> by_stim;
    for (const auto* r : members) by_stim[{r->sheet, r->stimulus_id}].push_back(r);
    for (const auto& metric : metrics) {
      Criterion1Group g;
      g.key = key;
      g.metric = metric;
      g.levels = levels;
      g.stimuli = static_cast<int>(by_stim.size());
      std::map<int, std::vector<double>> pooled;
      for (const auto& [stim, rs] : by_stim) {
        std::map<int, std::vector<double>> vals;
        for (const auto* r : rs)
          if (usable(*r, metric)) vals[r->score].push_back(metric_features(*r, metric)[0]);
        bool complete = true;
        for (int s = 0; s < levels; ++s) complete = complete && vals.count(s);
        if (!complete) continue;
        StimulusVerdict v;
        v.sheet = stim.first;
        v.stimulus_id = stim.second;
        for (const auto& [s, xs] : vals) {
          double sum = 0.0;
          for (double x : xs) sum += x;
          v.seed_mean[s] = sum / static_cast<double>(xs.size());
          v.n_valid[s] = static_cast<int>(xs.size());
          pooled[s].insert(pooled[s].end(), xs.begin(), xs.end());
        }
        v.verdict = good_bad_classify(v.seed_mean, levels);
        (v.verdict == Verdict::Good ? g.good : g.bad) += 1;
        g.verdicts.push_back(std::move(v));
      }
      g.valid_stimuli = g.good + g.bad;
      g.no_data = g.valid_stimuli == 0;
      if (!g.no_data) {
        g.fraction = static_cast<double>(g.good) / static_cast<double>(g.valid_stimuli);
        g.pass = g.fraction > 0.8;
        g.tests = detail::pair_tests(pooled, levels, Alternative::greater);
      }
      out.push_back(std::move(g));
    }
  }
  return out;
}

struct Criterion2Group {
  GroupKey key;
  std::string metric;
  int levels = 2;
  std::map<int, int> n_per_score;
  bool no_data = true;
  std::vector<PairTest> tests;  // two-sided
};

/// Task-level two-sided rank tests between score categories.
inline std::vector<Criterion2Group> criterion2_evaluate(const std::vector<ResultRow>& rows,
                                                        const std::vector<std::string>& metrics = scalar_metrics()) {
  std::vector<Criterion2Group> out;
  for (const auto& [key, members] : detail::group_rows(rows)) {
    const int levels = score_levels(members.front()->task);
    for (const auto& metric : metrics) {
      Criterion2Group g;
      g.key = key;
      g.metric = metric;
      g.levels = levels;
      std::map<int, std::vector<double>> vals;
      for (const auto* r : members)
        if (usable(*r, metric)) vals[r->score].push_back(metric_features(*r, metric)[0]);
      for (int s = 0; s < levels; ++s) g.n_per_score[s] = vals.count(s) ? static_cast<int>(vals[s].size()) : 0;
      g.tests = detail::pair_tests(vals, levels, Alternative::two_sided);
      g.no_data = std::none_of(g.tests.begin(), g.tests.end(), [](const PairTest& t) { return std::isfinite(t.p_raw); });
      out.push_back(std::move(g));
    }
  }
  return out;
}

struct MetricAuc {
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;
  int rank = 0;
  int dropped_features = 0;
};

/// Orders metrics by mean AUC, best first. Equal means share the better
/// rank and keep metric-name order.
inline std::vector<MetricAuc> rank_metrics(std::vector<MetricAuc> m) {
  std::stable_sort(m.begin(), m.end(), [](const MetricAuc& a, const MetricAuc& b) {
    if (a.mean != b.mean) return a.mean > b.mean;
    return a.metric < b.metric;
  });
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i].rank = i > 0 && m[i].mean == m[i - 1].mean ? m[i - 1].rank : static_cast<int>(i) + 1;
  return m;
}

/// True when some IIT metric has a higher mean AUC than the span representation.
inline bool iit_beats_span(const std::vector<MetricAuc>& ranked) {
  double span = std::numeric_limits<double>::quiet_NaN();
  for (const auto& m : ranked)
    if (m.metric == "span_rep") span = m.mean;
  if (std::isnan(span)) throw ValidationError("span_rep missing from ranking");
  return std::any_of(ranked.begin(), ranked.end(), [&](const MetricAuc& m) { return m.metric != "span_rep" && m.mean > span; });
}

struct Criterion3Group {
  GroupKey key;
  int levels = 2;
  std::map<int, int> n_per_score;
  bool excluded = true;
  std::string reason;
  std::vector<MetricAuc> ranking;  // best first
  bool iit_beats_span = false;
};

/// Cross-validated AUC of each metric as a score predictor, on one sample set
/// per group: valid rows whose five metrics are all finite. All metrics see
/// the same folds.
inline std::vector<Criterion3Group> criterion3_evaluate(const std::vector<ResultRow>& rows, const CvConfig& cv = {}) {
  std::vector<Criterion3Group> out;
  for (const auto& [key, members] : detail::group_rows(rows)) {
    Criterion3Group g;
    g.key = key;
    g.levels = score_levels(members.front()->task);
    std::vector<const ResultRow*> kept;
    for (const auto* r : members)
      if (std::all_of(auc_metrics().begin(), auc_metrics().end(), [&](const std::string& m) { return usable(*r, m); }))
        kept.push_back(r);
    for (int s = 0; s < g.levels; ++s) g.n_per_score[s] = 0;
    for (const auto* r : kept) ++g.n_per_score[r->score];
    std::size_t max_features = 0;
    for (const auto& m : auc_metrics()) max_features = std::max(max_features, metric_features(*members.front(), m).size());
    const int need = std::max(static_cast<int>(max_features), cv.folds);
    for (const auto& [s, n] : g.n_per_score)
      if (n < need) g.reason = "score " + std::to_string(s) + " has " + std::to_string(n) + " samples, need " + std::to_string(need);
    if (g.reason.empty()) {
      std::vector<int> y;
      for (const auto* r : kept) y.push_back(r->score);
      std::vector<MetricAuc> aucs;
      for (const auto& m : auc_metrics()) {
        const auto dim = metric_features(*kept.front(), m).size();
        Eigen::MatrixXd X(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < kept.size(); ++i) {
          const auto f = metric_features(*kept[i], m);
          for (std::size_t j = 0; j < dim; ++j) X(i, j) = f[j];
        }
        const auto s = cv_logreg_auc(X, y, g.levels, cv, key.str());
        aucs.push_back({m, s.mean, s.sd, 0, s.dropped_features});
      }
      g.ranking = rank_metrics(std::move(aucs));
      g.iit_beats_span = iit_beats_span(g.ranking);
      g.excluded = false;
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace rnphi
