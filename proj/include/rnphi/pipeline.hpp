#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "attention.hpp"
#include "bundle_io.hpp"
#include "error.hpp"
#include "iit3.hpp"
#include "iit4.hpp"
#include "search.hpp"
#include "series_prep.hpp"
#include "tpm_markov.hpp"

namespace rnphi {

struct PipelineConfig {
  std::vector<std::filesystem::path> bundles;
  std::optional<std::filesystem::path> spans_file;
  std::vector<std::string> layers;  // labels ("0".."11", "2/3") or "L<number>"; empty = all
  std::vector<SpanKind> spans{SpanKind::Entire, SpanKind::Complement, SpanKind::MSV};
  std::vector<PermutationKind> permutations{PermutationKind::Temporal, PermutationKind::Spatio};
  std::vector<int> seeds = default_seeds();
  bool allow_any_seed = false;
  SpatioMode spatio_mode = SpatioMode::shared;
  SearchConfig search;
  MaskConfig mask;
  int span_s0 = 0;
  int span_s1 = -1;  // negative counts from the end of the series
  int workers = 1;
  std::filesystem::path output_dir = "out";
  std::uint64_t cv_seed = 42;

  void validate() const {
    if (bundles.empty()) throw ValidationError("config: no bundles");
    if (seeds.empty()) throw ValidationError("config: seeds must not be empty");
    for (int s : seeds)
      if (!allow_any_seed && (s < 42 || s > 51)) throw ValidationError("config: seed " + std::to_string(s) + " outside [42, 51]");
    if (spans.empty()) throw ValidationError("config: no spans");
    if (permutations.empty()) throw ValidationError("config: no permutation controls");
    if (search.budgets.empty()) throw ValidationError("config: no budgets");
    for (std::size_t i = 1; i < search.budgets.size(); ++i)
      if (search.budgets[i] <= search.budgets[i - 1]) throw ValidationError("config: budgets must be ascending");
    if (search.pca_dims < 2 || search.pca_dims > 4) throw ValidationError("config: pca_dims must be between 2 and 4");
    if (workers < 1) throw ValidationError("config: workers must be positive");
    if (span_s0 < 0) throw ValidationError("config: span s0 must be non-negative");
    mask.validate();
  }
};

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

/// Reads a config document; relative paths resolve against `base`.
inline PipelineConfig parse_config(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ValidationError("config must be an object");
  static const std::vector<std::string> known{"bundles", "spans_file", "layers", "spans", "permutations", "seeds",
                                              "allow_any_seed", "spatio_mode", "budgets", "pca_dims", "markov_p_min",
                                              "d_max", "mask", "span_rep", "workers", "output_dir", "cv_seed"};
  for (auto& [k, v] : j.items()) {
    (void)v;
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ValidationError("config: unknown key '" + k + "'");
  }
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  PipelineConfig c;
  for (const auto& b : detail::get_or<std::vector<std::string>>(j, "bundles", {})) c.bundles.push_back(resolve(b));
  if (j.contains("spans_file") && !j["spans_file"].is_null()) c.spans_file = resolve(j["spans_file"].get<std::string>());
  if (j.contains("layers")) {
    for (const auto& l : j["layers"]) c.layers.push_back(l.is_number_integer() ? "L" + std::to_string(l.get<int>()) : l.get<std::string>());
  }
  if (j.contains("spans")) {
    c.spans.clear();
    for (const auto& s : detail::get_or<std::vector<std::string>>(j, "spans", {})) c.spans.push_back(parse_span_kind(s));
  }
  if (j.contains("permutations")) {
    c.permutations.clear();
    for (const auto& s : detail::get_or<std::vector<std::string>>(j, "permutations", {})) c.permutations.push_back(parse_permutation(s));
  }
  c.seeds = detail::get_or(j, "seeds", c.seeds);
  c.allow_any_seed = detail::get_or(j, "allow_any_seed", false);
  c.spatio_mode = parse_spatio_mode(detail::get_or<std::string>(j, "spatio_mode", "shared"));
  c.search.budgets = detail::get_or(j, "budgets", c.search.budgets);
  c.search.pca_dims = detail::get_or(j, "pca_dims", c.search.pca_dims);
  c.search.markov_p_min = detail::get_or(j, "markov_p_min", c.search.markov_p_min);
  c.search.d_max = detail::get_or(j, "d_max", c.search.d_max);
  if (j.contains("mask")) {
    const auto& m = j["mask"];
    c.mask.m_interested = detail::get_or(m, "m_interested", c.mask.m_interested);
    c.mask.m_context = detail::get_or(m, "m_context", c.mask.m_context);
    c.mask.m_nonrelevant = detail::get_or(m, "m_nonrelevant", c.mask.m_nonrelevant);
  }
  if (j.contains("span_rep")) {
    c.span_s0 = detail::get_or(j["span_rep"], "s0", c.span_s0);
    c.span_s1 = detail::get_or(j["span_rep"], "s1", c.span_s1);
  }
  c.workers = detail::get_or(j, "workers", c.workers);
  c.output_dir = resolve(detail::get_or<std::string>(j, "output_dir", "out"));
  c.cv_seed = detail::get_or<std::uint64_t>(j, "cv_seed", 42);
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_json_file(path), path.parent_path());
}

/// Layers of `b` selected by the config, in bundle order.
inline std::vector<int> select_layers(const RepresentationBundle& b, const std::vector<std::string>& wanted) {
  if (wanted.empty()) return b.layer_indices;
  std::vector<int> out;
  for (int l : b.layer_indices) {
    const auto label = b.layer_label(l);
    const bool hit = std::any_of(wanted.begin(), wanted.end(),
                                 [&](const std::string& w) { return w == label || w == "L" + std::to_string(l); });
    if (hit) out.push_back(l);
  }
  for (const auto& w : wanted) {
    const bool known = std::any_of(b.layer_indices.begin(), b.layer_indices.end(),
                                   [&](int l) { return w == b.layer_label(l) || w == "L" + std::to_string(l); });
    if (!known) throw ValidationError("config: layer '" + w + "' not in bundle " + b.model_name);
  }
  return out;
}

/// Visit frequencies of each state in the series.
inline std::vector<double> state_frequencies(const StateSeq& s, int nodes) {
  std::vector<double> a(static_cast<std::size_t>(1) << nodes, 0.0);
  for (int v : s) a[v] += 1.0;
  for (double& x : a) x /= static_cast<double>(s.size());
  return a;
}

struct StateMetrics {
  double phi3 = 0.0;
  std::vector<double> ci3;
  double phi4 = 0.0;
  std::vector<double> structure4;
};

/// Per-(TPM, state) results shared between rows; identical networks recur
/// under spatio controls.
class MetricCache {
 public:
  StateMetrics get(const Tpm& t, unsigned state) {
    const auto key = std::make_pair(t.sbn, state);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto f = cache_.find(key);
      if (f != cache_.end()) return f->second;
    }
    const auto net = t.network();
    StateMetrics m;
    const auto r3 = iit3::Analyzer(net, state).big_phi();
    m.phi3 = r3.phi;
    m.ci3 = r3.ci;
    const auto r4 = iit4::phi_structure_full_subsystem(net, state);
    m.phi4 = r4.phi;
    m.structure4 = r4.structure;
    std::lock_guard<std::mutex> lock(mu_);
    cache_.emplace(key, m);
    return m;
  }

 private:
  std::mutex mu_;
  std::map<std::pair<std::vector<double>, unsigned>, StateMetrics> cache_;
};

namespace detail {

inline std::vector<double> pad16(std::vector<double> v) {
  if (v.size() > 16) throw ShapeError("metric vector longer than 16");
  v.resize(16, 0.0);
  return v;
}

inline void mark_invalid(ResultRow& r, const std::string& failure) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  r.valid = false;
  r.failure = failure;
  r.phi_max_3 = r.phi_4 = nan;
  for (auto* v : {&r.ci_3, &r.phi_structure_4, &r.span_rep}) v->assign(16, nan);
}

/// One (bundle, layer, stimulus, span) unit: its responses re-expressed
/// against the stimulus once, shared by every permutation, seed and score.
struct Unit {
  const RepresentationBundle* bundle;
  int layer;
  const ItemRecord* stimulus;
  SpanKind span;
};

}  // namespace detail

/// Fills the metric fields of `row` from an accepted search outcome.
inline void compute_row_metrics(ResultRow& row, const SearchOutcome& s, const PipelineConfig& cfg, MetricCache& cache) {
  row.limited_tokens = s.best.limited_tokens;
  row.actual_tokens = s.best.actual_tokens;
  row.markov_p = s.best.p;
  row.ci_distance_d = s.best.d;
  const int T = s.reduced.length();
  const int s1 = cfg.span_s1 < 0 ? T + cfg.span_s1 : cfg.span_s1;
  const int s0 = std::min(cfg.span_s0, T - 1);
  row.span_rep = detail::pad16(span_representation(s.reduced, s0, std::clamp(s1, s0, T - 1)));

  const auto alpha = state_frequencies(s.states, s.tpm.nodes);
  std::vector<std::optional<double>> p3(alpha.size()), p4(alpha.size());
  std::vector<std::optional<std::vector<double>>> c3(alpha.size()), f4(alpha.size());
  try {
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      if (alpha[j] == 0.0) continue;
      const auto m = cache.get(s.tpm, static_cast<unsigned>(j));
      p3[j] = m.phi3;
      c3[j] = m.ci3;
      p4[j] = m.phi4;
      f4[j] = m.structure4;
    }
  } catch (const StateUnreachableError&) {
    detail::mark_invalid(row, "iit4_init_fail");
    return;
  } catch (const DegenerateRepertoireError&) {
    detail::mark_invalid(row, "iit4_init_fail");
    return;
  }
  row.phi_max_3 = iit3::state_weighted_average(p3, alpha);
  row.ci_3 = detail::pad16(iit3::state_weighted_average(c3, alpha));
  row.phi_4 = iit3::state_weighted_average(p4, alpha);
  row.phi_structure_4 = detail::pad16(iit3::state_weighted_average(f4, alpha));
}

/// Every (bundle, layer, stimulus, span, permutation, seed, score) row,
/// sorted by key. Stage failures become invalid rows.
inline std::vector<ResultRow> run_analysis(const PipelineConfig& cfg) {
  cfg.validate();
  std::vector<RepresentationBundle> bundles;
  for (const auto& p : cfg.bundles) bundles.push_back(load_bundle(p));
  std::vector<SpanAnnotationSet> spans(bundles.size());
  const bool masked = std::any_of(cfg.spans.begin(), cfg.spans.end(), [](SpanKind k) { return k != SpanKind::Entire; });
  if (masked && !cfg.spans_file) throw ValidationError("config: Complement/MSV spans need a spans_file");
  for (std::size_t b = 0; b < bundles.size(); ++b)
    if (cfg.spans_file) spans[b] = load_span_annotations(*cfg.spans_file, &bundles[b]);

  std::vector<detail::Unit> units;
  for (std::size_t b = 0; b < bundles.size(); ++b)
    for (int layer : select_layers(bundles[b], cfg.layers))
      for (const auto& it : bundles[b].items) {
        if (it.kind != ItemKind::stimulus) continue;
        for (SpanKind k : cfg.spans) {
          if (k != SpanKind::Entire && !spans[b].count(it.id))
            throw ValidationError("no span annotation for stimulus '" + it.id + "'");
          units.push_back({&bundles[b], layer, &it, k});
        }
      }

  std::vector<std::vector<ResultRow>> per_unit(units.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::optional<std::string> fatal;
  MetricCache cache;

  auto work = [&]() {
    for (std::size_t u; (u = next.fetch_add(1)) < units.size();) {
      try {
        const auto& unit = units[u];
        const auto& bundle = *unit.bundle;
        const auto& stim = *unit.stimulus;
        const TokenMatrix S = bundle.matrix(stim, unit.layer);
        const int levels = score_levels(stim.task);
        std::vector<std::vector<Candidate>> pools(levels);
        for (const auto& it : bundle.items) {
          if (it.kind != ItemKind::response || it.stimulus_id != stim.id) continue;
          const TokenMatrix R = bundle.matrix(it, unit.layer);
          TokenMatrix rep;
          if (unit.span == SpanKind::Entire) {
            rep = arr(R, S);
          } else {
            const auto& a = spans[unit.bundle - bundles.data()].at(stim.id);
            rep = carr(R, S, a.interested(unit.span), a.context(unit.span), cfg.mask);
          }
          pools[*it.score].push_back({it.id, it.augmented, std::move(rep)});
        }
        for (PermutationKind perm : cfg.permutations)
          for (int seed : cfg.seeds)
            for (int score = 0; score < levels; ++score) {
              ResultRow row;
              row.linguistic_span = unit.span;
              row.model_name = bundle.model_name;
              row.transformer_layer = bundle.layer_label(unit.layer);
              row.task = stim.task;
              row.sheet = stim.sheet;
              row.stimulus_id = stim.id;
              row.score = score;
              row.permutation_control = perm;
              row.seed = seed;
              if (pools[score].empty()) {
                detail::mark_invalid(row, "too_few_samples");
                row.markov_p = row.ci_distance_d = std::numeric_limits<double>::quiet_NaN();
                per_unit[u].push_back(std::move(row));
                continue;
              }
              PermutationSpec spec{perm, seed, cfg.spatio_mode, cfg.allow_any_seed};
              const auto found = search_optimal_series(pools[score], cfg.search, spec, row.key_string());
              if (!found.found) {
                detail::mark_invalid(row, found.failure);
                row.markov_p = row.ci_distance_d = std::numeric_limits<double>::quiet_NaN();
              } else {
                compute_row_metrics(row, found, cfg, cache);
              }
              per_unit[u].push_back(std::move(row));
            }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!fatal) fatal = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < cfg.workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (fatal) throw Error(*fatal);

  std::vector<ResultRow> rows;
  for (auto& v : per_unit)
    for (auto& r : v) rows.push_back(std::move(r));
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) { return a.key() < b.key(); });
  return rows;
}

}  // namespace rnphi
