#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "series_prep.hpp"
#include "tpm_markov.hpp"

namespace rnphi {

inline std::vector<int> default_budgets() {
  std::vector<int> b;
  for (int t = 50; t <= 1000; t += 50) b.push_back(t);
  return b;
}

inline std::vector<int> default_seeds() {
  std::vector<int> s;
  for (int x = 42; x <= 51; ++x) s.push_back(x);
  return s;
}

/// One response representation available to the search.
struct Candidate {
  std::string id;
  bool augmented = false;
  TokenMatrix rep;  // (C)ARR, n_tokens x D
};

struct SearchConfig {
  std::vector<int> budgets = default_budgets();
  int pca_dims = 4;
  double markov_p_min = 0.05;
  double d_max = 100.0;
};

/// Screening outcome of one budget.
struct Iteration {
  int limited_tokens = 0;
  int actual_tokens = 0;
  std::vector<std::string> items;  // concatenation order
  double d = std::numeric_limits<double>::quiet_NaN();
  double p = std::numeric_limits<double>::quiet_NaN();
  std::string failure;  // empty when accepted
};

struct SearchOutcome {
  bool found = false;
  std::string failure;  // set when !found
  Iteration best;
  ReducedSeries reduced;
  BinarySeries series;
  StateSeq states;
  Tpm tpm;
  std::vector<Iteration> iterations;
};

namespace detail {

/// How far an iteration got before failing; later stages rank higher.
inline int failure_stage(const std::string& f) {
  if (f == "ci_fail") return 4;
  if (f == "markov_fail") return 3;
  if (f == "degenerate_node") return 2;
  if (f == "too_few_samples") return 1;
  return 0;
}

}  // namespace detail

/// Draw order for one budget: originals first, each group shuffled; stops once
/// the running token count reaches the budget (the last item stays whole).
inline std::vector<int> draw_items(const std::vector<Candidate>& pool, int budget, Rng& rng) {
  std::vector<int> orig, aug;
  for (int i = 0; i < static_cast<int>(pool.size()); ++i) (pool[i].augmented ? aug : orig).push_back(i);
  rng.shuffle(orig);
  rng.shuffle(aug);
  std::vector<int> out;
  long tokens = 0;
  for (const auto* group : {&orig, &aug})
    for (int i : *group) {
      if (tokens >= budget) return out;
      out.push_back(i);
      tokens += pool[i].rep.rows();
    }
  return out;
}

/// Searches budgets for the concatenated series with the smallest
/// conditional-independence distance among those passing both screens.
/// `stream` keys the random draws (typically the result row key).
inline SearchOutcome search_optimal_series(const std::vector<Candidate>& pool, const SearchConfig& cfg,
                                           const PermutationSpec& spec, const std::string& stream) {
  if (pool.empty()) throw ValidationError("empty candidate pool");
  if (cfg.budgets.empty()) throw ValidationError("no budgets");
  for (std::size_t i = 1; i < cfg.budgets.size(); ++i)
    if (cfg.budgets[i] <= cfg.budgets[i - 1]) throw ValidationError("budgets must be ascending");
  spec.validate();
  long total = 0;
  for (const auto& c : pool) {
    if (c.rep.cols() != pool.front().rep.cols()) throw ShapeError("candidates differ in dimension");
    total += c.rep.rows();
  }

  SearchOutcome out;
  for (int budget : cfg.budgets) {
    Iteration it;
    it.limited_tokens = budget;
    Rng draw(stream_seed(stream + "|draw|" + std::to_string(budget), static_cast<std::uint64_t>(spec.seed)));
    auto order = draw_items(pool, budget, draw);
    if (spec.kind == PermutationKind::Temporal) order = temporal_permute(order, spec, stream + "|order|" + std::to_string(budget));
    std::vector<TokenMatrix> parts;
    for (int i : order) {
      it.items.push_back(pool[i].id);
      parts.push_back(pool[i].rep);
      it.actual_tokens += static_cast<int>(pool[i].rep.rows());
    }
    TokenMatrix X = concatenate_series(parts);
    if (spec.kind == PermutationKind::Spatio) X = spatio_permute(X, spec, stream + "|spatio");

    ReducedSeries red;
    BinarySeries bin;
    StateSeq states;
    Tpm tpm;
    try {
      if (X.rows() <= cfg.pca_dims + 1) throw TestUndefinedError("too few tokens");
      red = pca_reduce(X, cfg.pca_dims);
      bin = standardize_binarize(red);
      states = encode_states(bin);
      it.p = markov_property_test(states).p;
      tpm = build_tpm(states, cfg.pca_dims);
      it.d = conditional_independence_distance(tpm);
      if (!(it.p > cfg.markov_p_min)) it.failure = "markov_fail";
      else if (!(it.d < cfg.d_max)) it.failure = "ci_fail";
    } catch (const DegenerateNodeError&) {
      it.failure = "degenerate_node";
    } catch (const TestUndefinedError&) {
      it.failure = X.rows() <= cfg.pca_dims + 1 ? "too_few_samples" : "markov_fail";
    } catch (const ValidationError&) {
      it.failure = "degenerate_node";
    }
    const bool better = it.failure.empty() &&
                        (!out.found || it.d < out.best.d || (it.d == out.best.d && it.items < out.best.items));
    if (better) {
      out.found = true;
      out.best = it;
      out.reduced = std::move(red);
      out.series = std::move(bin);
      out.states = std::move(states);
      out.tpm = std::move(tpm);
    }
    out.iterations.push_back(std::move(it));
    if (total <= budget) break;  // every later budget would draw the whole pool again
  }
  if (!out.found) {
    std::string worst = "too_few_samples";
    for (const auto& it : out.iterations)
      if (detail::failure_stage(it.failure) > detail::failure_stage(worst)) worst = it.failure;
    out.failure = worst;
  }
  return out;
}

}  // namespace rnphi
