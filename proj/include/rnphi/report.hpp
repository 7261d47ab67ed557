#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "bundle_io.hpp"
#include "criteria.hpp"
#include "error.hpp"

namespace rnphi {

enum class ReportKind { phi_distributions, criterion1, criterion2, criterion3 };

inline const char* to_string(ReportKind k) {
  switch (k) {
    case ReportKind::phi_distributions: return "phi_distributions";
    case ReportKind::criterion1: return "criterion1";
    case ReportKind::criterion2: return "criterion2";
    case ReportKind::criterion3: return "criterion3";
  }
  return "";
}

inline ReportKind parse_report_kind(const std::string& s) {
  for (auto k : {ReportKind::phi_distributions, ReportKind::criterion1, ReportKind::criterion2, ReportKind::criterion3})
    if (s == to_string(k)) return k;
  throw ValidationError("unknown report kind '" + s + "'");
}

namespace detail {

inline json key_json(const GroupKey& k) {
  return {{"task", k.task}, {"model_name", k.model}, {"transformer_layer", k.layer}, {"linguistic_span", k.span},
          {"permutation_control", k.permutation}};
}

inline json tests_json(const std::vector<PairTest>& tests) {
  json a = json::array();
  for (const auto& t : tests)
    a.push_back({{"scores", {t.lo, t.hi}}, {"n", {t.n_lo, t.n_hi}}, {"p_raw", real_json(t.p_raw)},
                 {"p_holm", real_json(t.p_adj)}, {"significant", t.significant}});
  return a;
}

inline void write_lines(const std::filesystem::path& p, const std::vector<json>& records) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  for (const auto& r : records) out << r.dump() << '\n';
  if (!out) throw IoError("failed writing " + p.string());
}

inline void write_table(const std::filesystem::path& p, const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << csv_quote(r[i]);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + p.string());
}

inline std::vector<std::string> key_cells(const GroupKey& k) { return {k.task, k.model, k.layer, k.span, k.permutation}; }

inline std::vector<std::string> key_header() {
  return {"task", "model_name", "transformer_layer", "linguistic_span", "permutation_control"};
}

}  // namespace detail

/// Files written by one emit_report call.
struct ReportFiles {
  std::vector<std::filesystem::path> paths;
  bool empty = false;
};

/// Writes the data behind one family of plots into `dir`: a JSON-lines
/// record stream `<kind>.jsonl`, plus `<kind>_summary.csv` for criteria.
/// When no valid rows survive, only `<kind>.empty.txt` is written.
inline ReportFiles emit_report(const std::vector<ResultRow>& rows, ReportKind kind, const std::filesystem::path& dir,
                               const CvConfig& cv = {}) {
  std::filesystem::create_directories(dir);
  const std::string name = to_string(kind);
  ReportFiles files;
  const bool any_valid = std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.valid; });
  if (!any_valid) {
    const auto p = dir / (name + ".empty.txt");
    std::ofstream out(p, std::ios::binary);
    out << name << ": no valid rows survived the filters (" << rows.size() << " rows read)\n";
    if (!out) throw IoError("cannot write " + p.string());
    files.paths.push_back(p);
    files.empty = true;
    return files;
  }
  std::vector<json> records;
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header = detail::key_header();
  using detail::fmt_real;

  if (kind == ReportKind::phi_distributions) {
    std::map<GroupKey, std::map<int, std::pair<std::vector<double>, std::vector<double>>>> groups;
    std::map<GroupKey, int> invalid;
    for (const auto& r : rows) {
      auto& g = groups[GroupKey::of(r)];
      for (int s = 0; s < score_levels(r.task); ++s) g[s];
      if (!r.valid) {
        ++invalid[GroupKey::of(r)];
        continue;
      }
      g[r.score].first.push_back(r.phi_max_3);
      g[r.score].second.push_back(r.phi_4);
    }
    for (const auto& [key, by_score] : groups) {
      json rec = detail::key_json(key);
      json series = json::array();
      for (const auto& [s, v] : by_score)
        series.push_back({{"score", s}, {"n", v.first.size()}, {"phi_max_3", v.first}, {"phi_4", v.second}});
      rec["series"] = series;
      rec["invalid_rows"] = invalid[key];
      records.push_back(rec);
    }
  } else if (kind == ReportKind::criterion1) {
    header.insert(header.end(), {"metric", "valid_stimuli", "good", "bad", "fraction_good", "pass"});
    for (const auto& g : criterion1_evaluate(rows)) {
      json rec = detail::key_json(g.key);
      rec["metric"] = g.metric;
      rec["stimuli"] = g.stimuli;
      rec["valid_stimuli"] = g.valid_stimuli;
      rec["good"] = g.good;
      rec["bad"] = g.bad;
      rec["fraction_good"] = detail::real_json(g.fraction);
      rec["pass"] = g.pass;
      rec["no_data"] = g.no_data;
      rec["tests"] = detail::tests_json(g.tests);
      json verdicts = json::array();
      for (const auto& v : g.verdicts) {
        json means = json::object();
        for (const auto& [s, m] : v.seed_mean) means[std::to_string(s)] = m;
        verdicts.push_back({{"sheet", v.sheet}, {"stimulus_id", v.stimulus_id}, {"seed_means", means},
                            {"verdict", to_string(v.verdict)}});
      }
      rec["stimuli_verdicts"] = verdicts;
      records.push_back(rec);
      auto cells = detail::key_cells(g.key);
      cells.insert(cells.end(), {g.metric, std::to_string(g.valid_stimuli), std::to_string(g.good), std::to_string(g.bad),
                                 fmt_real(g.fraction), g.pass ? "true" : "false"});
      table.push_back(cells);
    }
  } else if (kind == ReportKind::criterion2) {
    header.insert(header.end(), {"metric", "scores", "n_lo", "n_hi", "p_raw", "p_holm", "significant"});
    for (const auto& g : criterion2_evaluate(rows)) {
      json rec = detail::key_json(g.key);
      rec["metric"] = g.metric;
      json n = json::object();
      for (const auto& [s, c] : g.n_per_score) n[std::to_string(s)] = c;
      rec["n_per_score"] = n;
      rec["no_data"] = g.no_data;
      rec["tests"] = detail::tests_json(g.tests);
      records.push_back(rec);
      for (const auto& t : g.tests) {
        auto cells = detail::key_cells(g.key);
        cells.insert(cells.end(), {g.metric, std::to_string(t.lo) + "-" + std::to_string(t.hi), std::to_string(t.n_lo),
                                   std::to_string(t.n_hi), fmt_real(t.p_raw), fmt_real(t.p_adj),
                                   t.significant ? "true" : "false"});
        table.push_back(cells);
      }
    }
  } else {
    header.insert(header.end(), {"metric", "mean_auc", "sd_auc", "rank", "iit_beats_span", "excluded"});
    for (const auto& g : criterion3_evaluate(rows, cv)) {
      json rec = detail::key_json(g.key);
      json n = json::object();
      for (const auto& [s, c] : g.n_per_score) n[std::to_string(s)] = c;
      rec["n_per_score"] = n;
      rec["excluded"] = g.excluded;
      rec["reason"] = g.reason;
      json bars = json::array();
      for (const auto& m : g.ranking)
        bars.push_back({{"metric", m.metric}, {"mean_auc", m.mean}, {"sd_auc", m.sd}, {"rank", m.rank},
                        {"dropped_features", m.dropped_features}});
      rec["bars"] = bars;
      rec["iit_beats_span"] = g.iit_beats_span;
      records.push_back(rec);
      if (g.excluded) {
        auto cells = detail::key_cells(g.key);
        cells.insert(cells.end(), {"", "nan", "nan", "", "false", "true"});
        table.push_back(cells);
      }
      for (const auto& m : g.ranking) {
        auto cells = detail::key_cells(g.key);
        cells.insert(cells.end(), {m.metric, fmt_real(m.mean), fmt_real(m.sd), std::to_string(m.rank),
                                   g.iit_beats_span ? "true" : "false", "false"});
        table.push_back(cells);
      }
    }
  }
  const auto jl = dir / (name + ".jsonl");
  detail::write_lines(jl, records);
  files.paths.push_back(jl);
  if (kind != ReportKind::phi_distributions) {
    const auto csv = dir / (name + "_summary.csv");
    detail::write_table(csv, header, table);
    files.paths.push_back(csv);
  }
  return files;
}

}  // namespace rnphi
