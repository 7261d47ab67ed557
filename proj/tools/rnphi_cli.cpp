#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "rnphi/bundle_io.hpp"
#include "rnphi/pipeline.hpp"
#include "rnphi/report.hpp"

namespace fs = std::filesystem;
using namespace rnphi;

namespace {

enum Exit { kOk = 0, kFailure = 1, kInvalid = 2, kPartial = 3, kIo = 4 };

int run_analyze(const std::string& config_path, const std::string& bundle, const std::string& spans,
                const std::string& out, int workers) {
  auto cfg = load_config(config_path);
  if (!bundle.empty()) cfg.bundles = {bundle};
  if (!spans.empty()) cfg.spans_file = fs::path(spans);
  if (!out.empty()) cfg.output_dir = out;
  if (workers > 0) cfg.workers = workers;
  cfg.validate();
  const auto rows = run_analysis(cfg);
  fs::create_directories(cfg.output_dir);
  write_result_rows(rows, cfg.output_dir / "results");
  long invalid = 0;
  for (const auto& r : rows) invalid += !r.valid;
  std::cout << rows.size() << " rows (" << invalid << " invalid) written to " << (cfg.output_dir / "results").string()
            << ".{csv,jsonl}\n";
  return invalid ? kPartial : kOk;
}

int run_report(const std::string& rows_path, const std::string& kind, const std::string& out, std::uint64_t cv_seed) {
  const auto rows = read_result_rows(rows_path);
  std::vector<ReportKind> kinds;
  if (kind == "all")
    kinds = {ReportKind::phi_distributions, ReportKind::criterion1, ReportKind::criterion2, ReportKind::criterion3};
  else
    kinds = {parse_report_kind(kind)};
  CvConfig cv;
  cv.seed = cv_seed;
  for (auto k : kinds) {
    const auto files = emit_report(rows, k, out, cv);
    for (const auto& p : files.paths) std::cout << p.string() << '\n';
  }
  return kOk;
}

int run_validate(const std::string& bundle, const std::string& spans, const std::string& rows) {
  if (!bundle.empty()) {
    const auto b = load_bundle(bundle);
    int stimuli = 0, responses = 0, augmented = 0;
    for (const auto& it : b.items) {
      (it.kind == ItemKind::stimulus ? stimuli : responses) += 1;
      augmented += it.augmented;
    }
    std::cout << "bundle " << b.model_name << ": D = " << b.embedding_dim << ", " << b.layer_indices.size()
              << " layers, " << stimuli << " stimuli, " << responses << " responses (" << augmented << " augmented)\n";
    if (!spans.empty()) {
      const auto s = load_span_annotations(spans, &b);
      std::cout << "spans: " << s.size() << " stimuli annotated\n";
    }
  } else if (!spans.empty()) {
    std::cout << "spans: " << load_span_annotations(spans).size() << " stimuli annotated\n";
  }
  if (!rows.empty()) std::cout << "results: " << read_result_rows(rows).size() << " rows\n";
  if (bundle.empty() && spans.empty() && rows.empty()) throw ValidationError("validate: nothing to check");
  return kOk;
}

int run_golden(bool regenerate, const std::string& oracle_dir, const std::string& python) {
  const std::vector<std::string> scripts{"gen_repertoire_golden.py", "gen_iit3_golden.py", "gen_iit4_golden.py",
                                         "gen_emd_golden.py", "gen_pca_golden.py", "gen_stats_golden.py",
                                         "make_fixture_bundle.py"};
  const fs::path dir(oracle_dir);
  if (!regenerate) {
    std::cout << "oracle scripts in " << dir.string() << " (pass --regenerate to rerun them):\n";
    for (const auto& s : scripts) std::cout << "  " << s << (fs::exists(dir / s) ? "" : "  [missing]") << '\n';
    return kOk;
  }
  for (const auto& s : scripts) {
    const auto cmd = python + " " + (dir / s).string();
    std::cout << "$ " << cmd << std::endl;
    if (std::system(cmd.c_str()) != 0) {
      std::cerr << "oracle script failed: " << s << '\n';
      return kFailure;
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integrated-information analysis of language-model representation networks"};
  app.require_subcommand(1);

  std::string config, bundle, spans, out;
  int workers = 0;
  auto* analyze = app.add_subcommand("analyze", "Run the pipeline and write result rows");
  analyze->add_option("--config", config, "Pipeline config file")->required();
  analyze->add_option("--bundle", bundle, "Bundle directory (overrides the config)");
  analyze->add_option("--spans", spans, "Span annotation file (overrides the config)");
  analyze->add_option("--out", out, "Output directory (overrides the config)");
  analyze->add_option("--workers", workers, "Worker threads (overrides the config)");

  std::string rows, kind = "all", report_out;
  std::uint64_t cv_seed = 42;
  auto* report = app.add_subcommand("report", "Emit plot data and criterion summaries from result rows");
  report->add_option("--rows", rows, "results.jsonl or results.csv")->required();
  report->add_option("--kind", kind, "phi_distributions, criterion1, criterion2, criterion3 or all");
  report->add_option("--out", report_out, "Output directory")->required();
  report->add_option("--cv-seed", cv_seed, "Seed for cross-validation folds");

  std::string v_bundle, v_spans, v_rows;
  auto* validate = app.add_subcommand("validate", "Check a bundle, span file or result file");
  validate->add_option("--bundle", v_bundle, "Bundle directory");
  validate->add_option("--spans", v_spans, "Span annotation file");
  validate->add_option("--rows", v_rows, "Result file");

  bool regenerate = false;
  std::string oracle_dir = RNPHI_ORACLE_DIR, python = "python3";
  auto* golden = app.add_subcommand("golden", "List or regenerate oracle fixtures");
  golden->add_flag("--regenerate", regenerate, "Rerun the oracle scripts and overwrite the fixtures");
  golden->add_option("--oracle-dir", oracle_dir, "Directory holding the oracle scripts");
  golden->add_option("--python", python, "Python interpreter with the oracle dependencies");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*analyze) return run_analyze(config, bundle, spans, out, workers);
    if (*report) return run_report(rows, kind, report_out, cv_seed);
    if (*validate) return run_validate(v_bundle, v_spans, v_rows);
    if (*golden) return run_golden(regenerate, oracle_dir, python);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
