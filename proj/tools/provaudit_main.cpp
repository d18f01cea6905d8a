// provaudit: training-data replication audits for generated images.
//
//   provaudit ingest <corpus_dir> --workspace ws
//   provaudit build-index --workspace ws
//   provaudit calibrate <pairs.csv> --workspace ws [--policy youden] [--fit-weights]
//   provaudit audit <samples_dir> --workspace ws [--format text|json] [--out file]
//   provaudit bench --workspace ws
//
// Exit status: 0 success (audit: every sample novel), 3 replication found,
// 1 any error.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "provaudit/error.hpp"
#include "provaudit/workspace.hpp"

namespace {

struct Overrides {
  std::optional<int> size;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policy;
  std::optional<std::uint32_t> ef_search;
  std::optional<std::uint32_t> k;
  std::optional<std::uint32_t> rerank;

  void apply(provaudit::CliConfig& c) const {
    if (size) c.canonical_size = *size;
    if (seed) c.filter_seed = *seed;
    if (policy) c.threshold_policy = *policy;
    if (ef_search) c.ann.ef_search = *ef_search;
    if (k) c.k = *k;
    if (rerank) c.rerank = *rerank;
    c.validate();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audit generated images for replication of training data"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string workspace;
  Overrides ov;
  app.add_option("--workspace,-w", workspace, "Workspace directory")->required();
  app.add_option("--size", ov.size, "Canonical image side (64, 128 or 256)");
  app.add_option("--seed", ov.seed, "Filter bank seed");
  app.add_option("--policy", ov.policy, "Threshold policy: youden, fpr:V, tpr:V or fixed:V");
  app.add_option("--ef-search", ov.ef_search, "ANN search beam width");
  app.add_option("--k", ov.k, "Coarse candidates per sample");
  app.add_option("--rerank", ov.rerank, "Candidates re-scored with the perceptual distance");

  std::string corpus_dir;
  auto* ingest = app.add_subcommand("ingest", "Decode, feature and record a training corpus");
  ingest->add_option("corpus_dir", corpus_dir, "Directory of training images")->required();

  auto* build = app.add_subcommand("build-index", "Build the approximate nearest-neighbor index");

  std::string pairs_csv;
  bool fit_weights = false;
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate the decision threshold");
  calibrate->add_option("pairs_csv", pairs_csv, "CSV with header id_a,id_b,label")->required();
  calibrate->add_flag("--fit-weights", fit_weights, "Also fit per-channel distance weights");

  std::string samples_dir;
  std::string format = "text";
  std::string out_path;
  provaudit::AuditOptions audit_opts;
  std::optional<std::string> user_id;
  std::optional<std::string> labor_note;
  auto* audit = app.add_subcommand("audit", "Audit a directory of generated samples");
  audit->add_option("samples_dir", samples_dir, "Directory of generated images")->required();
  audit->add_option("--format", format, "Report format: text or json");
  audit->add_option("--out", out_path, "Write the report to a file instead of stdout");
  audit->add_option("--model-id", audit_opts.model_id, "Model that produced the samples");
  audit->add_option("--user-id", user_id, "User who requested the samples");
  audit->add_option("--labor-note", labor_note, "Free-form note carried into the report");

  provaudit::BenchOptions bench_opts;
  auto* bench = app.add_subcommand("bench", "Compare exact and approximate search");
  bench->add_option("--queries", bench_opts.queries, "Number of seeded queries");
  bench->add_option("--bench-seed", bench_opts.seed, "Query generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const provaudit::Workspace ws{workspace};
    provaudit::CliConfig config = ws.load_config();
    ov.apply(config);

    if (*ingest) {
      provaudit::cmd_ingest(corpus_dir, ws, config, std::cerr);
    } else if (*build) {
      provaudit::cmd_build_index(ws, config, std::cout);
    } else if (*calibrate) {
      provaudit::cmd_calibrate(pairs_csv, ws, config, fit_weights, std::cout);
    } else if (*audit) {
      const auto fmt = provaudit::parse_report_format(format);
      audit_opts.user_id = user_id;
      audit_opts.labor_note = labor_note;
      const auto report = provaudit::cmd_audit(samples_dir, ws, config, audit_opts);
      const std::string text = provaudit::render_report(report, fmt);
      if (out_path.empty()) {
        std::cout << text;
      } else {
        provaudit::write_file_atomic(out_path, text);
      }
      for (const auto& item : report.items) {
        if (item.error) {
          std::cerr << "error: " << item.error->source << ": " << item.error->message << "\n";
        }
      }
      return provaudit::audit_exit_code(report);
    } else if (*bench) {
      provaudit::cmd_bench(ws, config, bench_opts, std::cout);
    }
  } catch (const provaudit::UnattainablePolicyError& e) {
    std::cerr << "error: " << e.what() << " (closest attainable: TPR " << e.frontier_tpr()
              << ", FPR " << e.frontier_fpr() << ")\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
