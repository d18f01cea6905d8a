#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "provaudit/ann_index.hpp"
#include "provaudit/audit.hpp"
#include "provaudit/calibration.hpp"
#include "provaudit/feature_store.hpp"
#include "provaudit/manifest.hpp"
#include "provaudit/metric.hpp"

namespace provaudit {

namespace fs = std::filesystem;

struct AnnConfig {
  std::uint32_t max_degree = 16;
  std::uint32_t ef_construction = 64;
  std::uint32_t ef_search = 64;
  std::uint64_t seed = 0x5EEDull;
  bool operator==(const AnnConfig&) const = default;
};

// Settings shared by every command. Stored as config.json in the workspace;
// command-line flags override the stored values.
struct CliConfig {
  int canonical_size = 64;
  std::uint64_t filter_seed = kDefaultFilterSeed;
  AnnConfig ann;
  std::uint32_t k = 32;
  std::uint32_t rerank = 32;
  std::string threshold_policy = "youden";
  AttributionPolicy attribution;
  std::string corpus_dir;

  // Throws ConfigError when a value is out of range:
  //   canonical_size in {64, 128, 256}; max_degree in [2, 256];
  //   ef_construction, ef_search, k, rerank in [1, 4096].
  void validate() const;

  std::string to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static CliConfig from_json(const std::string& text);

  AnnParams ann_params() const;
  bool operator==(const CliConfig&) const = default;
};

// Identifier written into the feature file; a workspace can only be audited
// with the extractor that produced it.
std::string embedder_id(const CliConfig& config);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const fs::path& path, const std::string& text);
std::vector<std::uint8_t> read_file(const fs::path& path);

class Workspace {
 public:
  explicit Workspace(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& dir() const noexcept { return dir_; }
  fs::path config_path() const { return dir_ / "config.json"; }
  fs::path manifest_path() const { return dir_ / "manifest.json"; }
  fs::path features_path() const { return dir_ / "features.paf"; }
  fs::path index_path() const { return dir_ / "index.pai"; }
  fs::path threshold_path() const { return dir_ / "threshold.json"; }
  fs::path weights_path() const { return dir_ / "weights.json"; }
  fs::path roc_path() const { return dir_ / "roc.csv"; }
  fs::path pr_path() const { return dir_ / "pr.csv"; }

  // Defaults when no config has been saved yet.
  CliConfig load_config() const;
  void save_config(const CliConfig& config) const;

  // The loaders throw ConfigError naming the command that creates the file.
  CorpusManifest load_manifest() const;
  FeatureFile load_features() const;
  AnnIndex load_index(std::shared_ptr<const EmbeddingSet> set) const;
  DecisionThreshold load_threshold() const;
  std::optional<CalibrationWeights> load_weights() const;

 private:
  fs::path dir_;
};

std::string threshold_to_json(const DecisionThreshold& t, double auc);
DecisionThreshold threshold_from_json(const std::string& text);
std::string weights_to_json(const CalibrationWeights& w);
CalibrationWeights weights_from_json(const std::string& text);

// Reads an image file and brings it to the canonical size.
ImageTensor load_canonical_image(const fs::path& path, CanonicalSize size);

// Regular, non-hidden files under `dir` (recursively), sorted by relative
// path.
std::vector<fs::path> list_files(const fs::path& dir);

CorpusManifest cmd_ingest(const fs::path& corpus_dir, const Workspace& ws,
                          const CliConfig& config, std::ostream& log);

struct IndexStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double seconds = 0.0;
};
IndexStats cmd_build_index(const Workspace& ws, const CliConfig& config,
                           std::ostream& log);

struct CalibrationOutcome {
  DecisionThreshold threshold;
  double auc = 0.0;
  std::size_t pairs = 0;
};
// CSV header: id_a,id_b,label. Ids are manifest entry ids or image paths
// (relative paths resolve against the CSV's directory). Labels are
// similar/dissimilar or 1/0.
CalibrationOutcome cmd_calibrate(const fs::path& pairs_csv, const Workspace& ws,
                                 const CliConfig& config, bool fit_weights,
                                 std::ostream& log);

struct AuditOptions {
  std::string model_id = "unknown";
  std::optional<std::string> user_id;
  std::optional<std::string> labor_note;
};
AuditReport cmd_audit(const fs::path& samples_dir, const Workspace& ws,
                      const CliConfig& config, const AuditOptions& options);

// 3 when any replication was found, else 1 when any sample failed, else 0.
int audit_exit_code(const AuditReport& report);

struct BenchRow {
  std::string method;  // "exact" or "ann"
  std::size_t ef_search = 0;
  double queries_per_second = 0.0;
  double recall_at_1 = 0.0;
  double recall_at_10 = 0.0;
};
struct BenchOptions {
  std::size_t queries = 200;
  std::uint64_t seed = 7;
  std::vector<std::size_t> ef_values{16, 32, 64, 128};
};
std::vector<BenchRow> cmd_bench(const Workspace& ws, const CliConfig& config,
                                const BenchOptions& options, std::ostream& out);

}  // namespace provaudit
