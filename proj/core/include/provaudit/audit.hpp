#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "provaudit/ann_index.hpp"
#include "provaudit/calibration.hpp"
#include "provaudit/embedding.hpp"
#include "provaudit/feature_store.hpp"
#include "provaudit/image.hpp"
#include "provaudit/manifest.hpp"
#include "provaudit/metric.hpp"

namespace provaudit {

// The closed set of parties that may be credited with a generated sample.
enum class Attribution {
  kDataOwner,
  kDatasetCollector,
  kDeveloper,
  kEndUser,
  kModelItself,
  kPublicDomain,
};

std::string to_string(Attribution a);
Attribution parse_attribution(const std::string& text);
std::span<const Attribution> all_attributions();

struct AttributionCandidate {
  Attribution candidate = Attribution::kDeveloper;
  std::string rationale;
  bool operator==(const AttributionCandidate&) const = default;
};

struct AttributionPolicy {
  Attribution on_replication = Attribution::kDataOwner;
  Attribution on_novel = Attribution::kDeveloper;
  bool operator==(const AttributionPolicy&) const = default;
};

struct AuditRequest {
  ImageTensor sample;  // at the corpus canonical size
  std::string model_id;
  std::optional<std::string> user_id;
  // Free-form note on how hard the sample was to produce. Carried into the
  // report verbatim and never scored.
  std::optional<std::string> labor_note;
  std::string source;  // display label, e.g. the sample file name
  // Digest of the original encoded bytes, when known. A match against the
  // manifest guarantees the duplicate is among the re-ranked candidates.
  std::optional<std::string> source_sha256;
};

enum class Decision { kReplication, kNovel };
std::string to_string(Decision d);

struct AuditVerdict {
  std::string sample_ref;  // sha256 of the canonical sample tensor
  std::string source;
  std::string model_id;
  std::optional<std::string> user_id;
  std::optional<std::string> labor_note;
  Neighbor nearest;
  std::string nearest_path;
  DecisionThreshold threshold;
  Decision decision = Decision::kNovel;
  double margin = 0.0;  // threshold - fine distance
  AttributionCandidate attribution;
  // Other re-ranked entries whose fine distance is within 1e-9 of nearest.
  std::vector<std::uint64_t> ties;
};

// Everything an audit needs besides the sample. References must outlive the
// context.
struct AuditContext {
  const CorpusManifest& manifest;
  const FeatureFile& features;
  const AnnIndex& index;
  const FilterBank& bank;
  CalibrationWeights weights;
  DecisionThreshold threshold;
  AttributionPolicy policy;
  std::size_t k = 32;
  std::size_t ef_search = 64;
  std::size_t rerank = 32;
};

// Throws CorpusIntegrityError when manifest, features and index disagree.
void check_corpus_integrity(const AuditContext& ctx);

AuditVerdict audit_sample(const AuditRequest& req, const AuditContext& ctx);

struct AuditError {
  std::string source;
  std::string message;
};

struct AuditItem {
  std::optional<AuditVerdict> verdict;
  std::optional<AuditError> error;
};

struct ClosestPair {
  std::string source;
  std::string sample_ref;
  std::uint64_t entry_id = 0;
  double fine_distance = 0.0;
};

struct AuditSummary {
  std::size_t total = 0;  // samples with a verdict
  std::size_t errors = 0;
  std::size_t replications = 0;
  double replication_rate = 0.0;  // replications / total, 0 for an empty batch
  double histogram_min = 0.0;
  double histogram_max = 0.0;
  std::vector<std::size_t> histogram;  // 32 uniform bins over [min, max]
  std::vector<ClosestPair> closest;    // up to 10, ascending
};

struct AuditReport {
  static constexpr int kSchemaVersion = 1;
  std::vector<AuditItem> items;  // input order
  AuditSummary summary;
};

inline constexpr std::size_t kHistogramBins = 32;
inline constexpr std::size_t kClosestPairs = 10;

// Audits every request (in parallel) and records per-sample failures as
// error items instead of aborting.
AuditReport audit_batch(std::span<const AuditRequest> requests,
                        const AuditContext& ctx);

// Adds a failure for an input that never became a request (e.g. a file
// that did not decode). Call before summarize().
void add_error(AuditReport& report, std::string source, std::string message);
void summarize(AuditReport& report);

enum class ReportFormat { kText, kJson };
ReportFormat parse_report_format(const std::string& text);

std::string render_report(const AuditReport& report, ReportFormat format);

// sha256 of the tensor's little-endian float32 values.
std::string tensor_digest(const ImageTensor& img);

}  // namespace provaudit
