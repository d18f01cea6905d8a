#include "provaudit/audit.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "provaudit/digest.hpp"
#include "provaudit/error.hpp"
#include "provaudit/parallel.hpp"

namespace provaudit {

namespace {

constexpr std::array<Attribution, 6> kAttributions{
    Attribution::kDataOwner,   Attribution::kDatasetCollector,
    Attribution::kDeveloper,   Attribution::kEndUser,
    Attribution::kModelItself, Attribution::kPublicDomain,
};

constexpr double kTieTolerance = 1e-9;

std::string rationale_for(Decision d, Attribution a, const AuditVerdict& v) {
  char buf[160];
  if (d == Decision::kReplication) {
    std::snprintf(buf, sizeof(buf),
                  "sample replicates corpus entry %llu (distance %.6g <= threshold %.6g); "
                  "policy credits %s",
                  static_cast<unsigned long long>(v.nearest.entry_id),
                  v.nearest.fine_distance.value_or(0.0), v.threshold.value,
                  to_string(a).c_str());
  } else {
    std::snprintf(buf, sizeof(buf),
                  "no corpus entry within threshold %.6g (nearest %llu at %.6g); "
                  "policy credits %s",
                  v.threshold.value,
                  static_cast<unsigned long long>(v.nearest.entry_id),
                  v.nearest.fine_distance.value_or(0.0), to_string(a).c_str());
  }
  return buf;
}

}  // namespace

std::string to_string(Attribution a) {
  switch (a) {
    case Attribution::kDataOwner:
      return "data_owner";
    case Attribution::kDatasetCollector:
      return "dataset_collector";
    case Attribution::kDeveloper:
      return "developer";
    case Attribution::kEndUser:
      return "end_user";
    case Attribution::kModelItself:
      return "model_itself";
    case Attribution::kPublicDomain:
      return "public_domain";
  }
  return "developer";
}

Attribution parse_attribution(const std::string& text) {
  for (Attribution a : kAttributions) {
    if (to_string(a) == text) return a;
  }
  throw ConfigError("unknown attribution candidate '" + text + "'");
}

std::span<const Attribution> all_attributions() { return kAttributions; }

std::string to_string(Decision d) {
  return d == Decision::kReplication ? "replication" : "novel";
}

std::string tensor_digest(const ImageTensor& img) {
  Sha256 h;
  std::array<std::uint8_t, 4> le;
  for (float v : img.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) le[i] = static_cast<std::uint8_t>(bits >> (8 * i));
    h.update(le);
  }
  return h.finish().hex();
}

void check_corpus_integrity(const AuditContext& ctx) {
  const std::size_t n = ctx.manifest.entries.size();
  if (n == 0 || ctx.features.size() == 0 || ctx.index.size() == 0) {
    throw EmptyCorpusError();
  }
  if (ctx.features.size() != n || ctx.index.size() != n) {
    throw CorpusIntegrityError("manifest, feature file and index disagree on corpus size");
  }
  if (ctx.index.fingerprint() != corpus_fingerprint(ctx.manifest)) {
    throw CorpusIntegrityError("index was built for a different corpus (fingerprint mismatch)");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (ctx.features.records()[i].entry_id != ctx.manifest.entries[i].id) {
      throw CorpusIntegrityError("feature file entry order does not match the manifest");
    }
  }
}

AuditVerdict audit_sample(const AuditRequest& req, const AuditContext& ctx) {
  check_corpus_integrity(ctx);
  const FeatureStack stack = extract_features(req.sample, ctx.bank);
  if (level_shapes(stack) != std::vector<LevelShape>(ctx.features.shapes().begin(),
                                                     ctx.features.shapes().end())) {
    throw ConfigError("sample features do not match the corpus feature shapes; "
                      "was the sample preprocessed to the corpus canonical size?");
  }
  const PooledEmbedding pooled = pool_features(stack);
  const std::size_t k = std::max<std::size_t>(1, std::min(ctx.k, ctx.index.size()));
  AnnResult coarse = ann_knn(ctx.index, pooled.vector, k, std::max(ctx.ef_search, k));
  std::vector<Neighbor> ranked =
      rerank(coarse.neighbors, stack, ctx.features, ctx.weights, ctx.rerank);

  // A byte-identical training file is always scored, even if the coarse
  // search missed it.
  if (req.source_sha256) {
    if (const ManifestEntry* dup = ctx.manifest.find_by_hash(*req.source_sha256)) {
      const bool present = std::any_of(ranked.begin(), ranked.end(),
                                       [&](const Neighbor& n) { return n.entry_id == dup->id; });
      if (!present) {
        const FeatureRecord* rec = ctx.features.find(dup->id);
        if (rec == nullptr) {
          throw CorpusIntegrityError("no stored features for entry " + std::to_string(dup->id));
        }
        const Neighbor forced{dup->id, embedding_distance(pooled.vector, rec->pooled.vector),
                              std::nullopt};
        const auto scored = rerank(std::span(&forced, 1), stack, ctx.features, ctx.weights, 1);
        ranked.push_back(scored.front());
        std::sort(ranked.begin(), ranked.end(), fine_less);
      }
    }
  }

  AuditVerdict v;
  v.sample_ref = tensor_digest(req.sample);
  v.source = req.source;
  v.model_id = req.model_id;
  v.user_id = req.user_id;
  v.labor_note = req.labor_note;
  v.nearest = ranked.front();
  if (const ManifestEntry* e = ctx.manifest.find_by_id(v.nearest.entry_id)) {
    v.nearest_path = e->path;
  }
  v.threshold = ctx.threshold;
  const double fine = *v.nearest.fine_distance;
  v.decision = is_replication(fine, ctx.threshold) ? Decision::kReplication : Decision::kNovel;
  v.margin = ctx.threshold.value - fine;
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    if (*ranked[i].fine_distance - fine <= kTieTolerance) v.ties.push_back(ranked[i].entry_id);
  }
  const Attribution who = v.decision == Decision::kReplication ? ctx.policy.on_replication
                                                               : ctx.policy.on_novel;
  v.attribution = {who, rationale_for(v.decision, who, v)};
  return v;
}

void add_error(AuditReport& report, std::string source, std::string message) {
  report.items.push_back({std::nullopt, AuditError{std::move(source), std::move(message)}});
}

void summarize(AuditReport& report) {
  AuditSummary s;
  std::vector<const AuditVerdict*> verdicts;
  for (const auto& item : report.items) {
    if (item.verdict) {
      verdicts.push_back(&*item.verdict);
    } else {
      ++s.errors;
    }
  }
  s.total = verdicts.size();
  for (const auto* v : verdicts) {
    if (v->decision == Decision::kReplication) ++s.replications;
  }
  s.replication_rate =
      s.total == 0 ? 0.0 : static_cast<double>(s.replications) / static_cast<double>(s.total);
  if (!verdicts.empty()) {
    s.histogram.assign(kHistogramBins, 0);
    s.histogram_min = INFINITY;
    s.histogram_max = -INFINITY;
    for (const auto* v : verdicts) {
      s.histogram_min = std::min(s.histogram_min, *v->nearest.fine_distance);
      s.histogram_max = std::max(s.histogram_max, *v->nearest.fine_distance);
    }
    const double span = s.histogram_max - s.histogram_min;
    for (const auto* v : verdicts) {
      std::size_t bin = 0;
      if (span > 0.0) {
        const double t = (*v->nearest.fine_distance - s.histogram_min) / span;
        bin = std::min(kHistogramBins - 1, static_cast<std::size_t>(t * kHistogramBins));
      }
      ++s.histogram[bin];
    }
    std::vector<const AuditVerdict*> order = verdicts;
    std::stable_sort(order.begin(), order.end(), [](const AuditVerdict* a, const AuditVerdict* b) {
      return *a->nearest.fine_distance < *b->nearest.fine_distance;
    });
    for (std::size_t i = 0; i < order.size() && i < kClosestPairs; ++i) {
      s.closest.push_back({order[i]->source, order[i]->sample_ref, order[i]->nearest.entry_id,
                           *order[i]->nearest.fine_distance});
    }
  }
  report.summary = std::move(s);
}

AuditReport audit_batch(std::span<const AuditRequest> requests, const AuditContext& ctx) {
  AuditReport report;
  report.items.resize(requests.size());
  parallel_for(requests.size(), [&](std::size_t i) {
    try {
      report.items[i].verdict = audit_sample(requests[i], ctx);
    } catch (const std::exception& ex) {
      report.items[i].error = AuditError{requests[i].source, ex.what()};
    }
  });
  summarize(report);
  return report;
}

ReportFormat parse_report_format(const std::string& text) {
  if (text == "text") return ReportFormat::kText;
  if (text == "json") return ReportFormat::kJson;
  throw ConfigError("unknown report format '" + text + "' (expected text or json)");
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json optional_string(const std::optional<std::string>& s) {
  return s ? ordered_json(*s) : ordered_json(nullptr);
}

ordered_json verdict_json(const AuditVerdict& v) {
  ordered_json j;
  j["sample_ref"] = v.sample_ref;
  j["source"] = v.source;
  j["model_id"] = v.model_id;
  j["user_id"] = optional_string(v.user_id);
  j["labor_note"] = optional_string(v.labor_note);
  j["nearest"] = {{"entry_id", v.nearest.entry_id},
                  {"path", v.nearest_path},
                  {"coarse_distance", v.nearest.coarse_distance},
                  {"fine_distance", v.nearest.fine_distance.value_or(0.0)}};
  j["threshold"] = {{"value", v.threshold.value},
                    {"policy", v.threshold.policy.to_string()},
                    {"achieved_tpr", v.threshold.achieved_tpr},
                    {"achieved_fpr", v.threshold.achieved_fpr}};
  j["decision"] = to_string(v.decision);
  j["margin"] = v.margin;
  j["attribution"] = {{"candidate", to_string(v.attribution.candidate)},
                      {"rationale", v.attribution.rationale}};
  j["ties"] = v.ties;
  return j;
}

std::string render_json(const AuditReport& report) {
  ordered_json doc;
  doc["schema"] = "provaudit.report";
  doc["schema_version"] = AuditReport::kSchemaVersion;
  doc["verdicts"] = ordered_json::array();
  doc["errors"] = ordered_json::array();
  for (const auto& item : report.items) {
    if (item.verdict) {
      doc["verdicts"].push_back(verdict_json(*item.verdict));
    } else if (item.error) {
      doc["errors"].push_back({{"source", item.error->source}, {"message", item.error->message}});
    }
  }
  const AuditSummary& s = report.summary;
  ordered_json summary;
  summary["total"] = s.total;
  summary["errors"] = s.errors;
  summary["replications"] = s.replications;
  summary["replication_rate"] = s.replication_rate;
  summary["histogram"] = {{"min", s.histogram_min},
                          {"max", s.histogram_max},
                          {"bins", s.histogram.size()},
                          {"counts", s.histogram}};
  summary["closest"] = ordered_json::array();
  for (const auto& c : s.closest) {
    summary["closest"].push_back({{"source", c.source},
                                  {"sample_ref", c.sample_ref},
                                  {"entry_id", c.entry_id},
                                  {"fine_distance", c.fine_distance}});
  }
  doc["summary"] = std::move(summary);
  return doc.dump(2) + "\n";
}

std::string render_text(const AuditReport& report) {
  std::string out = "provaudit report (schema v" + std::to_string(AuditReport::kSchemaVersion) + ")\n";
  char line[512];
  for (const auto& item : report.items) {
    if (item.verdict) {
      const AuditVerdict& v = *item.verdict;
      std::snprintf(line, sizeof(line),
                    "%-11s %-32s nearest=%llu (%s) distance=%.6g threshold=%.6g margin=%+.6g "
                    "attribution=%s\n",
                    to_string(v.decision).c_str(), v.source.c_str(),
                    static_cast<unsigned long long>(v.nearest.entry_id), v.nearest_path.c_str(),
                    v.nearest.fine_distance.value_or(0.0), v.threshold.value, v.margin,
                    to_string(v.attribution.candidate).c_str());
      out += line;
      if (!v.ties.empty()) {
        out += "            ties within 1e-9:";
        for (auto id : v.ties) out += " " + std::to_string(id);
        out += "\n";
      }
      if (v.labor_note) out += "            labor note: " + *v.labor_note + "\n";
    } else if (item.error) {
      out += "error       " + item.error->source + ": " + item.error->message + "\n";
    }
  }
  const AuditSummary& s = report.summary;
  std::snprintf(line, sizeof(line),
                "\nsummary\n  total: %zu\n  errors: %zu\n  replications: %zu\n"
                "  replication_rate: %.4f\n",
                s.total, s.errors, s.replications, s.replication_rate);
  out += line;
  if (!s.histogram.empty()) {
    std::snprintf(line, sizeof(line), "  distance histogram [%.6g, %.6g], %zu bins:\n   ",
                  s.histogram_min, s.histogram_max, s.histogram.size());
    out += line;
    for (auto c : s.histogram) out += " " + std::to_string(c);
    out += "\n  closest pairs:\n";
    for (const auto& c : s.closest) {
      std::snprintf(line, sizeof(line), "    %-32s entry=%llu distance=%.6g\n", c.source.c_str(),
                    static_cast<unsigned long long>(c.entry_id), c.fine_distance);
      out += line;
    }
  }
  return out;
}

}  // namespace

std::string render_report(const AuditReport& report, ReportFormat format) {
  return format == ReportFormat::kJson ? render_json(report) : render_text(report);
}

}  // namespace provaudit
