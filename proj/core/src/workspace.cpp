#include "provaudit/workspace.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>
#include <unordered_map>
#include <variant>

#include "provaudit/digest.hpp"
#include "provaudit/error.hpp"
#include "provaudit/parallel.hpp"

namespace provaudit {

using ordered_json = nlohmann::ordered_json;

namespace {

void reject_unknown_keys(const ordered_json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : obj.items()) {
    const bool ok = std::any_of(known.begin(), known.end(),
                                [&](const char* k) { return item.key() == k; });
    if (!ok) throw ConfigError("unknown config key '" + where + item.key() + "'");
  }
}

void check_range(const char* name, std::uint64_t v, std::uint64_t lo, std::uint64_t hi) {
  if (v < lo || v > hi) {
    throw ConfigError(std::string(name) + " must lie in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "], got " + std::to_string(v));
  }
}

void check_embedder(const FeatureFile& features, const CliConfig& config) {
  const std::string want = embedder_id(config);
  if (features.embedder_id() != want) {
    throw ConfigError("workspace features were produced by '" + features.embedder_id() +
                      "' but the configuration asks for '" + want +
                      "'; re-run `provaudit ingest` or drop the --size/--seed override");
  }
}

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && issp(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && issp(s[i])) ++i;
  return s.substr(i);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Uniform double in [0, 1).
double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace

void CliConfig::validate() const {
  CanonicalSize{canonical_size};
  check_range("ann.max_degree", ann.max_degree, 2, 256);
  check_range("ann.ef_construction", ann.ef_construction, 1, 4096);
  check_range("ann.ef_search", ann.ef_search, 1, 4096);
  check_range("k", k, 1, 4096);
  check_range("rerank", rerank, 1, 4096);
  ThresholdPolicy::parse(threshold_policy);
}

std::string CliConfig::to_json() const {
  ordered_json doc;
  doc["canonical_size"] = canonical_size;
  doc["filter_seed"] = filter_seed;
  doc["ann"] = {{"max_degree", ann.max_degree},
                {"ef_construction", ann.ef_construction},
                {"ef_search", ann.ef_search},
                {"seed", ann.seed}};
  doc["k"] = k;
  doc["rerank"] = rerank;
  doc["threshold_policy"] = threshold_policy;
  doc["attribution"] = {{"on_replication", to_string(attribution.on_replication)},
                        {"on_novel", to_string(attribution.on_novel)}};
  doc["corpus_dir"] = corpus_dir;
  return doc.dump(2) + "\n";
}

CliConfig CliConfig::from_json(const std::string& text) {
  CliConfig c;
  try {
    const auto doc = ordered_json::parse(text);
    reject_unknown_keys(doc,
                        {"canonical_size", "filter_seed", "ann", "k", "rerank",
                         "threshold_policy", "attribution", "corpus_dir"},
                        "");
    if (doc.contains("canonical_size")) c.canonical_size = doc["canonical_size"].get<int>();
    if (doc.contains("filter_seed")) c.filter_seed = doc["filter_seed"].get<std::uint64_t>();
    if (doc.contains("ann")) {
      const auto& a = doc["ann"];
      reject_unknown_keys(a, {"max_degree", "ef_construction", "ef_search", "seed"}, "ann.");
      if (a.contains("max_degree")) c.ann.max_degree = a["max_degree"].get<std::uint32_t>();
      if (a.contains("ef_construction")) {
        c.ann.ef_construction = a["ef_construction"].get<std::uint32_t>();
      }
      if (a.contains("ef_search")) c.ann.ef_search = a["ef_search"].get<std::uint32_t>();
      if (a.contains("seed")) c.ann.seed = a["seed"].get<std::uint64_t>();
    }
    if (doc.contains("k")) c.k = doc["k"].get<std::uint32_t>();
    if (doc.contains("rerank")) c.rerank = doc["rerank"].get<std::uint32_t>();
    if (doc.contains("threshold_policy")) {
      c.threshold_policy = doc["threshold_policy"].get<std::string>();
    }
    if (doc.contains("attribution")) {
      const auto& a = doc["attribution"];
      reject_unknown_keys(a, {"on_replication", "on_novel"}, "attribution.");
      if (a.contains("on_replication")) {
        c.attribution.on_replication = parse_attribution(a["on_replication"].get<std::string>());
      }
      if (a.contains("on_novel")) {
        c.attribution.on_novel = parse_attribution(a["on_novel"].get<std::string>());
      }
    }
    if (doc.contains("corpus_dir")) c.corpus_dir = doc["corpus_dir"].get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("invalid config JSON: ") + ex.what());
  }
  c.validate();
  return c;
}

AnnParams CliConfig::ann_params() const {
  return AnnParams{ann.max_degree, ann.ef_construction, ann.seed};
}

std::string embedder_id(const CliConfig& config) {
  const FilterBank bank = build_filter_bank(config.filter_seed);
  std::string channels;
  for (const auto& level : bank.levels) {
    if (!channels.empty()) channels += ",";
    channels += std::to_string(level.out_channels);
  }
  return "provaudit-randconv/seed=" + std::to_string(config.filter_seed) +
         "/size=" + std::to_string(config.canonical_size) + "/channels=" + channels;
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot replace " + path.string() + ": " + ec.message());
  }
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

namespace {

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void require(const fs::path& path, const char* what, const char* command) {
  if (!fs::exists(path)) {
    throw ConfigError("missing " + std::string(what) + " " + path.string() + "; run `provaudit " +
                      command + "` first");
  }
}

}  // namespace

CliConfig Workspace::load_config() const {
  if (!fs::exists(config_path())) return CliConfig{};
  return CliConfig::from_json(read_text(config_path()));
}

void Workspace::save_config(const CliConfig& config) const {
  config.validate();
  write_file_atomic(config_path(), config.to_json());
}

CorpusManifest Workspace::load_manifest() const {
  require(manifest_path(), "corpus manifest", "ingest");
  return CorpusManifest::from_json(read_text(manifest_path()));
}

FeatureFile Workspace::load_features() const {
  require(features_path(), "feature file", "ingest");
  return FeatureFile::load(features_path());
}

AnnIndex Workspace::load_index(std::shared_ptr<const EmbeddingSet> set) const {
  require(index_path(), "index", "build-index");
  return AnnIndex::parse(read_file(index_path()), std::move(set));
}

DecisionThreshold Workspace::load_threshold() const {
  require(threshold_path(), "decision threshold", "calibrate");
  return threshold_from_json(read_text(threshold_path()));
}

std::optional<CalibrationWeights> Workspace::load_weights() const {
  if (!fs::exists(weights_path())) return std::nullopt;
  return weights_from_json(read_text(weights_path()));
}

std::string threshold_to_json(const DecisionThreshold& t, double auc) {
  ordered_json doc;
  doc["policy"] = t.policy.to_string();
  doc["value"] = t.value;
  doc["achieved_tpr"] = t.achieved_tpr;
  doc["achieved_fpr"] = t.achieved_fpr;
  doc["auc"] = auc;
  return doc.dump(2) + "\n";
}

DecisionThreshold threshold_from_json(const std::string& text) {
  try {
    const auto doc = ordered_json::parse(text);
    DecisionThreshold t;
    t.policy = ThresholdPolicy::parse(doc.at("policy").get<std::string>());
    t.value = doc.at("value").get<double>();
    t.achieved_tpr = doc.at("achieved_tpr").get<double>();
    t.achieved_fpr = doc.at("achieved_fpr").get<double>();
    return t;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("invalid threshold JSON: ") + ex.what());
  }
}

std::string weights_to_json(const CalibrationWeights& w) {
  ordered_json doc;
  doc["levels"] = w.per_level;
  return doc.dump(2) + "\n";
}

CalibrationWeights weights_from_json(const std::string& text) {
  try {
    const auto doc = ordered_json::parse(text);
    CalibrationWeights w;
    w.per_level = doc.at("levels").get<std::vector<std::vector<float>>>();
    return w;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("invalid weights JSON: ") + ex.what());
  }
}

ImageTensor load_canonical_image(const fs::path& path, CanonicalSize size) {
  const auto bytes = read_file(path);
  return preprocess(decode_image(bytes), size);
}

std::vector<fs::path> list_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator();
       ++it) {
    const std::string name = it->path().filename().string();
    if (!name.empty() && name[0] == '.') {
      if (it->is_directory()) it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file()) out.push_back(fs::relative(it->path(), dir));
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    return a.generic_string() < b.generic_string();
  });
  return out;
}

CorpusManifest cmd_ingest(const fs::path& corpus_dir, const Workspace& ws,
                          const CliConfig& config, std::ostream& log) {
  config.validate();
  const CanonicalSize size{config.canonical_size};
  const FilterBank bank = build_filter_bank(config.filter_seed);
  const std::vector<fs::path> files = list_files(corpus_dir);

  struct Loaded {
    std::string sha256;
    std::optional<FeatureRecord> record;
    std::string error;
  };
  std::vector<Loaded> loaded(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    try {
      const auto bytes = read_file(corpus_dir / files[i]);
      loaded[i].sha256 = sha256(bytes).hex();
      FeatureRecord rec;
      rec.stack = extract_features(preprocess(decode_image(bytes), size), bank);
      rec.pooled = pool_features(rec.stack);
      loaded[i].record = std::move(rec);
    } catch (const std::exception& ex) {
      loaded[i].error = ex.what();
    }
  });

  CorpusManifest manifest;
  std::vector<FeatureRecord> records;
  std::unordered_map<std::string, std::size_t> by_hash;
  std::size_t skipped = 0;
  std::size_t aliased = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string rel = files[i].generic_string();
    if (!loaded[i].record) {
      log << "warning: skipping " << rel << ": " << loaded[i].error << "\n";
      ++skipped;
      continue;
    }
    if (auto it = by_hash.find(loaded[i].sha256); it != by_hash.end()) {
      manifest.entries[it->second].aliases.push_back(rel);
      ++aliased;
      continue;
    }
    const std::uint64_t id = manifest.entries.size();
    by_hash.emplace(loaded[i].sha256, manifest.entries.size());
    manifest.entries.push_back({id, rel, loaded[i].sha256, 0, {}});
    loaded[i].record->entry_id = id;
    records.push_back(std::move(*loaded[i].record));
  }
  if (records.empty()) {
    throw ConfigError("no decodable images in " + corpus_dir.string());
  }

  FeatureFile features(embedder_id(config), level_shapes(records.front().stack));
  for (auto& r : records) features.add(std::move(r));
  std::vector<std::uint64_t> offsets;
  const auto bytes = features.serialize(&offsets);
  Sha256 h;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    manifest.entries[i].offset = offsets[i];
    h.update(manifest.entries[i].sha256 + "\n");
  }
  manifest.corpus_id = "corpus-" + h.finish().hex().substr(0, 16);
  manifest.validate();

  CliConfig saved = config;
  saved.corpus_dir = corpus_dir.string();
  fs::create_directories(ws.dir());
  write_file_atomic(ws.features_path(), bytes);
  write_file_atomic(ws.manifest_path(), manifest.to_json());
  ws.save_config(saved);
  log << "ingested " << manifest.entries.size() << " images from " << corpus_dir.string() << " ("
      << aliased << " duplicates aliased, " << skipped << " skipped)\n";
  return manifest;
}

IndexStats cmd_build_index(const Workspace& ws, const CliConfig& config, std::ostream& log) {
  config.validate();
  const CorpusManifest manifest = ws.load_manifest();
  const FeatureFile features = ws.load_features();
  check_embedder(features, config);
  auto set = std::make_shared<const EmbeddingSet>(features.embeddings());
  const auto start = std::chrono::steady_clock::now();
  const AnnIndex index = AnnIndex::build(set, config.ann_params(), corpus_fingerprint(manifest));
  IndexStats stats;
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  stats.nodes = index.size();
  stats.edges = index.edge_count();
  write_file_atomic(ws.index_path(), index.serialize());
  char line[160];
  std::snprintf(line, sizeof(line), "index: %zu nodes, %zu edges, built in %.3f s\n",
                stats.nodes, stats.edges, stats.seconds);
  log << line;
  return stats;
}

CalibrationOutcome cmd_calibrate(const fs::path& pairs_csv, const Workspace& ws,
                                 const CliConfig& config, bool fit_weights, std::ostream& log) {
  config.validate();
  const ThresholdPolicy policy = ThresholdPolicy::parse(config.threshold_policy);
  const CorpusManifest manifest = ws.load_manifest();
  const FeatureFile features = ws.load_features();
  check_embedder(features, config);
  const FilterBank bank = build_filter_bank(config.filter_seed);
  const CanonicalSize size{config.canonical_size};

  std::ifstream in(pairs_csv);
  if (!in) throw ConfigError("cannot open pairs CSV " + pairs_csv.string());
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"id_a", "id_b", "label"}) {
    throw ConfigError(pairs_csv.string() + ": expected header 'id_a,id_b,label'");
  }

  struct Row {
    std::size_t line;
    std::string a;
    std::string b;
    PairLabel label;
  };
  std::vector<Row> rows;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = pairs_csv.filename().string() + " line " + std::to_string(lineno);
    if (cells.size() != 3) throw ConfigError(where + ": expected 3 columns");
    PairLabel label;
    if (cells[2] == "similar" || cells[2] == "1") {
      label = PairLabel::kSimilar;
    } else if (cells[2] == "dissimilar" || cells[2] == "0") {
      label = PairLabel::kDissimilar;
    } else {
      throw ConfigError(where + ": label must be similar/dissimilar or 1/0, got '" + cells[2] + "'");
    }
    rows.push_back({lineno, cells[0], cells[1], label});
  }

  // Each token names a manifest id, a manifest path or alias, or an image file.
  std::unordered_map<std::string, std::uint64_t> by_path;
  for (const auto& e : manifest.entries) {
    by_path.emplace(e.path, e.id);
    for (const auto& alias : e.aliases) by_path.emplace(alias, e.id);
  }
  const fs::path base = pairs_csv.parent_path();
  std::map<std::string, const FeatureStack*> resolved;
  std::vector<std::string> external;
  const auto classify = [&](const std::string& token) -> bool {
    if (resolved.count(token)) return true;
    if (!token.empty() && std::all_of(token.begin(), token.end(), ::isdigit)) {
      if (const FeatureRecord* r = features.find(std::stoull(token))) {
        resolved[token] = &r->stack;
        return true;
      }
    }
    if (auto it = by_path.find(token); it != by_path.end()) {
      resolved[token] = &features.find(it->second)->stack;
      return true;
    }
    const fs::path p = fs::path(token).is_relative() ? base / token : fs::path(token);
    if (fs::is_regular_file(p)) {
      resolved[token] = nullptr;
      external.push_back(token);
      return true;
    }
    return false;
  };
  for (const auto& r : rows) {
    for (const std::string* t : {&r.a, &r.b}) {
      if (!classify(*t)) {
        throw ConfigError(pairs_csv.filename().string() + " line " + std::to_string(r.line) +
                          ": cannot resolve '" + *t +
                          "' as a manifest id, manifest path or image file");
      }
    }
  }

  std::vector<FeatureStack> external_stacks(external.size());
  std::vector<std::string> external_errors(external.size());
  parallel_for(external.size(), [&](std::size_t i) {
    const fs::path p =
        fs::path(external[i]).is_relative() ? base / external[i] : fs::path(external[i]);
    try {
      external_stacks[i] = extract_features(load_canonical_image(p, size), bank);
    } catch (const std::exception& ex) {
      external_errors[i] = ex.what();
    }
  });
  for (std::size_t i = 0; i < external.size(); ++i) {
    if (!external_errors[i].empty()) {
      throw ConfigError("cannot load calibration image '" + external[i] +
                        "': " + external_errors[i]);
    }
    resolved[external[i]] = &external_stacks[i];
  }

  CalibrationWeights weights = CalibrationWeights::ones(bank);
  if (fit_weights) {
    std::vector<StackPair> stack_pairs;
    for (const auto& r : rows) stack_pairs.push_back({resolved[r.a], resolved[r.b], r.label});
    weights = fit_calibration_weights(stack_pairs);
  }

  std::vector<LabeledPair> labeled(rows.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    labeled[i] = {lpips_distance(*resolved.at(rows[i].a), *resolved.at(rows[i].b), weights),
                  rows[i].label};
  });

  const RocCurve roc = compute_roc(labeled);
  const auto pr = compute_pr(labeled);
  CalibrationOutcome outcome;
  outcome.threshold = select_threshold(roc, policy);
  outcome.auc = roc.auc;
  outcome.pairs = rows.size();

  write_file_atomic(ws.roc_path(), roc_to_csv(roc));
  write_file_atomic(ws.pr_path(), pr_to_csv(pr));
  if (fit_weights) {
    write_file_atomic(ws.weights_path(), weights_to_json(weights));
  } else {
    fs::remove(ws.weights_path());
  }
  write_file_atomic(ws.threshold_path(), threshold_to_json(outcome.threshold, roc.auc));

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "calibrated on %zu pairs: AUC %.6f, threshold %.6g (%s, TPR %.4f, FPR %.4f)%s\n",
                outcome.pairs, outcome.auc, outcome.threshold.value,
                outcome.threshold.policy.to_string().c_str(), outcome.threshold.achieved_tpr,
                outcome.threshold.achieved_fpr, fit_weights ? ", fitted weights" : "");
  log << buf;
  return outcome;
}

AuditReport cmd_audit(const fs::path& samples_dir, const Workspace& ws, const CliConfig& config,
                      const AuditOptions& options) {
  config.validate();
  const CorpusManifest manifest = ws.load_manifest();
  const FeatureFile features = ws.load_features();
  check_embedder(features, config);
  auto set = std::make_shared<const EmbeddingSet>(features.embeddings());
  const AnnIndex index = ws.load_index(set);
  const DecisionThreshold threshold = ws.load_threshold();
  const FilterBank bank = build_filter_bank(config.filter_seed);
  CalibrationWeights weights = ws.load_weights().value_or(CalibrationWeights::ones(bank));

  const AuditContext ctx{manifest,          features,
                         index,             bank,
                         std::move(weights), threshold,
                         config.attribution, config.k,
                         config.ann.ef_search, config.rerank};
  check_corpus_integrity(ctx);

  const CanonicalSize size{config.canonical_size};
  const std::vector<fs::path> files = list_files(samples_dir);
  std::vector<std::variant<AuditRequest, std::string>> inputs(files.size());
  parallel_for(files.size(), [&](std::size_t i) {
    try {
      const auto bytes = read_file(samples_dir / files[i]);
      AuditRequest req;
      req.sample = preprocess(decode_image(bytes), size);
      req.model_id = options.model_id;
      req.user_id = options.user_id;
      req.labor_note = options.labor_note;
      req.source = files[i].generic_string();
      req.source_sha256 = sha256(bytes).hex();
      inputs[i] = std::move(req);
    } catch (const std::exception& ex) {
      inputs[i] = std::string(ex.what());
    }
  });

  std::vector<AuditRequest> requests;
  for (auto& in : inputs) {
    if (auto* r = std::get_if<AuditRequest>(&in)) requests.push_back(std::move(*r));
  }
  AuditReport batch = audit_batch(requests, ctx);

  // Reassemble in file order with decode failures in place.
  AuditReport report;
  std::size_t next = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (const auto* err = std::get_if<std::string>(&inputs[i])) {
      add_error(report, files[i].generic_string(), *err);
    } else {
      report.items.push_back(std::move(batch.items[next++]));
    }
  }
  summarize(report);
  return report;
}

int audit_exit_code(const AuditReport& report) {
  if (report.summary.replications > 0) return 3;
  if (report.summary.errors > 0) return 1;
  return 0;
}

std::vector<BenchRow> cmd_bench(const Workspace& ws, const CliConfig& config,
                                const BenchOptions& options, std::ostream& out) {
  config.validate();
  const FeatureFile features = ws.load_features();
  auto set = std::make_shared<const EmbeddingSet>(features.embeddings());
  const AnnIndex index = ws.load_index(set);
  const std::size_t n = set->size();
  const std::size_t k10 = std::min<std::size_t>(10, n);

  // Queries are corpus rows with small uniform perturbations.
  std::mt19937_64 gen(options.seed);
  std::vector<std::vector<float>> queries(options.queries);
  for (auto& q : queries) {
    const auto row = set->row(gen() % n);
    q.assign(row.begin(), row.end());
    for (float& v : q) v += static_cast<float>((uniform01(gen) - 0.5) * 0.02);
  }

  using clock = std::chrono::steady_clock;
  std::vector<std::vector<Neighbor>> truth(queries.size());
  auto start = clock::now();
  for (std::size_t i = 0; i < queries.size(); ++i) truth[i] = exact_knn(queries[i], *set, k10);
  const double exact_s = std::chrono::duration<double>(clock::now() - start).count();

  std::vector<BenchRow> rows;
  const auto qps = [&](double s) { return s > 0 ? static_cast<double>(queries.size()) / s : 0.0; };
  rows.push_back({"exact", 0, qps(exact_s), 1.0, 1.0});
  for (std::size_t ef : options.ef_values) {
    const std::size_t eff = std::max(ef, k10);
    std::vector<AnnResult> got(queries.size());
    start = clock::now();
    for (std::size_t i = 0; i < queries.size(); ++i) {
      got[i] = ann_knn(index, queries[i], k10, eff);
    }
    const double s = std::chrono::duration<double>(clock::now() - start).count();
    std::size_t hit1 = 0;
    std::size_t hit10 = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      std::set<std::uint64_t> want;
      for (const auto& nb : truth[i]) want.insert(nb.entry_id);
      if (!got[i].neighbors.empty() && got[i].neighbors[0].entry_id == truth[i][0].entry_id) ++hit1;
      for (const auto& nb : got[i].neighbors) hit10 += want.count(nb.entry_id);
    }
    const double q = static_cast<double>(std::max<std::size_t>(1, queries.size()));
    rows.push_back({"ann", eff, qps(s), hit1 / q, hit10 / (q * static_cast<double>(k10))});
  }

  char line[160];
  std::snprintf(line, sizeof(line), "corpus %zu entries, %zu queries, seed %llu\n", n,
                queries.size(), static_cast<unsigned long long>(options.seed));
  out << line;
  std::snprintf(line, sizeof(line), "%-6s %9s %12s %10s %10s\n", "method", "ef_search", "qps",
                "recall@1", "recall@10");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-6s %9s %12.1f %10.4f %10.4f\n", r.method.c_str(),
                  r.method == "exact" ? "-" : std::to_string(r.ef_search).c_str(),
                  r.queries_per_second, r.recall_at_1, r.recall_at_10);
    out << line;
  }
  return rows;
}

}  // namespace provaudit
