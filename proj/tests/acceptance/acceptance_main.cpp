// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Each line reports the measured values, the bound they are
// held to and the wall time against the runtime limit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "provaudit/digest.hpp"
#include "provaudit/error.hpp"
#include "provaudit/parallel.hpp"
#include "provaudit/workspace.hpp"
#include "scenes.hpp"

using namespace provaudit;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

void criterion(const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& ex) {
    o = {false, std::string("exception: ") + ex.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < limit_s;
  const bool pass = o.ok && in_time;
  if (!pass) ++failures;
  std::printf("%s %-22s %s [%.2f s, limit %.0f s%s]\n", pass ? "PASS" : "FAIL", name,
              o.detail.c_str(), secs, limit_s, in_time ? "" : ", over time");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// --- metric axioms --------------------------------------------------------

Outcome metric_axioms() {
  const FilterBank bank = build_filter_bank(kDefaultFilterSeed);
  const CalibrationWeights w = CalibrationWeights::ones(bank);
  constexpr std::size_t kPairs = 200;
  std::vector<int> bad(kPairs, 0);
  parallel_for(kPairs, [&](std::size_t i) {
    // Half natural scenes, half uniform noise, some mixed.
    const ImageTensor a = i % 2 ? scenes::noise_image(10000 + i) : scenes::natural_scene(10000 + i);
    const ImageTensor b = i % 3 ? scenes::natural_scene(20000 + i) : scenes::noise_image(20000 + i);
    const FeatureStack fa = extract_features(a, bank), fb = extract_features(b, bank);
    const double ab = lpips_distance(fa, fb, w), ba = lpips_distance(fb, fa, w);
    const double mab = mse_distance(a, b), mba = mse_distance(b, a);
    bad[i] = !(ab >= 0.0) || ab != ba || !(mab >= 0.0) || mab != mba ||
             lpips_distance(fa, fa, w) != 0.0 || mse_distance(a, a) != 0.0;
  });
  const int violations = static_cast<int>(std::count(bad.begin(), bad.end(), 1));
  return {violations == 0, fmt("%d/%zu pairs violate nonnegativity, symmetry or d(x,x)=0 (need 0)",
                               violations, kPairs)};
}

// --- blur vs shift --------------------------------------------------------

Outcome blur_vs_shift() {
  const FilterBank bank = build_filter_bank(kDefaultFilterSeed);
  const CalibrationWeights w = CalibrationWeights::ones(bank);
  constexpr std::size_t kImages = 40;
  std::vector<int> lpips_shift_closer(kImages), mse_blur_closer(kImages);
  parallel_for(kImages, [&](std::size_t i) {
    const ImageTensor x = scenes::natural_scene(30000 + i);
    const ImageTensor shifted = shift_image(x, 1, 0);
    const ImageTensor blurred = blur_image(x, 2);
    const FeatureStack fx = extract_features(x, bank);
    lpips_shift_closer[i] = lpips_distance(fx, extract_features(shifted, bank), w) <
                            lpips_distance(fx, extract_features(blurred, bank), w);
    mse_blur_closer[i] = mse_distance(x, blurred) < mse_distance(x, shifted);
  });
  const double lp = std::count(lpips_shift_closer.begin(), lpips_shift_closer.end(), 1) /
                    static_cast<double>(kImages);
  const double ms = std::count(mse_blur_closer.begin(), mse_blur_closer.end(), 1) /
                    static_cast<double>(kImages);
  return {lp >= 0.8 && ms >= 0.8,
          fmt("%zu scenes: lpips ranks shift closer %.0f%% (need >=80%%), mse ranks blur closer "
              "%.0f%% (need >=80%%)",
              kImages, 100 * lp, 100 * ms)};
}

// --- exact search ---------------------------------------------------------

Outcome exact_search() {
  constexpr int kCorpora = 100;
  std::vector<int> mismatches(kCorpora, 0);
  parallel_for(kCorpora, [&](std::size_t c) {
    std::mt19937_64 gen(40000 + c);
    // Sizes spread log-uniformly from 10 to 10^4; every other corpus on a
    // coarse grid so exact distance ties are common.
    const auto n = static_cast<std::size_t>(std::lround(std::pow(10.0, 1.0 + 3.0 * c / (kCorpora - 1))));
    const std::size_t dim = 2 + gen() % 63;
    const bool grid = c % 2 == 0;
    auto draw = [&] { return grid ? static_cast<float>(gen() % 3) : static_cast<float>(scenes::unit(gen)); };
    EmbeddingSet set(dim);
    std::vector<float> v(dim);
    std::uint64_t id = gen() % 10;
    for (std::size_t i = 0; i < n; ++i) {
      for (float& x : v) x = draw();
      set.add(id, v);
      id += 1 + gen() % 4;
    }
    for (int q = 0; q < 5; ++q) {
      std::vector<float> query(dim);
      for (float& x : query) x = draw();
      const std::size_t k = 1 + gen() % 50;
      std::vector<std::pair<double, std::uint64_t>> all(n);
      for (std::size_t i = 0; i < n; ++i) {
        double ss = 0.0;
        const auto row = set.row(i);
        for (std::size_t j = 0; j < dim; ++j) {
          const double d = static_cast<double>(query[j]) - row[j];
          ss += d * d;
        }
        all[i] = {std::sqrt(ss), set.id(i)};
      }
      std::sort(all.begin(), all.end());
      const auto got = exact_knn(query, set, k);
      const std::size_t want = std::min(k, n);
      if (got.size() != want) {
        ++mismatches[c];
        continue;
      }
      for (std::size_t i = 0; i < want; ++i) {
        if (got[i].entry_id != all[i].second) {
          ++mismatches[c];
          break;
        }
      }
    }
  });
  int total = 0;
  for (int m : mismatches) total += m;
  return {total == 0, fmt("%d corpora (10..10000 entries, 5 queries each): %d mismatches vs full sort "
                          "(need 0)",
                          kCorpora, total)};
}

// --- ANN quality ----------------------------------------------------------

Outcome ann_quality() {
  constexpr std::size_t kCorpus = 5000, kQueries = 100, kEf = 64;
  const FilterBank bank = build_filter_bank(kDefaultFilterSeed);
  std::vector<std::vector<float>> emb(kCorpus + kQueries);
  parallel_for(emb.size(), [&](std::size_t i) {
    emb[i] = pool_features(extract_features(scenes::natural_scene(50000 + i), bank)).vector;
  });
  auto set = std::make_shared<EmbeddingSet>(emb[0].size());
  for (std::size_t i = 0; i < kCorpus; ++i) set->add(i, emb[i]);
  const AnnIndex index = AnnIndex::build(set, AnnParams{});

  double r1 = 0, r10 = 0, visited = 0;
  for (std::size_t q = 0; q < kQueries; ++q) {
    const auto& query = emb[kCorpus + q];
    const auto truth = exact_knn(query, *set, 10);
    const AnnResult got = ann_knn(index, query, 10, kEf);
    r1 += got.neighbors[0].entry_id == truth[0].entry_id;
    std::size_t hit = 0;
    for (const auto& t : truth)
      for (const auto& g : got.neighbors) hit += g.entry_id == t.entry_id;
    r10 += hit / 10.0;
    visited += static_cast<double>(got.visited);
  }
  r1 /= kQueries;
  r10 /= kQueries;
  const double frac = visited / kQueries / kCorpus;
  return {r1 >= 0.95 && r10 >= 0.90 && frac < 0.20,
          fmt("5000 scene embeddings, 100 held-out queries, ef_search=64: recall@1 %.3f (>=0.95), "
              "recall@10 %.3f (>=0.90), visited %.1f%% (<20%%)",
              r1, r10, 100 * frac)};
}

// --- ROC oracle -----------------------------------------------------------

Outcome roc_oracle() {
  constexpr int kInstances = 200;
  std::vector<int> bad(kInstances, 0);
  parallel_for(kInstances, [&](std::size_t t) {
    std::mt19937_64 gen(60000 + t);
    const std::size_t n = 2 + gen() % 999;
    const bool coarse = t % 2 == 0;
    std::vector<LabeledPair> pairs(n);
    for (auto& p : pairs) {
      p.label = gen() % 2 ? PairLabel::kSimilar : PairLabel::kDissimilar;
      p.distance = coarse ? static_cast<double>(gen() % 10) : scenes::unit(gen);
    }
    pairs[0].label = PairLabel::kSimilar;
    pairs[1].label = PairLabel::kDissimilar;

    std::vector<double> ts;
    std::uint64_t pos = 0, neg = 0;
    for (const auto& p : pairs) {
      ts.push_back(p.distance);
      (p.label == PairLabel::kSimilar ? pos : neg) += 1;
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

    const RocCurve c = compute_roc(pairs);
    if (c.points.size() != ts.size() + 2 || c.points.front().threshold != -INFINITY ||
        c.points.back().threshold != INFINITY) {
      bad[t] = 1;
      return;
    }
    // Quadratic sweep: every distinct distance, counted from scratch.
    for (std::size_t i = 0; i < ts.size(); ++i) {
      std::uint64_t tp = 0, fp = 0;
      for (const auto& p : pairs) {
        if (p.distance <= ts[i]) (p.label == PairLabel::kSimilar ? tp : fp) += 1;
      }
      const RocPoint& got = c.points[i + 1];
      if (got.threshold != ts[i] || got.tpr != static_cast<double>(tp) / pos ||
          got.fpr != static_cast<double>(fp) / neg) {
        bad[t] = 1;
        return;
      }
    }
    // AUC as twice the Mann-Whitney count over all (similar, dissimilar) pairs.
    std::uint64_t twice = 0;
    for (const auto& a : pairs) {
      if (a.label != PairLabel::kSimilar) continue;
      for (const auto& b : pairs) {
        if (b.label != PairLabel::kDissimilar) continue;
        twice += a.distance < b.distance ? 2 : a.distance == b.distance ? 1 : 0;
      }
    }
    if (c.auc != static_cast<double>(twice) / (2.0 * pos * neg)) bad[t] = 1;
  });
  const int mismatched = static_cast<int>(std::count(bad.begin(), bad.end(), 1));

  int separable_bad = 0;
  for (int s = 0; s < 20; ++s) {
    std::mt19937_64 gen(70000 + s);
    std::vector<LabeledPair> pairs;
    const double gap = 0.5 + scenes::unit(gen);
    for (std::size_t i = 0, n = 2 + gen() % 500; i < n; ++i) {
      const bool sim = i % 2 == 0;
      pairs.push_back({sim ? scenes::unit(gen) : 1.0 + gap + scenes::unit(gen),
                       sim ? PairLabel::kSimilar : PairLabel::kDissimilar});
    }
    separable_bad += compute_roc(pairs).auc != 1.0;
  }
  return {mismatched == 0 && separable_bad == 0,
          fmt("%d random instances (n<=1000): %d differ from the O(n^2) sweep; 20 separable sets: "
              "%d with AUC != 1.0 (need 0 and 0)",
              kInstances, mismatched, separable_bad)};
}

// --- end-to-end fixture ---------------------------------------------------

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / fmt("provaudit-acceptance-%08x%08x", rd(), rd());
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void put_image(const fs::path& p, const ImageTensor& img) {
  fs::create_directories(p.parent_path());
  write_file_atomic(p, encode_ppm(img));
}

std::string slurp(const fs::path& p) {
  const auto b = read_file(p);
  return std::string(b.begin(), b.end());
}

constexpr int kCorpus = 200;
constexpr int kCopies = 20, kShifts = 20, kUnrelated = 60;

// Inputs on disk: corpus, samples (copies, shifts, unrelated) and labeled
// calibration pairs.
struct E2eInputs {
  TempDir tmp;
  fs::path corpus = tmp.path / "corpus";
  fs::path samples = tmp.path / "samples";
  fs::path pairs_csv = tmp.path / "pairs" / "pairs.csv";

  E2eInputs() {
    std::vector<ImageTensor> train(kCorpus);
    parallel_for(kCorpus, [&](std::size_t i) { train[i] = scenes::natural_scene(80000 + i); });
    for (int i = 0; i < kCorpus; ++i) put_image(corpus / fmt("train_%03d.ppm", i), train[i]);

    // Audit batch. Copies are byte-identical files; shifts move a decoded
    // training image by one pixel in one of four directions.
    for (int i = 0; i < kCopies; ++i) {
      fs::create_directories(samples);
      fs::copy_file(corpus / fmt("train_%03d.ppm", i), samples / fmt("copy_%02d.ppm", i));
    }
    const int dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (int i = 0; i < kShifts; ++i) {
      const int src = 20 + i;
      const ImageTensor decoded = decode_image(read_file(corpus / fmt("train_%03d.ppm", src)));
      put_image(samples / fmt("shift_%02d.ppm", i), shift_image(decoded, dirs[i % 4][0], dirs[i % 4][1]));
    }
    std::vector<ImageTensor> unrelated(kUnrelated);
    parallel_for(kUnrelated, [&](std::size_t i) { unrelated[i] = scenes::natural_scene(90000 + i); });
    for (int i = 0; i < kUnrelated; ++i) put_image(samples / fmt("unrelated_%02d.ppm", i), unrelated[i]);

    // 50 similar pairs (25 one-pixel shifts, 25 small-noise copies) and 50
    // dissimilar pairs, all drawn from corpus entries outside the audit batch.
    std::string csv = "id_a,id_b,label\n";
    const fs::path pdir = pairs_csv.parent_path();
    for (int i = 0; i < 50; ++i) {
      const int id = 100 + i;
      const ImageTensor decoded = decode_image(read_file(corpus / fmt("train_%03d.ppm", id)));
      const ImageTensor variant = i < 25 ? shift_image(decoded, dirs[i % 4][0], dirs[i % 4][1])
                                         : scenes::add_noise(decoded, 0.03, id);
      const std::string name = fmt("similar_%02d.ppm", i);
      put_image(pdir / name, variant);
      csv += std::to_string(id) + "," + name + ",similar\n";
    }
    for (int i = 0; i < 50; ++i) {
      csv += std::to_string(100 + i) + "," + std::to_string(150 + (i * 7 + 3) % 50) + ",dissimilar\n";
    }
    write_file_atomic(pairs_csv, csv);
  }
};

struct E2eRun {
  Workspace ws;
  AuditReport report;
  std::string report_json;
};

E2eRun run_pipeline(const E2eInputs& in, const fs::path& ws_dir) {
  fs::create_directories(ws_dir);
  E2eRun run{Workspace(ws_dir), {}, {}};
  CliConfig config;
  std::ostringstream log;
  cmd_ingest(in.corpus, run.ws, config, log);
  config = run.ws.load_config();
  cmd_build_index(run.ws, config, log);
  cmd_calibrate(in.pairs_csv, run.ws, config, false, log);
  run.report = cmd_audit(in.samples, run.ws, config, AuditOptions{"acceptance-model", {}, {}});
  run.report_json = render_report(run.report, ReportFormat::kJson);
  return run;
}

std::map<std::string, Decision> decisions(const AuditReport& r) {
  std::map<std::string, Decision> out;
  for (const auto& item : r.items) {
    if (item.verdict) out[item.verdict->source] = item.verdict->decision;
  }
  return out;
}

Outcome end_to_end(const E2eInputs& in) {
  const E2eRun run = run_pipeline(in, in.tmp.path / "ws_a");
  int copies = 0, shifts = 0, novel = 0, errors = 0;
  for (const auto& item : run.report.items) {
    if (!item.verdict) {
      ++errors;
      continue;
    }
    const std::string& s = item.verdict->source;
    const bool rep = item.verdict->decision == Decision::kReplication;
    if (s.rfind("copy_", 0) == 0) copies += rep;
    if (s.rfind("shift_", 0) == 0) shifts += rep;
    if (s.rfind("unrelated_", 0) == 0) novel += !rep;
  }
  const DecisionThreshold t = run.ws.load_threshold();
  return {copies == kCopies && shifts >= 18 && novel >= 57 && errors == 0,
          fmt("threshold %.4g (youden, TPR %.2f, FPR %.2f): copies %d/20 (need 20), shifts %d/20 "
              "(need >=18), unrelated novel %d/60 (need >=57), errors %d",
              t.value, t.achieved_tpr, t.achieved_fpr, copies, shifts, novel, errors)};
}

Outcome determinism(const E2eInputs& in) {
  const E2eRun a = run_pipeline(in, in.tmp.path / "det_a");
  const E2eRun b = run_pipeline(in, in.tmp.path / "det_b");
  std::vector<std::string> differing;
  for (const char* name : {"config.json", "manifest.json", "features.paf", "index.pai",
                           "threshold.json", "roc.csv", "pr.csv"}) {
    if (slurp(a.ws.dir() / name) != slurp(b.ws.dir() / name)) differing.push_back(name);
  }
  if (a.report_json != b.report_json) differing.push_back("report");
  std::string list;
  for (const auto& d : differing) list += " " + d;
  return {differing.empty(), fmt("7 workspace artifacts + report compared byte-for-byte: %zu differ%s",
                                 differing.size(), list.c_str())};
}

Outcome monotonicity(const E2eInputs& in) {
  const E2eRun base = run_pipeline(in, in.tmp.path / "mono");
  const DecisionThreshold calibrated = base.ws.load_threshold();
  const CliConfig config = base.ws.load_config();
  std::map<std::string, Decision> previous;
  int flips = 0;
  std::size_t replications_first = 0, replications_last = 0;
  for (int step = 0; step < 10; ++step) {
    DecisionThreshold t = calibrated;
    t.value = calibrated.value * (0.25 + 0.25 * step);
    t.policy = ThresholdPolicy::fixed(t.value);
    write_file_atomic(base.ws.threshold_path(), threshold_to_json(t, 0.0));
    const AuditReport r = cmd_audit(in.samples, base.ws, config, AuditOptions{});
    const auto now = decisions(r);
    for (const auto& [source, d] : previous) {
      flips += d == Decision::kReplication && now.at(source) == Decision::kNovel;
    }
    if (step == 0) replications_first = r.summary.replications;
    replications_last = r.summary.replications;
    previous = now;
  }
  return {flips == 0,
          fmt("10 thresholds from 0.25x to 2.5x calibrated: %d replication->novel flips (need 0); "
              "replications %zu -> %zu",
              flips, replications_first, replications_last)};
}

}  // namespace

int main() {
  std::printf("provaudit acceptance suite\n");
  criterion("metric-axioms", 10, metric_axioms);
  criterion("blur-vs-shift", 30, blur_vs_shift);
  criterion("exact-search-oracle", 60, exact_search);
  criterion("ann-quality", 120, ann_quality);
  criterion("roc-oracle", 30, roc_oracle);

  std::unique_ptr<E2eInputs> inputs;
  criterion("end-to-end-audit", 300, [&] {
    inputs = std::make_unique<E2eInputs>();
    return end_to_end(*inputs);
  });
  criterion("determinism", 300, [&] {
    if (!inputs) inputs = std::make_unique<E2eInputs>();
    return determinism(*inputs);
  });
  criterion("threshold-monotonicity", 300, [&] {
    if (!inputs) inputs = std::make_unique<E2eInputs>();
    return monotonicity(*inputs);
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
