#include "provaudit/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>

#include "provaudit/error.hpp"

namespace provaudit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Sweep {
  std::vector<double> thresholds;  // distinct distances, ascending
  std::vector<std::uint64_t> tp;   // similar pairs with distance <= threshold
  std::vector<std::uint64_t> fp;   // dissimilar pairs with distance <= threshold
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
};

Sweep sweep(std::span<const LabeledPair> pairs) {
  std::vector<LabeledPair> sorted(pairs.begin(), pairs.end());
  for (const auto& p : sorted) {
    if (!std::isfinite(p.distance) || p.distance < 0.0) {
      throw ConfigError("labeled pair distances must be finite and >= 0");
    }
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const LabeledPair& a, const LabeledPair& b) { return a.distance < b.distance; });
  Sweep s;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    (sorted[i].label == PairLabel::kSimilar ? tp : fp) += 1;
    // All pairs tied at one distance enter in the same step.
    if (i + 1 == sorted.size() || sorted[i + 1].distance != sorted[i].distance) {
      s.thresholds.push_back(sorted[i].distance);
      s.tp.push_back(tp);
      s.fp.push_back(fp);
    }
  }
  s.positives = tp;
  s.negatives = fp;
  return s;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("invalid number '" + text + "'");
  }
  return v;
}

}  // namespace

RocCurve compute_roc(std::span<const LabeledPair> pairs) {
  const Sweep s = sweep(pairs);
  if (s.positives == 0 || s.negatives == 0) {
    throw DegenerateLabelsError("ROC needs at least one similar and one dissimilar pair");
  }
  const double p = static_cast<double>(s.positives);
  const double n = static_cast<double>(s.negatives);
  RocCurve curve;
  curve.points.push_back({-kInf, 0.0, 0.0});
  // Trapezoid area in integer units of 1 / (2 P N) keeps AUC exact for
  // separable and fully tied inputs.
  std::uint64_t area2 = 0;
  std::uint64_t prev_tp = 0;
  std::uint64_t prev_fp = 0;
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    curve.points.push_back({s.thresholds[i], s.tp[i] / p, s.fp[i] / n});
    area2 += (s.fp[i] - prev_fp) * (s.tp[i] + prev_tp);
    prev_tp = s.tp[i];
    prev_fp = s.fp[i];
  }
  curve.points.push_back({kInf, 1.0, 1.0});
  curve.auc = static_cast<double>(area2) / (2.0 * p * n);
  return curve;
}

std::vector<PrPoint> compute_pr(std::span<const LabeledPair> pairs) {
  const Sweep s = sweep(pairs);
  if (s.positives == 0) {
    throw DegenerateLabelsError("PR curve needs at least one similar pair");
  }
  std::vector<PrPoint> out;
  out.push_back({-kInf, 1.0, 0.0});
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    const std::uint64_t predicted = s.tp[i] + s.fp[i];
    const double precision =
        predicted == 0 ? 1.0 : static_cast<double>(s.tp[i]) / static_cast<double>(predicted);
    out.push_back({s.thresholds[i], precision,
                   static_cast<double>(s.tp[i]) / static_cast<double>(s.positives)});
  }
  return out;
}

ThresholdPolicy ThresholdPolicy::target_fpr(double v) {
  if (!(v > 0.0 && v < 1.0)) throw ConfigError("target FPR must lie in (0,1)");
  return ThresholdPolicy(Kind::kTargetFpr, v);
}

ThresholdPolicy ThresholdPolicy::target_tpr(double v) {
  if (!(v > 0.0 && v < 1.0)) throw ConfigError("target TPR must lie in (0,1)");
  return ThresholdPolicy(Kind::kTargetTpr, v);
}

ThresholdPolicy ThresholdPolicy::fixed(double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError("fixed threshold must be finite and >= 0");
  }
  return ThresholdPolicy(Kind::kFixed, v);
}

ThresholdPolicy ThresholdPolicy::parse(const std::string& text) {
  if (text == "youden") return youden();
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("unknown threshold policy '" + text +
                      "' (expected youden, fpr:V, tpr:V or fixed:V)");
  }
  const std::string kind = text.substr(0, colon);
  const double v = parse_double(text.substr(colon + 1));
  if (kind == "fpr") return target_fpr(v);
  if (kind == "tpr") return target_tpr(v);
  if (kind == "fixed") return fixed(v);
  throw ConfigError("unknown threshold policy kind '" + kind + "'");
}

std::string ThresholdPolicy::to_string() const {
  switch (kind_) {
    case Kind::kYouden:
      return "youden";
    case Kind::kTargetFpr:
      return "fpr:" + format_double(value_);
    case Kind::kTargetTpr:
      return "tpr:" + format_double(value_);
    case Kind::kFixed:
      return "fixed:" + format_double(value_);
  }
  return "youden";
}

DecisionThreshold select_threshold(const RocCurve& curve,
                                   const ThresholdPolicy& policy) {
  if (curve.points.size() < 3) {
    throw ConfigError("ROC curve has no finite thresholds");
  }
  // Finite points live at indices [1, last).
  const std::size_t first = 1;
  const std::size_t last = curve.points.size() - 1;
  DecisionThreshold out;
  out.policy = policy;

  switch (policy.kind()) {
    case ThresholdPolicy::Kind::kYouden: {
      std::size_t best = first;
      double best_j = curve.points[first].tpr - curve.points[first].fpr;
      for (std::size_t i = first + 1; i < last; ++i) {
        const double j = curve.points[i].tpr - curve.points[i].fpr;
        // Rates are ratios of counts; equal J can differ in the last ulp.
        if (j > best_j + 1e-12) {
          best_j = j;
          best = i;
        }
      }
      out.value = curve.points[best].threshold;
      out.achieved_tpr = curve.points[best].tpr;
      out.achieved_fpr = curve.points[best].fpr;
      return out;
    }
    case ThresholdPolicy::Kind::kTargetFpr: {
      std::size_t found = last;
      for (std::size_t i = first; i < last; ++i) {
        if (curve.points[i].fpr <= policy.value()) found = i;
      }
      if (found == last) {
        throw UnattainablePolicyError(
            "target FPR " + format_double(policy.value()) +
                " is below the smallest achievable FPR " +
                format_double(curve.points[first].fpr),
            curve.points[first].tpr, curve.points[first].fpr);
      }
      out.value = curve.points[found].threshold;
      out.achieved_tpr = curve.points[found].tpr;
      out.achieved_fpr = curve.points[found].fpr;
      return out;
    }
    case ThresholdPolicy::Kind::kTargetTpr: {
      for (std::size_t i = first; i < last; ++i) {
        if (curve.points[i].tpr >= policy.value()) {
          out.value = curve.points[i].threshold;
          out.achieved_tpr = curve.points[i].tpr;
          out.achieved_fpr = curve.points[i].fpr;
          return out;
        }
      }
      const RocPoint& top = curve.points[last - 1];
      throw UnattainablePolicyError("target TPR " + format_double(policy.value()) +
                                        " exceeds the curve maximum " +
                                        format_double(top.tpr),
                                    top.tpr, top.fpr);
    }
    case ThresholdPolicy::Kind::kFixed: {
      out.value = policy.value();
      for (std::size_t i = first; i < last; ++i) {
        if (curve.points[i].threshold <= out.value) {
          out.achieved_tpr = curve.points[i].tpr;
          out.achieved_fpr = curve.points[i].fpr;
        }
      }
      return out;
    }
  }
  return out;
}

bool is_replication(double distance, const DecisionThreshold& t) {
  return distance <= t.value;
}

std::string roc_to_csv(const RocCurve& curve) {
  std::string out = "threshold,tpr,fpr\n";
  for (const auto& p : curve.points) {
    out += format_double(p.threshold) + "," + format_double(p.tpr) + "," +
           format_double(p.fpr) + "\n";
  }
  return out;
}

std::string pr_to_csv(std::span<const PrPoint> points) {
  std::string out = "threshold,precision,recall\n";
  for (const auto& p : points) {
    out += format_double(p.threshold) + "," + format_double(p.precision) + "," +
           format_double(p.recall) + "\n";
  }
  return out;
}

}  // namespace provaudit
