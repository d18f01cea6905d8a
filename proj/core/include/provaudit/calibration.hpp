#pragma once

#include <span>
#include <string>
#include <vector>

#include "provaudit/metric.hpp"

namespace provaudit {

// Positive class throughout: replication, i.e. label similar, predicted when
// distance <= threshold.
struct LabeledPair {
  double distance = 0.0;
  PairLabel label = PairLabel::kSimilar;
};

struct RocPoint {
  double threshold = 0.0;  // -inf and +inf mark the two sentinel ends
  double tpr = 0.0;
  double fpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

// Points ordered from the strictest threshold (-inf, rate (0,0)) to the most
// permissive (+inf, rate (1,1)), one point per distinct distance in between.
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
  bool operator==(const PrPoint&) const = default;
};

RocCurve compute_roc(std::span<const LabeledPair> pairs);
std::vector<PrPoint> compute_pr(std::span<const LabeledPair> pairs);

class ThresholdPolicy {
 public:
  enum class Kind { kYouden, kTargetFpr, kTargetTpr, kFixed };

  static ThresholdPolicy youden() { return ThresholdPolicy(Kind::kYouden, 0.0); }
  static ThresholdPolicy target_fpr(double v);
  static ThresholdPolicy target_tpr(double v);
  static ThresholdPolicy fixed(double v);

  // "youden", "fpr:0.05", "tpr:0.9", "fixed:0.2".
  static ThresholdPolicy parse(const std::string& text);
  std::string to_string() const;

  Kind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }
  bool operator==(const ThresholdPolicy&) const = default;

 private:
  ThresholdPolicy(Kind kind, double value) : kind_(kind), value_(value) {}
  Kind kind_;
  double value_;
};

struct DecisionThreshold {
  double value = 0.0;
  ThresholdPolicy policy = ThresholdPolicy::youden();
  double achieved_tpr = 0.0;
  double achieved_fpr = 0.0;

  bool operator==(const DecisionThreshold&) const = default;
};

// youden: smallest threshold maximizing TPR - FPR. Every value up to the
//   next distinct distance scores the same J; the curve point itself is the
//   strictest of them.
// target_fpr(v): largest curve threshold with FPR <= v.
// target_tpr(v): smallest curve threshold with TPR >= v.
// fixed(v): v; achieved rates are read off the curve.
// Throws UnattainablePolicyError when no finite threshold meets the target.
DecisionThreshold select_threshold(const RocCurve& curve,
                                   const ThresholdPolicy& policy);

bool is_replication(double distance, const DecisionThreshold& t);

std::string roc_to_csv(const RocCurve& curve);
std::string pr_to_csv(std::span<const PrPoint> points);

}  // namespace provaudit
