#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "binoculars/calibration.hpp"

namespace binoculars {

// Machine is the positive class throughout; a score below the threshold
// predicts positive.

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // smallest threshold realizing this point
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) .. (1,1), fpr/tpr non-decreasing
  int n_pos = 0;                 // machine examples
  int n_neg = 0;                 // human examples
};

// Exact step-function ROC from sorted distinct scores; tied scores move as
// one group. pre: both classes present.
RocCurve roc_curve(std::span<const ScoredExample> scored);

// Trapezoidal area; equals the Mann-Whitney statistic
// (#(machine < human) + ties/2) / (n_pos * n_neg).
double auc(const RocCurve& curve);

struct OperatingPoint {
  double tpr = 0.0;
  double achieved_fpr = 0.0;  // may sit below target: no interpolation
  double threshold = 0.0;
};

// Max TPR subject to empirical FPR <= target. Conservative step semantics:
// with n_neg human examples the smallest nonzero achievable FPR is 1/n_neg,
// and achieved_fpr makes under-resolved targets visible.
OperatingPoint tpr_at_fpr(std::span<const ScoredExample> scored,
                          double target_fpr);

struct ConfusionMetrics {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fnr = 0.0;
  double accuracy = 0.0;
  bool precision_defined = true;  // false when nothing was predicted positive
};

ConfusionMetrics confusion_metrics(std::span<const ScoredExample> scored,
                                   const ThresholdProfile& profile);

enum class MetricKind { auc, tpr_at_fpr };

struct MetricId {
  MetricKind kind = MetricKind::auc;
  double fpr_target = 0.0;  // tpr_at_fpr only
};

std::string metric_name(const MetricId& id);

// Stratified bootstrap standard error: n_resamples subsamples of
// floor(n * fraction) examples (rounded down to even), drawn with replacement
// half from each class; reported as the sample standard deviation of the
// resample metrics. Deterministic given seed; resample r uses an independent
// generator derived from (seed, r).
double bootstrap_se(std::span<const ScoredExample> scored, const MetricId& id,
                    int n_resamples = 20, double fraction = 1.0 / 3.0,
                    uint64_t seed = 0);

struct EvalOptions {
  std::vector<double> fpr_targets = {0.0001, 0.001, 0.01, 0.05};
  bool bootstrap = false;
  int bootstrap_resamples = 20;
  double bootstrap_fraction = 1.0 / 3.0;
  uint64_t bootstrap_seed = 0;
};

struct EvalReport {
  double auc_value = 0.0;
  int n_pos = 0;
  int n_neg = 0;
  std::vector<std::pair<double, OperatingPoint>> tpr_table;
  std::optional<double> threshold;
  std::optional<ConfusionMetrics> confusion;
  std::map<std::string, double> bootstrap_se;  // metric name -> SE
  std::optional<EvalOptions> bootstrap_options;
};

EvalReport evaluate(std::span<const ScoredExample> scored,
                    const std::optional<ThresholdProfile>& profile,
                    const EvalOptions& options = {});

// JSON with all floats at 17 significant digits.
std::string report_to_json(const EvalReport& report,
                           const std::string& meta_json = "");

// CSV rows fpr,tpr,threshold for plotting, 17 significant digits.
void write_roc_csv(std::ostream& out, const RocCurve& curve);

std::string format_double(double value);  // %.17g

}  // namespace binoculars
