#include "binoculars/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binoculars/numeric.hpp"

namespace binoculars {

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

namespace {

struct Tally {
  std::vector<double> scores;  // sorted distinct
  std::vector<int> machine_at;
  std::vector<int> human_at;
  int n_machine = 0;
  int n_human = 0;
};

Tally tally(std::span<const ScoredExample> scored) {
  Tally t;
  std::vector<std::pair<double, Label>> items;
  items.reserve(scored.size());
  for (const auto& ex : scored) {
    if (ex.label == Label::machine) {
      ++t.n_machine;
    } else if (ex.label == Label::human) {
      ++t.n_human;
    } else {
      throw std::invalid_argument(
          "metrics require human/machine labels; got an unlabeled example");
    }
    if (!std::isfinite(ex.score))
      throw std::invalid_argument("non-finite score in metrics input");
    items.emplace_back(ex.score, ex.label);
  }
  if (t.n_machine == 0 || t.n_human == 0) {
    throw std::runtime_error("metrics need both classes present");
  }
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [score, label] : items) {
    if (t.scores.empty() || t.scores.back() != score) {
      t.scores.push_back(score);
      t.machine_at.push_back(0);
      t.human_at.push_back(0);
    }
    if (label == Label::machine) {
      ++t.machine_at.back();
    } else {
      ++t.human_at.back();
    }
  }
  return t;
}

}  // namespace

RocCurve roc_curve(std::span<const ScoredExample> scored) {
  Tally t = tally(scored);
  RocCurve curve;
  curve.n_pos = t.n_machine;
  curve.n_neg = t.n_human;

  // Point r classifies the first r distinct-score groups positive; it is
  // realized by any threshold in (s_r, s_{r+1}], and the stored threshold is
  // the smallest observed score realizing it (+inf for the all-positive end).
  int machine_below = 0;
  int human_below = 0;
  for (std::size_t r = 0; r <= t.scores.size(); ++r) {
    if (r > 0) {
      machine_below += t.machine_at[r - 1];
      human_below += t.human_at[r - 1];
    }
    RocPoint point;
    point.fpr = static_cast<double>(human_below) / t.n_human;
    point.tpr = static_cast<double>(machine_below) / t.n_machine;
    point.threshold = r < t.scores.size()
                          ? t.scores[r]
                          : std::numeric_limits<double>::infinity();
    curve.points.push_back(point);
  }
  return curve;
}

double auc(const RocCurve& curve) {
  KahanSum area;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area.add((b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0);
  }
  return area.value();
}

OperatingPoint tpr_at_fpr(std::span<const ScoredExample> scored,
                          double target_fpr) {
  if (target_fpr < 0.0 || target_fpr > 1.0)
    throw std::invalid_argument("target FPR must lie in [0, 1]");
  RocCurve curve = roc_curve(scored);
  OperatingPoint best;
  bool found = false;
  for (const auto& point : curve.points) {
    if (point.fpr > target_fpr) continue;
    if (!found || point.tpr > best.tpr ||
        (point.tpr == best.tpr && point.fpr < best.achieved_fpr)) {
      best = {point.tpr, point.fpr, point.threshold};
      found = true;
    }
  }
  // fpr = 0 is always admissible, so a point always exists.
  return best;
}

ConfusionMetrics confusion_metrics(std::span<const ScoredExample> scored,
                                   const ThresholdProfile& profile) {
  int tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& ex : scored) {
    if (ex.label == Label::unlabeled)
      throw std::invalid_argument(
          "metrics require human/machine labels; got an unlabeled example");
    bool predicted_machine = classify(ex.score, profile) == Label::machine;
    if (ex.label == Label::machine) {
      (predicted_machine ? tp : fn) += 1;
    } else {
      (predicted_machine ? fp : tn) += 1;
    }
  }
  if (tp + fn == 0 || fp + tn == 0)
    throw std::runtime_error("metrics need both classes present");

  ConfusionMetrics m;
  int predicted_pos = tp + fp;
  m.precision_defined = predicted_pos > 0;
  m.precision = m.precision_defined
                    ? static_cast<double>(tp) / predicted_pos
                    : 0.0;
  m.recall = static_cast<double>(tp) / (tp + fn);
  m.fnr = 1.0 - m.recall;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.accuracy = static_cast<double>(tp + tn) / (tp + fp + tn + fn);
  return m;
}

std::string metric_name(const MetricId& id) {
  switch (id.kind) {
    case MetricKind::auc:
      return "auc";
    case MetricKind::tpr_at_fpr:
      return "tpr_at_fpr_" + format_double(id.fpr_target);
  }
  throw std::logic_error("unreachable metric kind");
}

namespace {

double eval_metric(std::span<const ScoredExample> scored, const MetricId& id) {
  switch (id.kind) {
    case MetricKind::auc:
      return auc(roc_curve(scored));
    case MetricKind::tpr_at_fpr:
      return tpr_at_fpr(scored, id.fpr_target).tpr;
  }
  throw std::logic_error("unreachable metric kind");
}

}  // namespace

double bootstrap_se(std::span<const ScoredExample> scored, const MetricId& id,
                    int n_resamples, double fraction, uint64_t seed) {
  if (n_resamples < 2)
    throw std::invalid_argument("bootstrap needs at least 2 resamples");
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("bootstrap fraction must lie in (0, 1]");

  std::vector<std::size_t> machine_idx;
  std::vector<std::size_t> human_idx;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (scored[i].label == Label::machine) {
      machine_idx.push_back(i);
    } else if (scored[i].label == Label::human) {
      human_idx.push_back(i);
    } else {
      throw std::invalid_argument(
          "metrics require human/machine labels; got an unlabeled example");
    }
  }
  auto total = static_cast<std::size_t>(
      std::floor(static_cast<double>(scored.size()) * fraction));
  if (total % 2 == 1) --total;  // even, for the 50-50 class mix
  std::size_t per_class = total / 2;
  if (per_class < 1 || machine_idx.empty() || human_idx.empty()) {
    throw std::runtime_error(
        "class too small for stratified bootstrap at this fraction");
  }

  std::vector<double> values(static_cast<std::size_t>(n_resamples));
  for (int r = 0; r < n_resamples; ++r) {
    // Independent generator per resample: order-free under parallel fan-out.
    std::mt19937_64 rng(derive_seed(seed, static_cast<uint64_t>(r)));
    std::vector<ScoredExample> resample;
    resample.reserve(per_class * 2);
    for (std::size_t i = 0; i < per_class; ++i) {
      resample.push_back(
          scored[machine_idx[bounded_uint(rng(), machine_idx.size())]]);
    }
    for (std::size_t i = 0; i < per_class; ++i) {
      resample.push_back(
          scored[human_idx[bounded_uint(rng(), human_idx.size())]]);
    }
    values[static_cast<std::size_t>(r)] = eval_metric(resample, id);
  }

  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

EvalReport evaluate(std::span<const ScoredExample> scored,
                    const std::optional<ThresholdProfile>& profile,
                    const EvalOptions& options) {
  RocCurve curve = roc_curve(scored);
  EvalReport report;
  report.auc_value = auc(curve);
  report.n_pos = curve.n_pos;
  report.n_neg = curve.n_neg;
  for (double target : options.fpr_targets) {
    report.tpr_table.emplace_back(target, tpr_at_fpr(scored, target));
  }
  if (profile) {
    report.threshold = profile->threshold;
    report.confusion = confusion_metrics(scored, *profile);
  }
  if (options.bootstrap) {
    report.bootstrap_options = options;
    std::vector<MetricId> ids;
    ids.push_back({MetricKind::auc, 0.0});
    for (double target : options.fpr_targets)
      ids.push_back({MetricKind::tpr_at_fpr, target});
    for (const auto& id : ids) {
      report.bootstrap_se[metric_name(id)] =
          bootstrap_se(scored, id, options.bootstrap_resamples,
                       options.bootstrap_fraction, options.bootstrap_seed);
    }
  }
  return report;
}

std::string report_to_json(const EvalReport& report,
                           const std::string& meta_json) {
  std::ostringstream out;
  out << "{";
  if (!meta_json.empty()) out << "\"meta\":" << meta_json << ",";
  out << "\"auc\":" << format_double(report.auc_value)
      << ",\"n_pos\":" << report.n_pos << ",\"n_neg\":" << report.n_neg;
  out << ",\"tpr_at_fpr\":{";
  for (std::size_t i = 0; i < report.tpr_table.size(); ++i) {
    const auto& [target, point] = report.tpr_table[i];
    if (i > 0) out << ",";
    out << "\"" << format_double(target) << "\":{"
        << "\"tpr\":" << format_double(point.tpr)
        << ",\"achieved_fpr\":" << format_double(point.achieved_fpr)
        << ",\"threshold\":" << format_double(point.threshold) << "}";
  }
  out << "}";
  if (report.threshold)
    out << ",\"threshold\":" << format_double(*report.threshold);
  if (report.confusion) {
    const auto& c = *report.confusion;
    out << ",\"f1\":" << format_double(c.f1)
        << ",\"precision\":" << format_double(c.precision)
        << ",\"precision_defined\":" << (c.precision_defined ? "true" : "false")
        << ",\"recall\":" << format_double(c.recall)
        << ",\"fnr\":" << format_double(c.fnr)
        << ",\"accuracy\":" << format_double(c.accuracy);
  }
  if (!report.bootstrap_se.empty()) {
    out << ",\"bootstrap_se\":{";
    bool first = true;
    for (const auto& [name, se] : report.bootstrap_se) {
      if (!first) out << ",";
      first = false;
      out << nlohmann::json(name).dump() << ":" << format_double(se);
    }
    out << "}";
    const auto& opts = *report.bootstrap_options;
    out << ",\"bootstrap\":{\"n_resamples\":" << opts.bootstrap_resamples
        << ",\"fraction\":" << format_double(opts.bootstrap_fraction)
        << ",\"seed\":" << opts.bootstrap_seed
        << ",\"estimator\":\"sample standard deviation across resamples\"}";
  }
  out << "}";
  return out.str();
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
  out << "fpr,tpr,threshold\n";
  for (const auto& point : curve.points) {
    out << format_double(point.fpr) << "," << format_double(point.tpr) << ","
        << format_double(point.threshold) << "\n";
  }
}

}  // namespace binoculars
