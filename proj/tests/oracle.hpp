// Test-only brute-force oracles. These deliberately re-derive every quantity
// with plain loops and naive accumulation, independent of the library code
// they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

// Average negative log prob of the observed token over the given positions,
// from plain probability tables (rows of probabilities, not logs).
inline double naive_log_ppl(const std::vector<std::vector<double>>& prob_rows,
                            const std::vector<int>& tokens,
                            const std::vector<int>& positions) {
  double sum = 0.0;
  for (int i : positions) {
    sum += -std::log(prob_rows[static_cast<size_t>(i)]
                             [static_cast<size_t>(tokens[static_cast<size_t>(i)])]);
  }
  return sum / static_cast<double>(positions.size());
}

inline double naive_cross_ppl(const std::vector<std::vector<double>>& p_rows,
                              const std::vector<std::vector<double>>& q_rows,
                              const std::vector<int>& positions) {
  double sum = 0.0;
  for (int i : positions) {
    const auto& p = p_rows[static_cast<size_t>(i)];
    const auto& q = q_rows[static_cast<size_t>(i)];
    double dot = 0.0;
    for (size_t j = 0; j < p.size(); ++j) {
      if (p[j] > 0.0) dot += p[j] * std::log(q[j]);
    }
    sum += -dot;
  }
  return sum / static_cast<double>(positions.size());
}

struct Scored {
  double score;
  bool machine;
};

// Mann-Whitney AUC by direct pair counting (low score = machine direction).
inline double mann_whitney_auc(const std::vector<Scored>& scored) {
  double wins = 0.0;
  long pairs = 0;
  for (const auto& m : scored) {
    if (!m.machine) continue;
    for (const auto& h : scored) {
      if (h.machine) continue;
      ++pairs;
      if (m.score < h.score) wins += 1.0;
      else if (m.score == h.score) wins += 0.5;
    }
  }
  if (pairs == 0) throw std::runtime_error("need both classes");
  return wins / static_cast<double>(pairs);
}

// All distinct operating points by scanning every candidate threshold
// (each observed score, midpoints between neighbours, and one beyond each
// extreme), with the strict rule score < t => machine.
inline std::vector<std::pair<double, double>> enumerate_roc(
    const std::vector<Scored>& scored) {
  std::vector<double> cuts;
  std::vector<double> values;
  for (const auto& s : scored) values.push_back(s.score);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  cuts.push_back(values.front() - 1.0);
  for (size_t i = 0; i < values.size(); ++i) {
    cuts.push_back(values[i]);
    if (i + 1 < values.size())
      cuts.push_back((values[i] + values[i + 1]) / 2.0);
  }
  cuts.push_back(values.back() + 1.0);

  int n_machine = 0, n_human = 0;
  for (const auto& s : scored) (s.machine ? n_machine : n_human) += 1;

  std::vector<std::pair<double, double>> points;  // (fpr, tpr)
  for (double t : cuts) {
    int tp = 0, fp = 0;
    for (const auto& s : scored) {
      if (s.score < t) (s.machine ? tp : fp) += 1;
    }
    points.emplace_back(static_cast<double>(fp) / n_human,
                        static_cast<double>(tp) / n_machine);
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return points;
}

// Best TPR subject to FPR <= target over the same exhaustive threshold scan.
inline double enumerate_tpr_at_fpr(const std::vector<Scored>& scored,
                                   double target) {
  double best = 0.0;
  for (const auto& [fpr, tpr] : enumerate_roc(scored)) {
    if (fpr <= target) best = std::max(best, tpr);
  }
  return best;
}

// Best achievable accuracy of (score < t => machine) over all thresholds.
inline double enumerate_best_accuracy(const std::vector<Scored>& scored) {
  std::vector<double> values;
  for (const auto& s : scored) values.push_back(s.score);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> cuts;
  cuts.push_back(values.front() - 1.0);
  for (size_t i = 0; i < values.size(); ++i) {
    cuts.push_back(values[i]);
    if (i + 1 < values.size())
      cuts.push_back((values[i] + values[i + 1]) / 2.0);
  }
  cuts.push_back(values.back() + 1.0);
  double best = 0.0;
  for (double t : cuts) {
    int correct = 0;
    for (const auto& s : scored) {
      bool predicted_machine = s.score < t;
      if (predicted_machine == s.machine) ++correct;
    }
    best = std::max(best, static_cast<double>(correct) /
                              static_cast<double>(scored.size()));
  }
  return best;
}

}  // namespace oracle
