#pragma once

#include <span>
#include <string>
#include <vector>

#include "binoculars/corpus.hpp"

namespace binoculars {

struct ScoredExample {
  double score = 0.0;
  Label label = Label::unlabeled;
};

/// The single global decision cut. The direction is fixed: score < threshold
/// classifies machine (lower score means more machine-like); the boundary
/// itself classifies human.
struct ThresholdProfile {
  double threshold = 0.0;
  std::vector<std::string> fitted_on;  // corpus names used for fitting
};

struct FitResult {
  ThresholdProfile profile;
  double accuracy = 0.0;  // training accuracy at the fitted threshold
};

// Exact accuracy-maximizing threshold for the rule (score < t => machine).
// Accuracy is piecewise constant in t; among maximizing regions the widest
// one wins and its midpoint is returned, so refits are bit-identical.
// pre: both classes present.
FitResult fit_global_threshold(std::span<const ScoredExample> scored,
                               std::vector<std::string> fitted_on = {});

Label classify(double score, const ThresholdProfile& profile);

// Out-of-domain guard: true when the corpus participated in the fit.
bool is_in_domain(const ThresholdProfile& profile,
                  const std::string& corpus_name);

// Persisted as {"threshold":float, "fitted_on":[str], "objective":"accuracy"}.
std::string profile_to_json(const ThresholdProfile& profile,
                            const std::string& meta_json = "");
ThresholdProfile profile_from_json(const std::string& text);
ThresholdProfile load_profile(const std::string& path);
void save_profile(const ThresholdProfile& profile, const std::string& path,
                  const std::string& meta_json = "");

}  // namespace binoculars
