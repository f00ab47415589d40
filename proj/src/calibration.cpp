#include "binoculars/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binoculars/metrics.hpp"

namespace binoculars {

namespace {

struct ClassCounts {
  std::vector<double> scores;  // sorted distinct
  std::vector<int> machine_at;
  std::vector<int> human_at;
  int n_machine = 0;
  int n_human = 0;
};

ClassCounts tally(std::span<const ScoredExample> scored) {
  ClassCounts c;
  std::vector<std::pair<double, Label>> items;
  items.reserve(scored.size());
  for (const auto& ex : scored) {
    if (ex.label == Label::human) {
      ++c.n_human;
    } else if (ex.label == Label::machine) {
      ++c.n_machine;
    } else {
      throw std::invalid_argument(
          "calibration requires human/machine labels; got an unlabeled "
          "example");
    }
    if (!std::isfinite(ex.score))
      throw std::invalid_argument("non-finite score in calibration input");
    items.emplace_back(ex.score, ex.label);
  }
  if (c.n_machine == 0 || c.n_human == 0) {
    throw std::runtime_error(
        "threshold fitting needs at least one example of each class");
  }
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [score, label] : items) {
    if (c.scores.empty() || c.scores.back() != score) {
      c.scores.push_back(score);
      c.machine_at.push_back(0);
      c.human_at.push_back(0);
    }
    if (label == Label::machine) {
      ++c.machine_at.back();
    } else {
      ++c.human_at.back();
    }
  }
  return c;
}

}  // namespace

FitResult fit_global_threshold(std::span<const ScoredExample> scored,
                               std::vector<std::string> fitted_on) {
  ClassCounts c = tally(scored);
  std::size_t k = c.scores.size();
  int total = c.n_machine + c.n_human;

  // Accuracy of (score < t => machine) is constant on the regions
  //   R_0 = t <= s_1,  R_i = (s_i, s_{i+1}],  R_k = t > s_k.
  // region(r) classifies the first r distinct-score groups as machine.
  std::vector<int> correct(k + 1);
  int machine_below = 0;  // machine examples predicted machine
  int human_below = 0;    // human examples predicted machine
  for (std::size_t r = 0; r <= k; ++r) {
    if (r > 0) {
      machine_below += c.machine_at[r - 1];
      human_below += c.human_at[r - 1];
    }
    correct[r] = machine_below + (c.n_human - human_below);
  }
  int best = *std::max_element(correct.begin(), correct.end());

  // Merge adjacent maximal regions into runs and take the widest; its
  // midpoint is the deterministic tie-break. Width is measured over the
  // observed score range (the unbounded end regions contribute none).
  double best_width = -1.0;
  double best_threshold = 0.0;
  std::size_t r = 0;
  while (r <= k) {
    if (correct[r] != best) {
      ++r;
      continue;
    }
    std::size_t run_begin = r;
    while (r <= k && correct[r] == best) ++r;
    std::size_t run_end = r - 1;  // inclusive

    // t-interval of the run is (s_{run_begin}, s_{run_end+1}] with
    // s_0 = -inf and s_{k+1} = +inf; clamp to the observed range.
    double lo = run_begin == 0 ? c.scores.front() : c.scores[run_begin - 1];
    double hi = run_end == k ? c.scores.back() : c.scores[run_end];
    double width = hi - lo;
    double threshold;
    if (run_begin == 0 && run_end == 0) {
      threshold = c.scores.front();  // everything classified human
    } else if (run_begin == k && run_end == k) {
      // Everything classified machine: smallest representable t above max.
      threshold = std::nextafter(c.scores.back(),
                                 std::numeric_limits<double>::infinity());
    } else {
      threshold = lo + width / 2.0;
    }
    if (width > best_width) {
      best_width = width;
      best_threshold = threshold;
    }
  }

  FitResult result;
  result.profile.threshold = best_threshold;
  result.profile.fitted_on = std::move(fitted_on);
  result.accuracy = static_cast<double>(best) / static_cast<double>(total);
  return result;
}

Label classify(double score, const ThresholdProfile& profile) {
  // Boundary goes to human: the false-positive-averse side.
  return score < profile.threshold ? Label::machine : Label::human;
}

bool is_in_domain(const ThresholdProfile& profile,
                  const std::string& corpus_name) {
  return std::find(profile.fitted_on.begin(), profile.fitted_on.end(),
                   corpus_name) != profile.fitted_on.end();
}

std::string profile_to_json(const ThresholdProfile& profile,
                            const std::string& meta_json) {
  std::ostringstream out;
  out << "{\"threshold\":" << format_double(profile.threshold)
      << ",\"fitted_on\":" << nlohmann::json(profile.fitted_on).dump()
      << ",\"objective\":\"accuracy\"";
  if (!meta_json.empty()) out << ",\"meta\":" << meta_json;
  out << "}";
  return out.str();
}

ThresholdProfile profile_from_json(const std::string& text) {
  nlohmann::json obj = nlohmann::json::parse(text);
  ThresholdProfile profile;
  profile.threshold = obj.at("threshold").get<double>();
  if (obj.contains("fitted_on"))
    profile.fitted_on = obj["fitted_on"].get<std::vector<std::string>>();
  if (obj.contains("objective") &&
      obj["objective"].get<std::string>() != "accuracy") {
    throw std::runtime_error("unsupported threshold objective: " +
                             obj["objective"].get<std::string>());
  }
  if (!(profile.threshold > 0.0))
    throw std::runtime_error("threshold profile must be positive");
  return profile;
}

ThresholdProfile load_profile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open())
    throw std::runtime_error("cannot open threshold profile: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return profile_from_json(buf.str());
}

void save_profile(const ThresholdProfile& profile, const std::string& path,
                  const std::string& meta_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out.is_open())
    throw std::runtime_error("cannot write threshold profile: " + path);
  out << profile_to_json(profile, meta_json) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace binoculars
