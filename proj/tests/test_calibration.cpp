#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>

#include "binoculars/calibration.hpp"
#include "oracle.hpp"

using namespace binoculars;

namespace {

std::vector<ScoredExample> make(std::vector<double> machine,
                                std::vector<double> human) {
  std::vector<ScoredExample> out;
  for (double s : machine) out.push_back({s, Label::machine});
  for (double s : human) out.push_back({s, Label::human});
  return out;
}

std::vector<oracle::Scored> to_oracle(const std::vector<ScoredExample>& in) {
  std::vector<oracle::Scored> out;
  for (const auto& ex : in) out.push_back({ex.score, ex.label == Label::machine});
  return out;
}

}  // namespace

TEST_CASE("separable classes get the midpoint of the separating gap") {
  auto fit = fit_global_threshold(make({0.7, 0.8}, {1.0, 1.1}));
  CHECK(fit.profile.threshold == 0.9);
  CHECK(fit.accuracy == 1.0);
}

TEST_CASE("non-separable case matches the brute-force optimum") {
  auto scored = make({0.7, 1.05}, {1.0, 1.1});
  auto fit = fit_global_threshold(scored);
  CHECK(fit.accuracy == 0.75);
  CHECK(fit.accuracy == oracle::enumerate_best_accuracy(to_oracle(scored)));
  // two maximal regions, (0.7, 1.0] and (1.05, 1.1]; the first is wider
  CHECK(fit.profile.threshold == doctest::Approx(0.85).epsilon(1e-15));
}

TEST_CASE("identical interleaved scores give midpoint of the full range") {
  auto fit = fit_global_threshold(make({0.5, 0.9}, {0.5, 0.9}));
  CHECK(fit.accuracy == 0.5);
  CHECK(fit.profile.threshold == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("single-class input is rejected") {
  CHECK_THROWS_AS(fit_global_threshold(make({0.5, 0.6}, {})),
                  std::runtime_error);
  CHECK_THROWS_AS(fit_global_threshold(make({}, {1.0})), std::runtime_error);
}

TEST_CASE("classification direction and boundary") {
  ThresholdProfile profile;
  profile.threshold = 0.901;
  CHECK(classify(0.73, profile) == Label::machine);
  CHECK(classify(0.7600, profile) == Label::machine);
  CHECK(classify(0.9167, profile) == Label::human);
  CHECK(classify(1.0096, profile) == Label::human);
  CHECK(classify(0.901, profile) == Label::human);  // boundary goes human
}

TEST_CASE("classification is monotone in the score") {
  std::mt19937 rng(13);
  ThresholdProfile profile;
  profile.threshold = 1.0;
  double previous = -1.0;
  for (int i = 0; i < 1000; ++i) {
    double s = (rng() % 20000) / 10000.0;
    if (classify(s, profile) == Label::human) {
      CHECK(classify(s + 0.5, profile) == Label::human);
      CHECK(classify(s + 2.0, profile) == Label::human);
    }
    previous = s;
  }
  (void)previous;
}

TEST_CASE("duplication of the whole example set leaves the fit unchanged") {
  std::mt19937 rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> machine, human;
    std::size_t nm = 1 + rng() % 8, nh = 1 + rng() % 8;
    for (std::size_t i = 0; i < nm; ++i)
      machine.push_back((rng() % 1000) / 500.0);
    for (std::size_t i = 0; i < nh; ++i)
      human.push_back((rng() % 1000) / 500.0);
    auto once = make(machine, human);
    auto twice = once;
    twice.insert(twice.end(), once.begin(), once.end());
    auto fit1 = fit_global_threshold(once);
    auto fit2 = fit_global_threshold(twice);
    CHECK(fit1.profile.threshold == fit2.profile.threshold);
    CHECK(fit1.accuracy == fit2.accuracy);
  }
}

TEST_CASE("separable fits always land strictly between the classes") {
  std::mt19937 rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> machine, human;
    std::size_t nm = 1 + rng() % 6, nh = 1 + rng() % 6;
    for (std::size_t i = 0; i < nm; ++i)
      machine.push_back(0.2 + (rng() % 500) / 1000.0);  // [0.2, 0.7)
    for (std::size_t i = 0; i < nh; ++i)
      human.push_back(0.8 + (rng() % 500) / 1000.0);  // [0.8, 1.3)
    auto fit = fit_global_threshold(make(machine, human));
    CHECK(fit.accuracy == 1.0);
    double max_machine = *std::max_element(machine.begin(), machine.end());
    double min_human = *std::min_element(human.begin(), human.end());
    CHECK(fit.profile.threshold > max_machine);
    CHECK(fit.profile.threshold < min_human);
  }
}

TEST_CASE("fit matches the brute-force optimum on random instances") {
  std::mt19937 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> machine, human;
    std::size_t nm = 1 + rng() % 12, nh = 1 + rng() % 12;
    for (std::size_t i = 0; i < nm; ++i)
      machine.push_back((rng() % 40) / 20.0);  // deliberate ties
    for (std::size_t i = 0; i < nh; ++i)
      human.push_back((rng() % 40) / 20.0);
    auto scored = make(machine, human);
    auto fit = fit_global_threshold(scored);
    CHECK(fit.accuracy == oracle::enumerate_best_accuracy(to_oracle(scored)));

    // the returned threshold achieves the reported accuracy
    int correct = 0;
    for (const auto& ex : scored) {
      bool predicted_machine = classify(ex.score, fit.profile) == Label::machine;
      if (predicted_machine == (ex.label == Label::machine)) ++correct;
    }
    CHECK(static_cast<double>(correct) / scored.size() == fit.accuracy);
  }
}

TEST_CASE("refitting is bit-identical") {
  std::mt19937 rng(47);
  std::vector<double> machine, human;
  for (int i = 0; i < 30; ++i) {
    machine.push_back((rng() % 10000) / 7000.0);
    human.push_back((rng() % 10000) / 7000.0 + 0.2);
  }
  auto scored = make(machine, human);
  auto fit1 = fit_global_threshold(scored);
  auto fit2 = fit_global_threshold(scored);
  CHECK(std::memcmp(&fit1.profile.threshold, &fit2.profile.threshold,
                    sizeof(double)) == 0);
}

TEST_CASE("profiles round trip through json with fitted_on and guard") {
  ThresholdProfile profile;
  profile.threshold = 0.901;
  profile.fitted_on = {"news", "essays"};
  auto text = profile_to_json(profile);
  CHECK(text ==
        "{\"threshold\":0.90100000000000002,"
        "\"fitted_on\":[\"news\",\"essays\"],\"objective\":\"accuracy\"}");
  auto back = profile_from_json(text);
  CHECK(back.threshold == profile.threshold);
  CHECK(back.fitted_on == profile.fitted_on);

  CHECK(is_in_domain(back, "news"));
  CHECK_FALSE(is_in_domain(back, "reviews"));

  CHECK_THROWS_AS(profile_from_json("{\"threshold\":-1.0,\"fitted_on\":[]}"),
                  std::runtime_error);
}
