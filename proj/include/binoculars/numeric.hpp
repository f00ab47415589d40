#pragma once

#include <cstdint>
#include <span>

namespace binoculars {

// Compensated (Kahan) accumulator. Per-token sums over a full vocabulary can
// reach 1e8 terms, where naive accumulation loses digits.
class KahanSum {
 public:
  void add(double x) {
    double y = x - comp_;
    double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double log_sum_exp(std::span<const double> log_values);

// splitmix64: cheap, well-mixed 64-bit hash; used to derive independent
// per-item seeds from (seed, index) so parallel fan-out stays order-free.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t index) {
  return splitmix64(splitmix64(seed) ^ (index + 1));
}

// Uniform double in [0, 1) from a 64-bit word. Unlike
// std::uniform_real_distribution this is pinned across implementations.
inline double uniform_double(uint64_t word) {
  return static_cast<double>(word >> 11) * 0x1.0p-53;
}

// Unbiased-enough bounded draw (Lemire multiply-shift); deterministic.
inline uint64_t bounded_uint(uint64_t word, uint64_t bound) {
  return static_cast<uint64_t>(
      (static_cast<unsigned __int128>(word) * bound) >> 64);
}

}  // namespace binoculars
