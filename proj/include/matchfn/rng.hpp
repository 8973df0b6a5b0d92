#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace matchfn {

/// Independent random streams drawn by the simulator. Each process owns one so
/// that changing the parameters of one leaves the draws of the others intact.
enum class Substream : std::uint64_t {
  efficiency = 1,
  seekers = 2,
  vacancies = 3,
  noise = 4,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// mt19937_64 with a portable standard-normal sampler. std::normal_distribution
/// is implementation-defined, so draws are produced here by Marsaglia's polar
/// method on top of the engine's exactly specified output.
class Rng {
 public:
  Rng(std::uint64_t seed, Substream stream)
      : engine_(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)))) {}

  /// Uniform on (-1, 1) with 53 bits of resolution.
  double uniform_symmetric() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-52 - 1.0;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double x, y, s;
    do {
      x = uniform_symmetric();
      y = uniform_symmetric();
      s = x * x + y * y;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = y * f;
    has_spare_ = true;
    return x * f;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace matchfn
