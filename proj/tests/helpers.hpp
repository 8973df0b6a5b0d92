#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "matchfn/panel.hpp"

namespace testing {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("matchfn-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

/// Panel with log-uniform U and V and hires drawn around sqrt(U V).
inline matchfn::MarketPanel random_panel(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> logu(std::log(500.0), std::log(2000.0));
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  std::vector<matchfn::Observation> obs;
  for (std::size_t t = 0; t < n; ++t) {
    const double u = std::exp(logu(gen));
    const double v = std::exp(logu(gen));
    obs.push_back({static_cast<matchfn::PeriodIndex>(2014 * 12 + t), std::sqrt(u * v) * jitter(gen), u, v});
  }
  return matchfn::MarketPanel("random", std::move(obs));
}

}  // namespace testing
