#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "mdat/numerics/tensor.hpp"

namespace testing {

template <class Real = double>
mdat::numerics::Tensor<Real> random_tensor(std::mt19937_64& rng, mdat::numerics::Shape shape,
                                           double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  mdat::numerics::Tensor<Real> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<Real>(dist(rng));
  return t;
}

// Entries bounded away from zero so kinked ops are differentiable under
// finite differences.
template <class Real = double>
mdat::numerics::Tensor<Real> away_from_zero(std::mt19937_64& rng, mdat::numerics::Shape shape) {
  std::uniform_real_distribution<double> mag(0.05, 1.0);
  std::bernoulli_distribution sign(0.5);
  mdat::numerics::Tensor<Real> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<Real>(sign(rng) ? mag(rng) : -mag(rng));
  return t;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mdat-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
