#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "crossmask/geometry.hpp"
#include "crossmask/grid.hpp"

namespace testing_support {

using namespace crossmask;
namespace fs = std::filesystem;

/// Uniform doubles and ints on a seeded engine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Cross centred near `center` with arms in [min_arm, max_arm] and a crossing
/// angle in [min_deg, 180 - min_deg].
inline CrossScribble random_cross(Rng& rng, Point2 center, double min_arm, double max_arm, double min_deg = 40.0) {
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double theta = rng.uniform(min_deg, 180.0 - min_deg) * std::numbers::pi / 180.0;
  const Point2 u{std::cos(phi), std::sin(phi)};
  const Point2 v{std::cos(phi + theta), std::sin(phi + theta)};
  const double oa = rng.uniform(min_arm, max_arm), ob = rng.uniform(min_arm, max_arm);
  const double oc = rng.uniform(min_arm, max_arm), od = rng.uniform(min_arm, max_arm);
  return build_cross({center + oa * u, center - ob * u}, {center - oc * v, center + od * v});
}

inline MaskGrid random_binary(Rng& rng, std::size_t w, std::size_t h, double p) {
  MaskGrid g(w, h, 0.0);
  for (double& v : g) v = rng.coin(p) ? 1.0 : 0.0;
  return g;
}

inline MaskGrid block(std::size_t w, std::size_t h, std::size_t r0, std::size_t c0, std::size_t rows,
                      std::size_t cols) {
  MaskGrid g(w, h, 0.0);
  for (std::size_t r = r0; r < r0 + rows; ++r) {
    for (std::size_t c = c0; c < c0 + cols; ++c) g(r, c) = 1.0;
  }
  return g;
}

/// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::random_device rd;
    path_ = fs::temp_directory_path() / ("crossmask_" + tag + "_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

}  // namespace testing_support
