#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossmask/grid.hpp"

namespace crossmask {

/// Relative-size cut points between the small/medium/large branches.
struct BranchThresholds {
  double thr1 = 0.0;
  double thr2 = 0.0;

  BranchThresholds() = default;
  BranchThresholds(double t1, double t2) : thr1(t1), thr2(t2) {
    if (!(0.0 < t1 && t1 < t2 && t2 < 1.0)) {
      fail(ErrorKind::InvalidArgument, "thresholds must satisfy 0 < thr1 < thr2 < 1");
    }
  }
  friend bool operator==(const BranchThresholds&, const BranchThresholds&) = default;
};

/// Thresholds the polyp experiments were run with.
inline const BranchThresholds kPolypThresholds{0.078, 0.177};

struct SizeAwareConfig {
  double coe = 10.0;
  int n_branches = 3;

  void validate() const {
    if (!(coe >= 1.0) || !std::isfinite(coe)) fail(ErrorKind::InvalidArgument, "coe must be >= 1");
    if (n_branches < 1) fail(ErrorKind::InvalidArgument, "n_branches must be >= 1");
  }
};

/// Fraction of pixels with positive weight (N_p / N).
template <typename T>
double relative_size(const Grid<T>& mask) {
  if (mask.empty()) return 0.0;
  return static_cast<double>(count_positive(mask)) / static_cast<double>(mask.size());
}

/// 1-based branch index: small targets go to branch 1, large to branch 3.
inline int select_branch(double r_z, const BranchThresholds& thr) {
  if (r_z <= thr.thr1) return 1;
  if (r_z <= thr.thr2) return 2;
  return 3;
}

/// Tertile cut points of the non-zero relative sizes. With m sorted values,
/// thr1 is the floor(m/3)-th and thr2 the floor(2m/3)-th (1-based), so the
/// three branches receive populations that differ by at most one.
inline BranchThresholds calibrate_thresholds(std::vector<double> sizes) {
  std::erase_if(sizes, [](double v) { return !(v > 0.0); });
  const std::set<double> distinct(sizes.begin(), sizes.end());
  if (distinct.size() < 3) {
    fail(ErrorKind::InsufficientData, "need at least 3 distinct non-zero sizes, got " +
                                          std::to_string(distinct.size()));
  }
  std::sort(sizes.begin(), sizes.end());
  const std::size_t m = sizes.size();
  const double t1 = sizes[m / 3 - 1];
  const double t2 = sizes[2 * m / 3 - 1];
  if (!(t1 < t2) || !(t2 < 1.0)) {
    fail(ErrorKind::InsufficientData, "tertile boundaries are not distinct (" + std::to_string(t1) +
                                          ", " + std::to_string(t2) + ")");
  }
  return {t1, t2};
}

/// alpha = min(1 / r_z, coe); an empty mask (r_z = 0) clamps to coe.
inline double coefficient_alpha(double r_z, double coe) {
  if (r_z < 0.0) fail(ErrorKind::InvalidArgument, "relative size must be >= 0");
  if (r_z == 0.0) return coe;
  return std::min(1.0 / r_z, coe);
}

/// (alpha - 1) on the pseudo-mask support, zero elsewhere.
inline MaskGrid coefficient_mask(const MaskGrid& pseudo, double alpha) {
  if (!(alpha >= 1.0)) fail(ErrorKind::InvalidArgument, "alpha must be >= 1");
  MaskGrid out(pseudo.width(), pseudo.height(), 0.0);
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    if (pseudo[i] > 0.0) out[i] = alpha - 1.0;
  }
  return out;
}

/// sum(L' * M^c) / N.
inline double size_aware_loss(const MaskGrid& loss_grid, const MaskGrid& coeff) {
  require_same_shape(loss_grid, coeff, "size_aware_loss");
  if (loss_grid.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < loss_grid.size(); ++i) sum += loss_grid[i] * coeff[i];
  return sum / static_cast<double>(loss_grid.size());
}

inline double segmentation_total_loss(double l_sa, double l1, double l2, double l3) {
  for (double v : {l_sa, l1, l2, l3}) {
    if (!std::isfinite(v) || v < 0.0) fail(ErrorKind::NonFiniteLoss, "loss terms must be finite and >= 0");
  }
  return l_sa + l1 + l2 + l3;
}

/// Per-category thresholds, serialized as {"<id>": {"thr1": .., "thr2": ..}}.
using ThresholdTable = std::map<int, BranchThresholds>;

inline nlohmann::json thresholds_to_json(const ThresholdTable& table) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [cat, thr] : table) j[std::to_string(cat)] = {{"thr1", thr.thr1}, {"thr2", thr.thr2}};
  return j;
}

inline ThresholdTable thresholds_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::SchemaError, "thresholds document must be an object");
  ThresholdTable table;
  for (const auto& [key, value] : j.items()) {
    int cat = 0;
    try {
      cat = std::stoi(key);
    } catch (const std::logic_error&) {
      fail(ErrorKind::SchemaError, "threshold key '" + key + "' is not a category id");
    }
    if (!value.is_object() || !value.contains("thr1") || !value.contains("thr2") ||
        !value["thr1"].is_number() || !value["thr2"].is_number()) {
      fail(ErrorKind::SchemaError, "category " + key + " needs numeric thr1 and thr2");
    }
    table[cat] = BranchThresholds(value["thr1"].get<double>(), value["thr2"].get<double>());
  }
  return table;
}

}  // namespace crossmask
