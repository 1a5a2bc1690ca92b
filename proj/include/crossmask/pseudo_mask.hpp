#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "crossmask/geometry.hpp"
#include "crossmask/grid.hpp"

namespace crossmask {

/// How the two per-axis Gaussian factors combine into one weight.
enum class MaskOp { Multiply, Add, Max };

inline std::string_view to_string(MaskOp op) {
  switch (op) {
    case MaskOp::Multiply: return "mul";
    case MaskOp::Add: return "add";
    case MaskOp::Max: return "max";
  }
  return "mul";
}

inline MaskOp parse_mask_op(std::string_view s) {
  if (s == "mul" || s == "multiply") return MaskOp::Multiply;
  if (s == "add" || s == "addition") return MaskOp::Add;
  if (s == "max" || s == "maximum") return MaskOp::Max;
  fail(ErrorKind::InvalidArgument, "unknown mask operator '" + std::string(s) + "'");
}

/// sigma/arm-length ratio. Each arm gets sigma = ratio * arm length; an
/// infinite ratio yields a flat (binary) mask.
class SigmaSpec {
 public:
  explicit SigmaSpec(double ratio) : ratio_(ratio) {
    if (!(ratio > 0.0)) fail(ErrorKind::InvalidArgument, "sigma ratio must be positive");
  }
  static SigmaSpec infinite() { return SigmaSpec(std::numeric_limits<double>::infinity()); }

  static SigmaSpec parse(std::string_view s) {
    if (s == "inf" || s == "Infinity" || s == "infinity") return infinite();
    try {
      return SigmaSpec(std::stod(std::string(s)));
    } catch (const std::logic_error&) {
      fail(ErrorKind::InvalidArgument, "invalid sigma ratio '" + std::string(s) + "'");
    }
  }

  double ratio() const noexcept { return ratio_; }
  bool is_infinite() const noexcept { return std::isinf(ratio_); }
  double for_arm(double arm_length) const { return ratio_ * arm_length; }

 private:
  double ratio_;
};

namespace detail {
inline double gaussian_term(double v, double sigma) {
  if (std::isinf(sigma)) return 1.0;
  return std::exp(-(v * v) / (sigma * sigma));
}
}  // namespace detail

/// Weight of arm-frame position (x, y).
inline double initial_weight(double x, double y, double sigma_x, double sigma_y, MaskOp op) {
  const double gx = detail::gaussian_term(x, sigma_x);
  const double gy = detail::gaussian_term(y, sigma_y);
  switch (op) {
    case MaskOp::Multiply: {
      if (std::isinf(sigma_x) && std::isinf(sigma_y)) return 1.0;
      const double sx = std::isinf(sigma_x) ? 0.0 : x * x / (sigma_x * sigma_x);
      const double sy = std::isinf(sigma_y) ? 0.0 : y * y / (sigma_y * sigma_y);
      return std::exp(-(sx + sy));
    }
    case MaskOp::Add: return 0.5 * (gx + gy);
    case MaskOp::Max: return std::max(gx, gy);
  }
  return 0.0;
}

/// Maps image points into the (possibly skewed) arm frame of a cross.
class ArmFrame {
 public:
  explicit ArmFrame(const CrossScribble& c) : origin_(c.origin) {
    x_axis_ = unit(c.d() - c.origin);
    y_axis_ = unit(c.a() - c.origin);
    if (c.direction_deg) {
      // Rotate the whole frame so the y axis lands on the target direction.
      const double phi = std::atan2(cross(y_axis_, c.direction), dot(y_axis_, c.direction));
      const double cs = std::cos(phi), sn = std::sin(phi);
      x_axis_ = {cs * x_axis_.x - sn * x_axis_.y, sn * x_axis_.x + cs * x_axis_.y};
      y_axis_ = c.direction;
    }
    det_ = cross(x_axis_, y_axis_);
  }

  Point2 to_arm(Point2 p) const {
    const Point2 q = p - origin_;
    return {cross(q, y_axis_) / det_, cross(x_axis_, q) / det_};
  }
  Point2 to_image(Point2 arm) const { return origin_ + arm.x * x_axis_ + arm.y * y_axis_; }

  Point2 x_axis() const { return x_axis_; }
  Point2 y_axis() const { return y_axis_; }

 private:
  Point2 origin_;
  Point2 x_axis_;
  Point2 y_axis_;
  double det_ = 1.0;
};

/// Membership slack, in pixels, for pixel centers on the parallelogram edge.
inline constexpr double kEdgeTolerance = 1e-9;

/// Renders the pseudo mask of a cross: the outer parallelogram of the four
/// arms, weighted by `op` with per-quadrant sigmas. Pixels outside the
/// parallelogram (or the image) are zero.
inline MaskGrid rasterize_pseudo_mask(const CrossScribble& c, const SigmaSpec& sigma, MaskOp op,
                                      std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) fail(ErrorKind::InvalidArgument, "mask dimensions must be >= 1");
  MaskGrid mask(width, height, 0.0);
  const ArmFrame frame(c);

  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  for (double ax : {-c.arm_oc, c.arm_od}) {
    for (double ay : {-c.arm_ob, c.arm_oa}) {
      const Point2 p = frame.to_image({ax, ay});
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  }
  auto clamp_index = [](double v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n)));
  };
  const std::size_t col0 = clamp_index(std::floor(min_x - 0.5), width);
  const std::size_t col1 = clamp_index(std::ceil(max_x + 0.5), width);
  const std::size_t row0 = clamp_index(std::floor(min_y - 0.5), height);
  const std::size_t row1 = clamp_index(std::ceil(max_y + 0.5), height);

  const double sx_pos = sigma.for_arm(c.arm_od), sx_neg = sigma.for_arm(c.arm_oc);
  const double sy_pos = sigma.for_arm(c.arm_oa), sy_neg = sigma.for_arm(c.arm_ob);

  for (std::size_t row = row0; row < row1; ++row) {
    for (std::size_t col = col0; col < col1; ++col) {
      const Point2 arm = frame.to_arm({static_cast<double>(col) + 0.5, static_cast<double>(row) + 0.5});
      if (arm.x < -c.arm_oc - kEdgeTolerance || arm.x > c.arm_od + kEdgeTolerance) continue;
      if (arm.y < -c.arm_ob - kEdgeTolerance || arm.y > c.arm_oa + kEdgeTolerance) continue;
      const double sx = arm.x >= 0.0 ? sx_pos : sx_neg;
      const double sy = arm.y >= 0.0 ? sy_pos : sy_neg;
      mask(row, col) = initial_weight(arm.x, arm.y, sx, sy, op);
    }
  }
  return mask;
}

struct RelativeErrors {
  double e_p = 0.0;  ///< share of pseudo-positive pixels that are negative in the full mask
  double e_n = 0.0;  ///< share of pseudo-negative pixels that are positive in the full mask
};

/// Relative positive/negative errors of a pseudo mask (binarized at > 0)
/// against a full ground-truth mask. e_p is reported as a magnitude.
inline RelativeErrors relative_errors(const MaskGrid& pseudo, const MaskGrid& gt_full) {
  require_same_shape(pseudo, gt_full, "relative_errors");
  double pos_num = 0.0, pos_den = 0.0, neg_num = 0.0, neg_den = 0.0;
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    const double m = pseudo[i] > 0.0 ? 1.0 : 0.0;
    const double f = gt_full[i] > 0.0 ? 1.0 : 0.0;
    pos_num += (f - m) * m;
    pos_den += m;
    neg_num += (f - m) * (1.0 - m);
    neg_den += 1.0 - m;
  }
  if (pos_den == 0.0) fail(ErrorKind::EmptyMask, "pseudo mask has no positive pixels");
  if (neg_den == 0.0) fail(ErrorKind::EmptyMask, "pseudo mask has no negative pixels");
  return {std::abs(pos_num / pos_den), neg_num / neg_den};
}

}  // namespace crossmask
