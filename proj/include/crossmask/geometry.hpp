#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "crossmask/error.hpp"

namespace crossmask {

/// Continuous image coordinates: x runs along columns, y along rows. Pixel
/// (row, col) covers [col, col+1) x [row, row+1) and its center sits at
/// (col + 0.5, row + 0.5).
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double distance(Point2 a, Point2 b) { return norm(b - a); }

inline Point2 unit(Point2 p) {
  const double n = norm(p);
  return {p.x / n, p.y / n};
}

inline Point2 unit_from_degrees(double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

struct Segment {
  Point2 a;
  Point2 b;

  double length() const { return distance(a, b); }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Hard floor on the crossing angle. Below it the arm frame is too close to
/// singular to rasterize reliably.
inline constexpr double kMinCrossingDegrees = 5.0;
/// Crossings shallower than this are accepted but reported as shallow.
inline constexpr double kShallowCrossingDegrees = 30.0;
/// Arms shorter than this cannot cover a pixel center.
inline constexpr double kMinArmLength = 0.5;

inline double sin_degrees(double degrees) { return std::sin(degrees * std::numbers::pi / 180.0); }

struct Intersection {
  Point2 point;
  double t1 = 0.0;
  double t2 = 0.0;
};

/// Intersection of two segments, solved exactly on the supporting lines and
/// then required to lie strictly inside both segments.
inline Intersection intersect(const Segment& s1, const Segment& s2) {
  const Point2 d1 = s1.b - s1.a;
  const Point2 d2 = s2.b - s2.a;
  const double len1 = norm(d1);
  const double len2 = norm(d2);
  if (!(len1 > 0.0) || !(len2 > 0.0)) {
    fail(ErrorKind::DegenerateSegment, "segment has zero length");
  }
  if (!std::isfinite(len1) || !std::isfinite(len2)) {
    fail(ErrorKind::NonFiniteInput, "segment endpoints must be finite");
  }
  const double det = cross(d1, d2);
  if (std::abs(det) / (len1 * len2) < sin_degrees(kMinCrossingDegrees)) {
    fail(ErrorKind::ParallelSegments, "segments cross at less than 5 degrees");
  }
  const Point2 w = s2.a - s1.a;
  const double t1 = cross(w, d2) / det;
  const double t2 = cross(w, d1) / det;
  if (!(t1 > 0.0 && t1 < 1.0 && t2 > 0.0 && t2 < 1.0)) {
    fail(ErrorKind::NoCrossing, "lines meet outside the segments (t1=" + std::to_string(t1) +
                                    ", t2=" + std::to_string(t2) + ")");
  }
  // Average of both parametrizations makes the point symmetric in (s1, s2).
  const Point2 p1 = s1.a + t1 * d1;
  const Point2 p2 = s2.a + t2 * d2;
  return {0.5 * (p1 + p2), t1, t2};
}

/// Two crossing segments AB and CD meeting at O.
///
/// The arm frame used for mask generation has its x axis along OD and its y
/// axis along OA; `direction` is the unit vector the y axis is finally
/// rotated onto (OA itself unless overridden).
struct CrossScribble {
  Segment seg_ab;
  Segment seg_cd;
  Point2 origin;
  double arm_oa = 0.0;
  double arm_ob = 0.0;
  double arm_oc = 0.0;
  double arm_od = 0.0;
  Point2 direction;
  std::optional<double> direction_deg;

  Point2 a() const { return seg_ab.a; }
  Point2 b() const { return seg_ab.b; }
  Point2 c() const { return seg_cd.a; }
  Point2 d() const { return seg_cd.b; }

  /// |sin| of the angle between the two segments.
  double sin_theta() const { return std::abs(cross(unit(seg_ab.b - seg_ab.a), unit(seg_cd.b - seg_cd.a))); }
  double crossing_degrees() const { return std::asin(std::min(1.0, sin_theta())) * 180.0 / std::numbers::pi; }
  bool shallow() const { return sin_theta() < sin_degrees(kShallowCrossingDegrees); }

  /// Area of the outer parallelogram spanned by the four arms.
  double parallelogram_area() const { return (arm_oa + arm_ob) * (arm_oc + arm_od) * sin_theta(); }
};

inline CrossScribble build_cross(const Segment& seg_ab, const Segment& seg_cd,
                                 std::optional<double> direction_override_deg = std::nullopt) {
  const Intersection hit = intersect(seg_ab, seg_cd);
  CrossScribble c;
  c.seg_ab = seg_ab;
  c.seg_cd = seg_cd;
  c.origin = hit.point;
  c.arm_oa = distance(c.origin, seg_ab.a);
  c.arm_ob = distance(c.origin, seg_ab.b);
  c.arm_oc = distance(c.origin, seg_cd.a);
  c.arm_od = distance(c.origin, seg_cd.b);
  for (double arm : {c.arm_oa, c.arm_ob, c.arm_oc, c.arm_od}) {
    if (arm < kMinArmLength) {
      fail(ErrorKind::DegenerateArm, "arm of length " + std::to_string(arm) + " px is below 0.5 px");
    }
  }
  if (direction_override_deg) {
    if (!std::isfinite(*direction_override_deg)) fail(ErrorKind::NonFiniteInput, "direction angle");
    c.direction = unit_from_degrees(*direction_override_deg);
    c.direction_deg = direction_override_deg;
  } else {
    c.direction = unit(seg_ab.a - c.origin);
  }
  return c;
}

/// Scales every arm by (1 - rate) about the crossing point.
inline CrossScribble shrink_cross(const CrossScribble& cross_in, double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    fail(ErrorKind::InvalidRate, "shrink rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (rate == 0.0) return cross_in;
  const double keep = 1.0 - rate;
  const Point2 o = cross_in.origin;
  auto pull = [&](Point2 p) { return o + keep * (p - o); };
  CrossScribble c = cross_in;
  c.seg_ab = {pull(cross_in.seg_ab.a), pull(cross_in.seg_ab.b)};
  c.seg_cd = {pull(cross_in.seg_cd.a), pull(cross_in.seg_cd.b)};
  c.arm_oa *= keep;
  c.arm_ob *= keep;
  c.arm_oc *= keep;
  c.arm_od *= keep;
  return c;
}

}  // namespace crossmask
