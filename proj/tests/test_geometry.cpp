#include <gtest/gtest.h>

#include "crossmask/geometry.hpp"
#include "support.hpp"

using namespace crossmask;
using testing_support::Rng;

namespace {

Point2 rotate(Point2 p, double rad) {
  return {std::cos(rad) * p.x - std::sin(rad) * p.y, std::sin(rad) * p.x + std::cos(rad) * p.y};
}

template <typename Fn>
void expect_error(ErrorKind kind, Fn fn) {
  try {
    fn();
    FAIL() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

/// Crossing point found without solving the 2x2 system: coarse parametric
/// sampling, then alternating projections between the two segments.
Point2 sampled_closest(const Segment& s1, const Segment& s2) {
  auto at = [](const Segment& s, double t) { return s.a + t * (s.b - s.a); };
  auto project = [&](Point2 p, const Segment& s) {
    const Point2 d = s.b - s.a;
    return at(s, std::clamp(dot(p - s.a, d) / dot(d, d), 0.0, 1.0));
  };
  constexpr int kSamples = 400;
  double best = 1e300;
  Point2 p = s1.a;
  for (int i = 0; i <= kSamples; ++i) {
    for (int j = 0; j <= kSamples; ++j) {
      const double d = distance(at(s1, double(i) / kSamples), at(s2, double(j) / kSamples));
      if (d < best) best = d, p = at(s1, double(i) / kSamples);
    }
  }
  for (int round = 0; round < 2000; ++round) p = project(project(p, s2), s1);
  EXPECT_LT(distance(p, project(p, s2)), 1e-9);
  return p;
}

}  // namespace

TEST(Intersect, PerpendicularSymmetricCross) {
  const auto hit = intersect({{-1, 0}, {1, 0}}, {{0, -1}, {0, 1}});
  EXPECT_NEAR(hit.point.x, 0.0, 1e-12);
  EXPECT_NEAR(hit.point.y, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(hit.t1, 0.5);
  EXPECT_DOUBLE_EQ(hit.t2, 0.5);
}

TEST(Intersect, ParallelSegmentsRejected) {
  expect_error(ErrorKind::ParallelSegments, [] { intersect({{0, 0}, {1, 0}}, {{0, 1}, {1, 1}}); });
}

TEST(Intersect, FourDegreesIsParallelSixIsNot) {
  const Segment base{{-10, 0}, {10, 0}};
  auto tilted = [](double deg) {
    const Point2 u = unit_from_degrees(deg);
    return Segment{-10.0 * u, 10.0 * u};
  };
  expect_error(ErrorKind::ParallelSegments, [&] { intersect(base, tilted(4.0)); });
  EXPECT_NO_THROW(intersect(base, tilted(6.0)));
}

TEST(Intersect, MissingCrossing) {
  expect_error(ErrorKind::NoCrossing, [] { intersect({{0, 0}, {1, 0}}, {{2, -1}, {2, 1}}); });
  // Touching at an endpoint is not a crossing.
  expect_error(ErrorKind::NoCrossing, [] { intersect({{0, 0}, {1, 0}}, {{1, -1}, {1, 1}}); });
}

TEST(Intersect, DegenerateSegment) {
  expect_error(ErrorKind::DegenerateSegment, [] { intersect({{0, 0}, {0, 0}}, {{0, -1}, {0, 1}}); });
}

TEST(Intersect, AgreesWithSamplingOracle) {
  Rng rng(11);
  for (int n = 0; n < 100; ++n) {
    const auto c = testing_support::random_cross(rng, {rng.uniform(-50, 50), rng.uniform(-50, 50)}, 1.0, 30.0, 20.0);
    const auto hit = intersect(c.seg_ab, c.seg_cd);
    const Point2 oracle = sampled_closest(c.seg_ab, c.seg_cd);
    EXPECT_LT(distance(hit.point, oracle), 1e-6);
    const Point2 on1 = c.seg_ab.a + hit.t1 * (c.seg_ab.b - c.seg_ab.a);
    const Point2 on2 = c.seg_cd.a + hit.t2 * (c.seg_cd.b - c.seg_cd.a);
    EXPECT_LT(distance(on1, on2), 1e-9);
  }
}

TEST(Intersect, SymmetricInArguments) {
  Rng rng(12);
  for (int n = 0; n < 200; ++n) {
    const auto c = testing_support::random_cross(rng, {rng.uniform(0, 500), rng.uniform(0, 500)}, 0.6, 200.0, 6.0);
    const auto a = intersect(c.seg_ab, c.seg_cd).point;
    const auto b = intersect(c.seg_cd, c.seg_ab).point;
    EXPECT_NEAR(a.x, b.x, 1e-9);
    EXPECT_NEAR(a.y, b.y, 1e-9);
  }
}

TEST(BuildCross, AxisAlignedArms) {
  const auto c = build_cross({{0, 2}, {0, -1}}, {{-1, 0}, {3, 0}});
  EXPECT_DOUBLE_EQ(c.arm_oa, 2.0);
  EXPECT_DOUBLE_EQ(c.arm_ob, 1.0);
  EXPECT_DOUBLE_EQ(c.arm_oc, 1.0);
  EXPECT_DOUBLE_EQ(c.arm_od, 3.0);
  EXPECT_NEAR(c.direction.x, 0.0, 1e-15);
  EXPECT_NEAR(c.direction.y, 1.0, 1e-15);
  EXPECT_FALSE(c.shallow());
  EXPECT_NEAR(c.crossing_degrees(), 90.0, 1e-9);
}

TEST(BuildCross, IdentityDirectionOverride) {
  const auto c = build_cross({{0, 2}, {0, -1}}, {{-1, 0}, {3, 0}}, 90.0);
  EXPECT_NEAR(c.direction.x, 0.0, 1e-15);
  EXPECT_NEAR(c.direction.y, 1.0, 1e-15);
  ASSERT_TRUE(c.direction_deg.has_value());
  EXPECT_EQ(*c.direction_deg, 90.0);
}

TEST(BuildCross, DegenerateArm) {
  expect_error(ErrorKind::DegenerateArm, [] { build_cross({{0, 0.3}, {0, -5}}, {{-5, 0}, {5, 0}}); });
}

TEST(BuildCross, ShallowCrossingFlagged) {
  const Point2 u = unit_from_degrees(20.0);
  const auto c = build_cross({{-10, 0}, {10, 0}}, {-10.0 * u, 10.0 * u});
  EXPECT_TRUE(c.shallow());
  EXPECT_NEAR(c.crossing_degrees(), 20.0, 1e-9);
}

TEST(BuildCross, InvariantUnderRotationAndTranslation) {
  Rng rng(13);
  for (int n = 0; n < 200; ++n) {
    const auto c = testing_support::random_cross(rng, {rng.uniform(-100, 100), rng.uniform(-100, 100)}, 1.0, 80.0, 10.0);
    const double rad = rng.uniform(0, 2 * std::numbers::pi);
    const Point2 shift{rng.uniform(-300, 300), rng.uniform(-300, 300)};
    auto move = [&](Point2 p) { return rotate(p, rad) + shift; };
    const auto r = build_cross({move(c.a()), move(c.b())}, {move(c.c()), move(c.d())});
    EXPECT_NEAR(r.arm_oa, c.arm_oa, 1e-9);
    EXPECT_NEAR(r.arm_ob, c.arm_ob, 1e-9);
    EXPECT_NEAR(r.arm_oc, c.arm_oc, 1e-9);
    EXPECT_NEAR(r.arm_od, c.arm_od, 1e-9);
    EXPECT_NEAR(r.crossing_degrees(), c.crossing_degrees(), 1e-9);
  }
}

TEST(ShrinkCross, ZeroRateIsIdentity) {
  const auto c = build_cross({{0, 2}, {0, -1}}, {{-1, 0}, {3, 0}});
  const auto s = shrink_cross(c, 0.0);
  EXPECT_EQ(s.seg_ab, c.seg_ab);
  EXPECT_EQ(s.seg_cd, c.seg_cd);
  EXPECT_EQ(s.arm_oa, c.arm_oa);
}

TEST(ShrinkCross, HalvesArms) {
  const auto s = shrink_cross(build_cross({{0, 2}, {0, -1}}, {{-1, 0}, {3, 0}}), 0.5);
  EXPECT_DOUBLE_EQ(s.arm_oa, 1.0);
  EXPECT_DOUBLE_EQ(s.arm_ob, 0.5);
  EXPECT_DOUBLE_EQ(s.arm_oc, 0.5);
  EXPECT_DOUBLE_EQ(s.arm_od, 1.5);
  EXPECT_EQ(s.origin, Point2(0, 0));
  EXPECT_NEAR(s.direction.y, 1.0, 1e-15);
  // Endpoints moved consistently with the arms.
  EXPECT_NEAR(distance(s.origin, s.a()), s.arm_oa, 1e-12);
  EXPECT_NEAR(distance(s.origin, s.d()), s.arm_od, 1e-12);
}

TEST(ShrinkCross, InvalidRates) {
  const auto c = build_cross({{0, 2}, {0, -1}}, {{-1, 0}, {3, 0}});
  for (double r : {-0.1, 1.0, 1.5, std::nan("")}) {
    expect_error(ErrorKind::InvalidRate, [&] { shrink_cross(c, r); });
  }
}

TEST(ShrinkCross, ComposesMultiplicatively) {
  Rng rng(14);
  for (int n = 0; n < 200; ++n) {
    const auto c = testing_support::random_cross(rng, {50, 50}, 5.0, 40.0);
    const double r1 = rng.uniform(0, 0.9), r2 = rng.uniform(0, 0.9);
    const auto twice = shrink_cross(shrink_cross(c, r1), r2);
    const auto once = shrink_cross(c, 1.0 - (1.0 - r1) * (1.0 - r2));
    EXPECT_NEAR(twice.arm_oa, once.arm_oa, 1e-9);
    EXPECT_NEAR(twice.arm_ob, once.arm_ob, 1e-9);
    EXPECT_NEAR(twice.arm_oc, once.arm_oc, 1e-9);
    EXPECT_NEAR(twice.arm_od, once.arm_od, 1e-9);
  }
}

TEST(CrossScribble, ParallelogramArea) {
  const auto c = build_cross({{0, 2}, {0, -1}}, {{-1, 0}, {3, 0}});
  EXPECT_DOUBLE_EQ(c.parallelogram_area(), 3.0 * 4.0);
}
