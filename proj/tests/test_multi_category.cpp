#include <algorithm>

#include <gtest/gtest.h>

#include "crossmask/multi_category.hpp"
#include "crossmask/pseudo_mask.hpp"
#include "support.hpp"

using namespace crossmask;
using testing_support::block;
using testing_support::Rng;

namespace {

CategoryMask cat(int id, MaskGrid m) { return {CategoryId(id), std::move(m)}; }

/// Random scenario: 2-4 categories, each a rasterized cross or a subset of
/// an earlier one.
std::vector<CategoryMask> random_scenario(Rng& rng, std::size_t size) {
  const int n = rng.integer(2, 4);
  std::vector<int> ids{1, 2, 3, 4, 5, 6};
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  std::vector<CategoryMask> out;
  for (int k = 0; k < n; ++k) {
    if (k > 0 && rng.coin(0.3)) {
      // Random subset of an earlier mask, so it nests inside it.
      const MaskGrid& host = out[rng.integer(0, k - 1)].mask;
      MaskGrid m(size, size, 0.0);
      for (std::size_t i = 0; i < host.size(); ++i) m[i] = host[i] > 0 && rng.coin(0.4) ? 1.0 : 0.0;
      if (count_positive(m) == 0) m = host;
      out.push_back(cat(ids[k], std::move(m)));
    } else {
      const Point2 c{rng.uniform(10, size - 10.0), rng.uniform(10, size - 10.0)};
      const auto cross = testing_support::random_cross(rng, c, 3.0, size / 3.0, 20.0);
      out.push_back(cat(ids[k], rasterize_pseudo_mask(cross, SigmaSpec::infinite(), MaskOp::Multiply, size, size)));
    }
  }
  return out;
}

}  // namespace

TEST(Containment, Basics) {
  const MaskGrid small = block(8, 8, 2, 2, 2, 2), big = block(8, 8, 1, 1, 4, 4);
  EXPECT_TRUE(containment(small, small));
  EXPECT_TRUE(containment(small, big));
  EXPECT_FALSE(containment(big, small));
  EXPECT_THROW(containment(small, MaskGrid(7, 8)), Error);
}

TEST(Containment, MatchesBruteForceSubset) {
  Rng rng(31);
  for (int n = 0; n < 500; ++n) {
    const std::size_t w = rng.integer(1, 6), h = rng.integer(1, 6);
    const MaskGrid a = testing_support::random_binary(rng, w, h, rng.uniform(0, 0.5));
    MaskGrid b = testing_support::random_binary(rng, w, h, rng.uniform(0.3, 1.0));
    if (rng.coin()) {
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::max(b[i], a[i]);
    }
    bool subset = true;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) subset = subset && (!(a(r, c) > 0) || b(r, c) > 0);
    }
    EXPECT_EQ(containment(a, b), subset);
  }
}

TEST(Combine, InnerCategoryWinsRingCase) {
  const auto labels = combine_pseudo_masks({cat(2, block(16, 16, 2, 2, 10, 10)), cat(3, block(16, 16, 5, 5, 4, 4))});
  for (std::size_t r = 0; r < 16; ++r) {
    for (std::size_t c = 0; c < 16; ++c) {
      const bool inner = r >= 5 && r < 9 && c >= 5 && c < 9;
      const bool outer = r >= 2 && r < 12 && c >= 2 && c < 12;
      EXPECT_EQ(labels(r, c), inner ? 3 : outer ? 2 : 0);
    }
  }
}

TEST(Combine, LargerCategoryWinsOverlap) {
  // Cat 1: 50 px (5x10), cat 2: 20 px (4x5); they overlap on 5 px.
  const MaskGrid a = block(20, 20, 0, 0, 5, 10);
  const MaskGrid b = block(20, 20, 4, 5, 4, 5);
  const auto labels = combine_pseudo_masks({cat(2, b), cat(1, a)});
  std::size_t overlap = 0, as_one = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (a[i] > 0 && b[i] > 0) {
      ++overlap;
      as_one += labels[i] == 1 ? 1 : 0;
    }
  }
  EXPECT_EQ(overlap, 5u);
  EXPECT_EQ(as_one, 5u);
}

TEST(Combine, EqualAreasTieToLowerId) {
  const auto labels = combine_pseudo_masks({cat(5, block(10, 10, 0, 0, 4, 4)), cat(3, block(10, 10, 2, 2, 4, 4))});
  EXPECT_EQ(labels(3, 3), 3);
}

TEST(Combine, DisjointIsUnion) {
  const MaskGrid a = block(10, 10, 0, 0, 3, 3), b = block(10, 10, 6, 6, 3, 3);
  const auto labels = combine_pseudo_masks({cat(1, a), cat(2, b)});
  for (std::size_t i = 0; i < labels.size(); ++i) EXPECT_EQ(labels[i], a[i] > 0 ? 1 : b[i] > 0 ? 2 : 0);
}

TEST(Combine, Errors) {
  EXPECT_THROW(combine_pseudo_masks({}), Error);
  try {
    combine_pseudo_masks({cat(1, MaskGrid(4, 4)), cat(1, MaskGrid(4, 4))});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DuplicateCategory);
  }
  try {
    combine_pseudo_masks({cat(1, MaskGrid(4, 4)), cat(2, MaskGrid(5, 4))});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
  EXPECT_THROW(CategoryId(0), Error);
  EXPECT_THROW(CategoryId(256), Error);
}

TEST(Combine, ThreeWayOverlapFoldsPairwiseRule) {
  // 3 is inside 2 and straddles the corner of 1; 1 is the largest.
  const MaskGrid m1 = block(20, 20, 0, 0, 12, 12);
  const MaskGrid m2 = block(20, 20, 6, 6, 10, 10);
  const MaskGrid m3 = block(20, 20, 10, 10, 4, 4);
  const auto labels = combine_pseudo_masks({cat(3, m3), cat(1, m1), cat(2, m2)});
  // In all three: 1 beats 2 on area, and 3 is not nested in 1 so 1 keeps it.
  EXPECT_EQ(labels(10, 10), 1);
  // In 2 and 3 only: 3 is the inner one.
  EXPECT_EQ(labels(12, 12), 3);
  // In 1 and 2 only.
  EXPECT_EQ(labels(7, 7), 1);
  EXPECT_EQ(labels(14, 15), 2);
}

TEST(Combine, RandomScenariosHaveNoOverlapAndKeepUnion) {
  Rng rng(32);
  for (int n = 0; n < 200; ++n) {
    auto masks = random_scenario(rng, 48);
    const LabelMap labels = combine_pseudo_masks(masks);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      bool any = false, owner_claims = false;
      for (const auto& m : masks) {
        any = any || m.mask[i] > 0;
        if (m.category.value == labels[i]) owner_claims = m.mask[i] > 0;
      }
      ASSERT_EQ(labels[i] != 0, any);
      if (labels[i] != 0) {
        ASSERT_TRUE(owner_claims);
      }
    }
    std::shuffle(masks.begin(), masks.end(), rng.engine());
    ASSERT_EQ(combine_pseudo_masks(masks), labels) << "order dependence in scenario " << n;
  }
}

TEST(Combine, NestedPairsAlwaysGoInner) {
  Rng rng(33);
  for (int n = 0; n < 100; ++n) {
    const auto outer_cross = testing_support::random_cross(rng, {32, 32}, 8.0, 20.0);
    const MaskGrid outer = rasterize_pseudo_mask(outer_cross, SigmaSpec::infinite(), MaskOp::Multiply, 64, 64);
    const MaskGrid inner =
        rasterize_pseudo_mask(shrink_cross(outer_cross, 0.5), SigmaSpec::infinite(), MaskOp::Multiply, 64, 64);
    ASSERT_TRUE(containment(inner, outer));
    const int a = rng.integer(1, 100), b = a + rng.integer(1, 100);
    const auto labels = combine_pseudo_masks({cat(a, outer), cat(b, inner)});
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (inner[i] > 0) {
        ASSERT_EQ(labels[i], b);
      }
    }
  }
}
