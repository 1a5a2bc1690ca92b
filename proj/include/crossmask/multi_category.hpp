#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "crossmask/grid.hpp"

namespace crossmask {

/// Foreground category id. 0 is reserved for background.
struct CategoryId {
  int value = 1;

  explicit CategoryId(int v) : value(v) {
    if (v < 1 || v > 255) fail(ErrorKind::InvalidArgument, "category id must be in [1, 255]");
  }
  friend auto operator<=>(const CategoryId&, const CategoryId&) = default;
};

struct CategoryMask {
  CategoryId category;
  MaskGrid mask;
};

/// True iff every positive pixel of `inner` is also positive in `outer`.
inline bool containment(const MaskGrid& inner, const MaskGrid& outer) {
  require_same_shape(inner, outer, "containment");
  for (std::size_t i = 0; i < inner.size(); ++i) {
    if (inner[i] > 0.0 && !(outer[i] > 0.0)) return false;
  }
  return true;
}

/// Merges per-category pseudo masks into one label map with no overlap.
///
/// Overlap between two categories goes to the enclosed one when one
/// positive set contains the other, and otherwise to the larger one (ties to
/// the lower id). Pixels claimed by three or more categories are resolved by
/// folding that pairwise rule over the claimants in descending area order.
inline LabelMap combine_pseudo_masks(const std::vector<CategoryMask>& masks) {
  if (masks.empty()) fail(ErrorKind::EmptyList, "no masks to combine");
  const std::size_t width = masks.front().mask.width();
  const std::size_t height = masks.front().mask.height();
  std::set<int> seen;
  for (const auto& m : masks) {
    require_same_shape(masks.front().mask, m.mask, "combine_pseudo_masks");
    if (!seen.insert(m.category.value).second) {
      fail(ErrorKind::DuplicateCategory, "category " + std::to_string(m.category.value) + " repeated");
    }
  }

  // Canonical order: descending area, then ascending id. Makes the result
  // independent of the input order.
  std::vector<std::size_t> order(masks.size());
  std::vector<std::size_t> area(masks.size());
  for (std::size_t k = 0; k < masks.size(); ++k) {
    order[k] = k;
    area[k] = count_positive(masks[k].mask);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (area[a] != area[b]) return area[a] > area[b];
    return masks[a].category < masks[b].category;
  });

  const std::size_t n = masks.size();
  std::vector<std::uint8_t> inside(n * n, 0);  // inside[a*n+b]: a's support within b's
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b) inside[a * n + b] = containment(masks[a].mask, masks[b].mask) ? 1 : 0;
    }
  }
  auto beats = [&](std::size_t a, std::size_t b) {
    const bool a_in_b = inside[a * n + b] != 0;
    const bool b_in_a = inside[b * n + a] != 0;
    if (a_in_b != b_in_a) return a_in_b;
    if (area[a] != area[b]) return area[a] > area[b];
    return masks[a].category < masks[b].category;
  };

  LabelMap labels(width, height, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool any = false;
    std::size_t winner = 0;
    for (std::size_t k : order) {
      if (!(masks[k].mask[i] > 0.0)) continue;
      if (!any || beats(k, winner)) winner = k;
      any = true;
    }
    if (any) labels[i] = static_cast<std::uint8_t>(masks[winner].category.value);
  }
  return labels;
}

}  // namespace crossmask
