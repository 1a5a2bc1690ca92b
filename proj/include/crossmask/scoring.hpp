#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossmask/grid.hpp"

namespace crossmask {

/// Per-pixel branch scores, one grid per channel.
struct ScoreMap {
  std::vector<MaskGrid> channels;
  bool normalized = false;

  std::size_t n_channels() const { return channels.size(); }
  std::size_t width() const { return channels.empty() ? 0 : channels.front().width(); }
  std::size_t height() const { return channels.empty() ? 0 : channels.front().height(); }
  std::size_t pixels() const { return channels.empty() ? 0 : channels.front().size(); }
};

/// Confidence scores (one per branch).
using ScoreVector = std::vector<double>;

/// One-hot target over branches.
struct GtScore {
  std::vector<double> s_g;
  int index() const {
    return static_cast<int>(std::max_element(s_g.begin(), s_g.end()) - s_g.begin()) + 1;
  }
};

namespace detail {
inline void check_score_map(const ScoreMap& map) {
  if (map.channels.empty()) fail(ErrorKind::ShapeMismatch, "score map has no channels");
  for (const auto& ch : map.channels) require_same_shape(map.channels.front(), ch, "score map");
}

inline void softmax_block(ScoreMap& map, std::size_t first, std::size_t count) {
  for (std::size_t i = 0; i < map.pixels(); ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t c = first; c < first + count; ++c) {
      const double v = map.channels[c][i];
      if (!std::isfinite(v)) fail(ErrorKind::NonFiniteInput, "score map contains a non-finite value");
      hi = std::max(hi, v);
    }
    double sum = 0.0;
    for (std::size_t c = first; c < first + count; ++c) {
      map.channels[c][i] = std::exp(map.channels[c][i] - hi);
      sum += map.channels[c][i];
    }
    for (std::size_t c = first; c < first + count; ++c) map.channels[c][i] /= sum;
  }
}
}  // namespace detail

/// Softmax over channels at every pixel.
inline ScoreMap normalize_scores(ScoreMap raw) {
  detail::check_score_map(raw);
  detail::softmax_block(raw, 0, raw.n_channels());
  raw.normalized = true;
  return raw;
}

/// Channel-wise weighted average: s_i = sum(S'_i * M) / N_p.
inline ScoreVector channel_weighted_average(const ScoreMap& scores, const MaskGrid& pseudo) {
  detail::check_score_map(scores);
  if (!scores.normalized) fail(ErrorKind::InvalidArgument, "CWA expects a normalized score map");
  require_same_shape(scores.channels.front(), pseudo, "channel_weighted_average");
  const std::size_t n_p = count_positive(pseudo);
  if (n_p == 0) fail(ErrorKind::EmptyPseudoMask, "pseudo mask has no positive pixels");
  ScoreVector s(scores.n_channels(), 0.0);
  for (std::size_t c = 0; c < s.size(); ++c) {
    const MaskGrid& ch = scores.channels[c];
    double sum = 0.0;
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
      if (pseudo[i] > 0.0) sum += ch[i] * pseudo[i];
    }
    s[c] = sum / static_cast<double>(n_p);
  }
  return s;
}

inline GtScore one_hot(int index, std::size_t n) {
  if (index < 1 || static_cast<std::size_t>(index) > n) fail(ErrorKind::InvalidArgument, "branch index out of range");
  GtScore g{std::vector<double>(n, 0.0)};
  g.s_g[static_cast<std::size_t>(index - 1)] = 1.0;
  return g;
}

/// Target marking the branch with the lowest loss (ties to the lowest index).
inline GtScore gt_score(std::span<const double> losses) {
  if (losses.empty()) fail(ErrorKind::InvalidArgument, "no branch losses");
  std::size_t best = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(losses[i])) fail(ErrorKind::NonFiniteLoss, "branch loss is not finite");
    if (losses[i] < losses[best]) best = i;
  }
  return one_hot(static_cast<int>(best) + 1, losses.size());
}

/// How the stage-2 target is produced.
enum class GtScoreMode {
  MinLoss,  ///< branch with the lowest loss
  Match,    ///< branch picked by the size rule
};

inline constexpr double kScoreClamp = 1e-7;

/// Cross entropy -sum(s_g * log s) of an already normalized score vector.
inline double score_loss(const GtScore& target, std::span<const double> s) {
  if (target.s_g.size() != s.size()) fail(ErrorKind::ShapeMismatch, "score vector length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (target.s_g[i] != 0.0) loss -= target.s_g[i] * std::log(std::max(s[i], kScoreClamp));
  }
  return loss;
}

/// 1-based arg-max; ties to the lowest index.
inline int infer_branch(std::span<const double> s) {
  if (s.empty()) fail(ErrorKind::InvalidArgument, "empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] > s[best]) best = i;
  }
  return static_cast<int>(best) + 1;
}

/// Scores for every foreground category. columns[c - 1] belongs to category
/// c and is empty when that category has no pixels in the label map.
struct ScoreMatrix {
  std::size_t n_branches = 0;
  std::vector<std::optional<ScoreVector>> columns;
};

/// Multi-category CWA. Channel c * n_branches + b holds the score of branch
/// b for category c; each category's block is softmax-normalized unless the
/// map is already flagged normalized. The background block is skipped.
inline ScoreMatrix multiclass_score_matrix(const ScoreMap& scores, const LabelMap& combined,
                                           std::size_t n_branches) {
  detail::check_score_map(scores);
  if (n_branches == 0 || scores.n_channels() % n_branches != 0 || scores.n_channels() / n_branches < 2) {
    fail(ErrorKind::ShapeMismatch, "channel count must be n_branches x n_categories (n_categories >= 2)");
  }
  require_same_shape(scores.channels.front(), combined, "multiclass_score_matrix");
  const std::size_t n_c = scores.n_channels() / n_branches;
  ScoreMap norm = scores;
  if (!norm.normalized) {
    for (std::size_t c = 0; c < n_c; ++c) detail::softmax_block(norm, c * n_branches, n_branches);
    norm.normalized = true;
  }
  ScoreMatrix out{n_branches, std::vector<std::optional<ScoreVector>>(n_c - 1)};
  for (std::size_t c = 1; c < n_c; ++c) {
    MaskGrid support(combined.width(), combined.height(), 0.0);
    for (std::size_t i = 0; i < combined.size(); ++i) support[i] = combined[i] == c ? 1.0 : 0.0;
    if (count_positive(support) == 0) continue;
    ScoreMap block;
    block.normalized = true;
    for (std::size_t b = 0; b < n_branches; ++b) block.channels.push_back(norm.channels[c * n_branches + b]);
    out.columns[c - 1] = channel_weighted_average(block, support);
  }
  return out;
}

struct ScoreReport {
  std::string image_id;
  ScoreVector s;
  int chosen_branch = 1;
  GtScore s_g;
  double loss = 0.0;
};

inline nlohmann::json to_json(const ScoreReport& r) {
  return {{"image_id", r.image_id},
          {"s", r.s},
          {"chosen_branch", r.chosen_branch},
          {"s_g", r.s_g.s_g},
          {"score_loss", r.loss}};
}

}  // namespace crossmask
