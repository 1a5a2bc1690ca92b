#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "crossmask/grid.hpp"

namespace crossmask {

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kDiceSmooth = 1e-6;

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Binary cross entropy of one probability against a (possibly soft) target.
inline double bce_scalar(double p, double t) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return -(t * std::log(q) + (1.0 - t) * std::log(1.0 - q));
}

/// Unreduced per-pixel BCE (the loss grid L').
inline MaskGrid bce_none(const MaskGrid& pred, const MaskGrid& target) {
  require_same_shape(pred, target, "bce");
  MaskGrid out(pred.width(), pred.height());
  for (std::size_t i = 0; i < pred.size(); ++i) out[i] = bce_scalar(pred[i], target[i]);
  return out;
}

inline double bce_mean(const MaskGrid& pred, const MaskGrid& target) {
  require_same_shape(pred, target, "bce");
  if (pred.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += bce_scalar(pred[i], target[i]);
  return sum / static_cast<double>(pred.size());
}

/// d BCE(sigmoid(z), t) / dz = sigmoid(z) - t.
inline MaskGrid bce_grad_logit(const MaskGrid& logits, const MaskGrid& target) {
  require_same_shape(logits, target, "bce_grad_logit");
  MaskGrid out(logits.width(), logits.height());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = sigmoid(logits[i]) - target[i];
  return out;
}

/// A scribbled pixel and its class (1 foreground, 0 background).
struct LabeledPixel {
  std::size_t row = 0;
  std::size_t col = 0;
  double target = 1.0;
};

/// Mean BCE restricted to the scribbled pixels.
inline double partial_ce(const MaskGrid& pred, std::span<const LabeledPixel> labels) {
  if (labels.empty()) fail(ErrorKind::NoLabels, "partial cross entropy needs labelled pixels");
  double sum = 0.0;
  for (const auto& px : labels) {
    if (px.row >= pred.height() || px.col >= pred.width()) {
      fail(ErrorKind::DimensionMismatch, "labelled pixel outside the prediction grid");
    }
    sum += bce_scalar(pred(px.row, px.col), px.target);
  }
  return sum / static_cast<double>(labels.size());
}

/// Soft Dice loss 1 - (2 sum(p t) + eps) / (sum(p) + sum(t) + eps).
inline double dice_loss(const MaskGrid& pred, const MaskGrid& target) {
  require_same_shape(pred, target, "dice_loss");
  double inter = 0.0, sp = 0.0, st = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * target[i];
    sp += pred[i];
    st += target[i];
  }
  return 1.0 - (2.0 * inter + kDiceSmooth) / (sp + st + kDiceSmooth);
}

/// Hard Dice 2|P & G| / (|P| + |G|); two empty masks agree perfectly.
inline double dice(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "dice");
  std::size_t inter = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    inter += (p && g) ? 1 : 0;
    np += p ? 1 : 0;
    ng += g ? 1 : 0;
  }
  if (np + ng == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

struct MaskPair {
  BinaryMask pred;
  BinaryMask gt;
};

inline double mdice(std::span<const MaskPair> pairs) {
  if (pairs.empty()) fail(ErrorKind::EmptyList, "mDice over an empty list");
  double sum = 0.0;
  for (const auto& p : pairs) sum += dice(p.pred, p.gt);
  return sum / static_cast<double>(pairs.size());
}

struct LabelPair {
  LabelMap pred;
  LabelMap gt;
};

/// Per-category mDice over label maps: for each foreground category, the
/// mean over images of the binary Dice of that category's pixels.
inline std::map<int, double> category_mdice(std::span<const LabelPair> pairs, int n_categories) {
  if (pairs.empty()) fail(ErrorKind::EmptyList, "mDice over an empty list");
  std::map<int, double> out;
  for (int c = 1; c < n_categories; ++c) {
    double sum = 0.0;
    for (const auto& p : pairs) {
      require_same_shape(p.pred, p.gt, "category_mdice");
      BinaryMask bp(p.pred.width(), p.pred.height()), bg(p.gt.width(), p.gt.height());
      for (std::size_t i = 0; i < bp.size(); ++i) {
        bp[i] = p.pred[i] == c ? 1 : 0;
        bg[i] = p.gt[i] == c ? 1 : 0;
      }
      sum += dice(bp, bg);
    }
    out[c] = sum / static_cast<double>(pairs.size());
  }
  return out;
}

}  // namespace crossmask
