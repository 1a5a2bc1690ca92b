#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossmask/geometry.hpp"
#include "crossmask/grid.hpp"
#include "crossmask/losses.hpp"
#include "crossmask/pseudo_mask.hpp"
#include "crossmask/scoring.hpp"
#include "crossmask/size_branching.hpp"

namespace crossmask::toy {

// ---------------------------------------------------------------------------
// Features

inline constexpr int kSmallBlurRadius = 2;
inline constexpr int kLargeBlurRadius = 8;

/// Fixed per-pixel feature bank standing in for a segmentation backbone:
/// intensity, two box-blur scales, gradient magnitude and a constant 1.
struct FeatureStack {
  std::vector<MaskGrid> channels;

  std::size_t k() const { return channels.size(); }
  std::size_t width() const { return channels.empty() ? 0 : channels.front().width(); }
  std::size_t height() const { return channels.empty() ? 0 : channels.front().height(); }
  std::size_t pixels() const { return channels.empty() ? 0 : channels.front().size(); }
};

/// Mean over the (2r+1)^2 window clipped to the image, via a summed-area table.
inline MaskGrid box_mean(const MaskGrid& image, int radius) {
  const std::size_t w = image.width(), h = image.height();
  std::vector<double> sat((w + 1) * (h + 1), 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    double row_sum = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      row_sum += image(r, c);
      sat[(r + 1) * (w + 1) + (c + 1)] = sat[r * (w + 1) + (c + 1)] + row_sum;
    }
  }
  MaskGrid out(w, h);
  const auto ir = static_cast<std::ptrdiff_t>(radius);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const auto r0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(r) - ir));
      const auto c0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(c) - ir));
      const std::size_t r1 = std::min(h, r + static_cast<std::size_t>(radius) + 1);
      const std::size_t c1 = std::min(w, c + static_cast<std::size_t>(radius) + 1);
      const double sum = sat[r1 * (w + 1) + c1] - sat[r0 * (w + 1) + c1] - sat[r1 * (w + 1) + c0] +
                         sat[r0 * (w + 1) + c0];
      out(r, c) = sum / static_cast<double>((r1 - r0) * (c1 - c0));
    }
  }
  return out;
}

/// Central-difference gradient magnitude with edge replication.
inline MaskGrid gradient_magnitude(const MaskGrid& image) {
  const std::size_t w = image.width(), h = image.height();
  MaskGrid out(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double gx = 0.5 * (image(r, std::min(c + 1, w - 1)) - image(r, c == 0 ? 0 : c - 1));
      const double gy = 0.5 * (image(std::min(r + 1, h - 1), c) - image(r == 0 ? 0 : r - 1, c));
      out(r, c) = std::hypot(gx, gy);
    }
  }
  return out;
}

inline FeatureStack extract_features(const MaskGrid& image) {
  if (image.empty()) fail(ErrorKind::InvalidArgument, "empty image");
  for (double v : image) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFiniteInput, "image contains a non-finite value");
  }
  FeatureStack f;
  f.channels.push_back(image);
  f.channels.push_back(box_mean(image, kSmallBlurRadius));
  f.channels.push_back(box_mean(image, kLargeBlurRadius));
  f.channels.push_back(gradient_magnitude(image));
  f.channels.emplace_back(image.width(), image.height(), 1.0);
  return f;
}

inline constexpr std::size_t kFeatureCount = 5;

// ---------------------------------------------------------------------------
// Model

/// 1x1 convolution: one logit per pixel from the feature vector.
struct LinearHead {
  std::vector<double> weights;
  double bias = 0.0;

  double apply(const FeatureStack& f, std::size_t i) const {
    double z = bias;
    for (std::size_t k = 0; k < weights.size(); ++k) z += weights[k] * f.channels[k][i];
    return z;
  }
  friend bool operator==(const LinearHead&, const LinearHead&) = default;
};

struct ToyModel {
  std::size_t k = kFeatureCount;
  std::vector<LinearHead> branch_heads;
  std::vector<LinearHead> score_head;

  static ToyModel zeros(std::size_t k, std::size_t n_branches) {
    ToyModel m;
    m.k = k;
    m.branch_heads.assign(n_branches, LinearHead{std::vector<double>(k, 0.0), 0.0});
    m.score_head.assign(n_branches, LinearHead{std::vector<double>(k, 0.0), 0.0});
    return m;
  }

  std::size_t n_branches() const { return branch_heads.size(); }
  std::size_t head_params() const { return branch_heads.size() * (k + 1); }
  std::size_t param_count() const { return 2 * head_params(); }
  friend bool operator==(const ToyModel&, const ToyModel&) = default;
};

/// Flat parameter layout: branch heads first, then score heads; each head
/// is its K weights followed by its bias.
inline std::vector<double> flatten(const ToyModel& m) {
  std::vector<double> p;
  p.reserve(m.param_count());
  for (const auto* heads : {&m.branch_heads, &m.score_head}) {
    for (const auto& h : *heads) {
      p.insert(p.end(), h.weights.begin(), h.weights.end());
      p.push_back(h.bias);
    }
  }
  return p;
}

inline ToyModel unflatten(std::span<const double> p, std::size_t k, std::size_t n_branches) {
  ToyModel m = ToyModel::zeros(k, n_branches);
  if (p.size() != m.param_count()) fail(ErrorKind::ShapeMismatch, "parameter vector has the wrong length");
  std::size_t at = 0;
  for (auto* heads : {&m.branch_heads, &m.score_head}) {
    for (auto& h : *heads) {
      for (auto& w : h.weights) w = p[at++];
      h.bias = p[at++];
    }
  }
  return m;
}

inline nlohmann::json checkpoint_to_json(const ToyModel& m) {
  return {{"K", m.k}, {"n_branches", m.n_branches()}, {"params", flatten(m)}};
}

inline ToyModel checkpoint_from_json(const nlohmann::json& j) {
  try {
    const auto k = j.at("K").get<std::size_t>();
    const auto n = j.at("n_branches").get<std::size_t>();
    const auto params = j.at("params").get<std::vector<double>>();
    return unflatten(params, k, n);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::SchemaError, std::string("checkpoint: ") + e.what());
  }
}

struct ForwardResult {
  std::vector<MaskGrid> probs;  ///< P_1..P_n
  ScoreMap raw_scores;
};

inline ForwardResult forward(const ToyModel& m, const FeatureStack& f) {
  if (f.k() != m.k) fail(ErrorKind::ShapeMismatch, "feature count does not match the model");
  ForwardResult out;
  for (const auto& head : m.branch_heads) {
    if (head.weights.size() != m.k) fail(ErrorKind::ShapeMismatch, "branch head width");
    MaskGrid p(f.width(), f.height());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(head.apply(f, i));
    out.probs.push_back(std::move(p));
  }
  for (const auto& head : m.score_head) {
    if (head.weights.size() != m.k) fail(ErrorKind::ShapeMismatch, "score head width");
    MaskGrid s(f.width(), f.height());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = head.apply(f, i);
    out.raw_scores.channels.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Data

struct Sample {
  std::string id;
  MaskGrid image;
  FeatureStack features;
  MaskGrid pseudo;
  std::optional<BinaryMask> gt;
  std::optional<CrossScribble> cross;
};

inline Sample make_sample(std::string id, MaskGrid image, MaskGrid pseudo, std::optional<BinaryMask> gt = std::nullopt) {
  require_same_shape(image, pseudo, "sample");
  Sample s{std::move(id), std::move(image), {}, std::move(pseudo), std::move(gt), std::nullopt};
  s.features = extract_features(s.image);
  return s;
}

enum class ShapeFamily { Rectangles, Ellipses, Mixed };

struct SyntheticSpec {
  std::size_t size = 64;
  std::size_t count = 60;
  ShapeFamily family = ShapeFamily::Mixed;
  double min_rel_area = 0.01;
  double max_rel_area = 0.40;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

/// Bright blob on a darker background, annotated by a cross along the blob's
/// axes (arm lengths jittered by up to 10%). The pseudo mask is rendered
/// from that cross with sigma = infinity.
inline std::vector<Sample> make_synthetic(const SyntheticSpec& spec) {
  if (spec.size < 16 || spec.count == 0) fail(ErrorKind::InvalidArgument, "synthetic corpus too small");
  if (!(0.0 < spec.min_rel_area && spec.min_rel_area <= spec.max_rel_area && spec.max_rel_area < 0.6)) {
    fail(ErrorKind::InvalidArgument, "relative area range must satisfy 0 < min <= max < 0.6");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto n = static_cast<double>(spec.size);
  std::vector<Sample> out;
  out.reserve(spec.count);
  for (std::size_t idx = 0; idx < spec.count; ++idx) {
    const double log_lo = std::log(spec.min_rel_area), log_hi = std::log(spec.max_rel_area);
    const double area = std::exp(log_lo + (log_hi - log_lo) * unif(rng)) * n * n;
    const double aspect = 0.7 + 0.7 * unif(rng);
    const double angle = (unif(rng) - 0.5) * std::numbers::pi / 3.0;
    const bool ellipse = spec.family == ShapeFamily::Ellipses ||
                         (spec.family == ShapeFamily::Mixed && unif(rng) < 0.5);
    // Half extents along the shape's own axes.
    const double prod = ellipse ? area / std::numbers::pi : area / 4.0;
    const double hx = std::sqrt(prod * aspect), hy = std::sqrt(prod / aspect);
    const Point2 ux{std::cos(angle), std::sin(angle)};
    const Point2 uy{-std::sin(angle), std::cos(angle)};
    const double reach_x = std::abs(hx * ux.x) + std::abs(hy * uy.x);
    const double reach_y = std::abs(hx * ux.y) + std::abs(hy * uy.y);
    const double margin = 1.0;
    auto place = [&](double reach) {
      const double lo = reach * 1.1 + margin, hi = n - reach * 1.1 - margin;
      return hi > lo ? lo + (hi - lo) * unif(rng) : n / 2.0;
    };
    const Point2 center{place(reach_x), place(reach_y)};

    MaskGrid image(spec.size, spec.size);
    BinaryMask gt(spec.size, spec.size, 0);
    for (std::size_t r = 0; r < spec.size; ++r) {
      for (std::size_t c = 0; c < spec.size; ++c) {
        const Point2 q = Point2{static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5} - center;
        const double lx = dot(q, ux) / hx, ly = dot(q, uy) / hy;
        const bool inside = ellipse ? lx * lx + ly * ly <= 1.0 : std::abs(lx) <= 1.0 && std::abs(ly) <= 1.0;
        gt(r, c) = inside ? 1 : 0;
        image(r, c) = (inside ? 0.7 : 0.2) + spec.noise * gauss(rng);
      }
    }

    auto jitter = [&] { return 0.9 + 0.2 * unif(rng); };
    auto clip = [&](Point2 p) { return Point2{std::clamp(p.x, 0.0, n), std::clamp(p.y, 0.0, n)}; };
    const Segment seg_ab{clip(center + (hy * jitter()) * uy), clip(center - (hy * jitter()) * uy)};
    const Segment seg_cd{clip(center - (hx * jitter()) * ux), clip(center + (hx * jitter()) * ux)};
    const CrossScribble cross = build_cross(seg_ab, seg_cd);
    MaskGrid pseudo = rasterize_pseudo_mask(cross, SigmaSpec::infinite(), MaskOp::Multiply, spec.size, spec.size);

    char name[32];
    std::snprintf(name, sizeof(name), "synth_%04zu", idx);
    Sample s = make_sample(name, std::move(image), std::move(pseudo), std::move(gt));
    s.cross = cross;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double lr = 0.5;
  double momentum = 0.9;
  int epochs = 400;
  double score_lr = 2.0;
  int score_epochs = 300;
  SizeAwareConfig size{};
  BranchThresholds thresholds = kPolypThresholds;
  GtScoreMode gt_mode = GtScoreMode::MinLoss;
  std::uint64_t seed = 0;
};

struct LossHistory {
  std::vector<double> loss;  ///< dataset loss before each update, plus the final value
};

/// Branch routing for one training sample, fixed by its pseudo mask.
struct SizeRouting {
  int branch = 1;
  double alpha = 1.0;
  MaskGrid coeff;
};

inline SizeRouting size_routing(const MaskGrid& pseudo, const TrainConfig& cfg) {
  const double r_z = relative_size(pseudo);
  const double alpha = coefficient_alpha(r_z, cfg.size.coe);
  return {select_branch(r_z, cfg.thresholds), alpha, coefficient_mask(pseudo, alpha)};
}

/// Loss value and its gradient in the flatten() layout.
struct Objective {
  double loss = 0.0;
  std::vector<double> grad;
};

namespace detail {
inline MaskGrid head_logits(const LinearHead& head, const FeatureStack& f) {
  MaskGrid z(f.width(), f.height());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = head.apply(f, i);
  return z;
}

/// Adds dz(i) * [f_1(i) .. f_K(i), 1] into g[0..K].
inline void accumulate_head_grad(double* g, const FeatureStack& f, std::size_t i, double dz) {
  for (std::size_t k = 0; k < f.k(); ++k) g[k] += dz * f.channels[k][i];
  g[f.k()] += dz;
}
}  // namespace detail

/// Stage-1 objective L_seg = l_sa + l_1 + ... + l_n averaged over samples,
/// with its gradient on the branch-head parameters (score-head entries of
/// the gradient are zero).
inline Objective segmentation_objective(const ToyModel& m, std::span<const Sample> data,
                                        std::span<const SizeRouting> routes) {
  if (data.empty()) fail(ErrorKind::EmptyList, "empty dataset");
  const std::size_t stride = m.k + 1;
  Objective out{0.0, std::vector<double>(m.param_count(), 0.0)};
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Sample& s = data[n];
    const SizeRouting& route = routes[n];
    if (s.features.k() != m.k) fail(ErrorKind::ShapeMismatch, "feature count does not match the model");
    const double inv_n = 1.0 / static_cast<double>(s.pseudo.size());
    double branch_sum = 0.0;
    double l_sa = 0.0;
    for (std::size_t b = 0; b < m.n_branches(); ++b) {
      const bool selected = static_cast<int>(b) + 1 == route.branch;
      const MaskGrid z = detail::head_logits(m.branch_heads[b], s.features);
      double* g = out.grad.data() + b * stride;
      double bce_sum = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double p = sigmoid(z[i]);
        const double pixel_loss = bce_scalar(p, s.pseudo[i]);
        bce_sum += pixel_loss;
        double dz = (p - s.pseudo[i]) * inv_n;
        if (selected) {
          l_sa += pixel_loss * route.coeff[i];
          dz *= 1.0 + route.coeff[i];
        }
        detail::accumulate_head_grad(g, s.features, i, dz);
      }
      branch_sum += bce_sum * inv_n;
    }
    l_sa *= inv_n;
    if (!std::isfinite(l_sa) || !std::isfinite(branch_sum)) fail(ErrorKind::NonFiniteLoss, "stage-1 loss");
    out.loss += segmentation_total_loss(l_sa, branch_sum, 0.0, 0.0);
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  out.loss *= inv;
  for (double& g : out.grad) g *= inv;
  return out;
}

inline std::vector<SizeRouting> size_routes(std::span<const Sample> data, const TrainConfig& cfg) {
  std::vector<SizeRouting> routes;
  routes.reserve(data.size());
  for (const auto& s : data) routes.push_back(size_routing(s.pseudo, cfg));
  return routes;
}

inline Objective segmentation_objective(const ToyModel& m, std::span<const Sample> data, const TrainConfig& cfg) {
  const auto routes = size_routes(data, cfg);
  return segmentation_objective(m, data, routes);
}

/// Stage-2 target for one sample, from the frozen branch predictions.
inline GtScore score_target(const ToyModel& m, const Sample& s, const TrainConfig& cfg) {
  if (cfg.gt_mode == GtScoreMode::Match) {
    return one_hot(select_branch(relative_size(s.pseudo), cfg.thresholds), m.n_branches());
  }
  const ForwardResult fw = forward(m, s.features);
  std::vector<double> losses;
  for (const auto& p : fw.probs) losses.push_back(bce_mean(p, s.pseudo));
  return gt_score(losses);
}

inline ScoreMap score_map(const ToyModel& m, const FeatureStack& f) {
  if (f.k() != m.k) fail(ErrorKind::ShapeMismatch, "feature count does not match the model");
  ScoreMap raw;
  for (const auto& head : m.score_head) raw.channels.push_back(detail::head_logits(head, f));
  return normalize_scores(std::move(raw));
}

inline ScoreVector confidence_scores(const ToyModel& m, const FeatureStack& f, const MaskGrid& support) {
  return channel_weighted_average(score_map(m, f), support);
}

/// Mean score loss over samples with its gradient on the score-head
/// parameters (branch-head entries of the gradient are zero).
inline Objective score_objective(const ToyModel& m, std::span<const Sample> data, std::span<const GtScore> targets) {
  if (data.empty()) fail(ErrorKind::EmptyList, "empty dataset");
  const std::size_t stride = m.k + 1;
  const std::size_t offset = m.head_params();
  const std::size_t nb = m.n_branches();
  Objective out{0.0, std::vector<double>(m.param_count(), 0.0)};
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Sample& s = data[n];
    const ScoreMap q = score_map(m, s.features);
    const ScoreVector sv = channel_weighted_average(q, s.pseudo);
    out.loss += score_loss(targets[n], sv);
    const auto target = static_cast<std::size_t>(targets[n].index() - 1);
    if (sv[target] <= kScoreClamp) continue;  // clamped: flat loss
    // d(-log s_t)/dz_j = -(M / N_p) q_t (delta_tj - q_j) / s_t
    const double n_p = static_cast<double>(count_positive(s.pseudo));
    for (std::size_t i = 0; i < s.pseudo.size(); ++i) {
      if (!(s.pseudo[i] > 0.0)) continue;
      const double scale = -s.pseudo[i] / n_p * q.channels[target][i] / sv[target];
      for (std::size_t j = 0; j < nb; ++j) {
        const double dz = scale * ((j == target ? 1.0 : 0.0) - q.channels[j][i]);
        detail::accumulate_head_grad(out.grad.data() + offset + j * stride, s.features, i, dz);
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  out.loss *= inv;
  for (double& g : out.grad) g *= inv;
  return out;
}

namespace detail {
[[noreturn]] inline void diverged(const char* stage, int epoch, const ToyModel& m) {
  fail(ErrorKind::DivergenceDetected, std::string(stage) + " loss became non-finite at epoch " +
                                          std::to_string(epoch) + "; state " + checkpoint_to_json(m).dump());
}

/// Momentum gradient descent on the parameter range [first, last).
template <typename Evaluate>
LossHistory descend(ToyModel& m, std::size_t first, std::size_t last, double lr, double momentum, int epochs,
                    const char* stage, Evaluate evaluate) {
  LossHistory history;
  std::vector<double> params = flatten(m);
  std::vector<double> velocity(params.size(), 0.0);
  auto eval = [&](int epoch) {
    try {
      Objective o = evaluate(m);
      if (!std::isfinite(o.loss)) diverged(stage, epoch, m);
      return o;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFiniteLoss) throw;
      diverged(stage, epoch, m);
    }
  };
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const Objective o = eval(epoch);
    history.loss.push_back(o.loss);
    for (std::size_t p = first; p < last; ++p) {
      velocity[p] = momentum * velocity[p] - lr * o.grad[p];
      params[p] += velocity[p];
    }
    m = unflatten(params, m.k, m.n_branches());
  }
  history.loss.push_back(eval(epochs).loss);
  return history;
}
}  // namespace detail

/// Fits the branch heads on L_seg. Score heads are left untouched.
inline LossHistory train_segmentation_stage(ToyModel& m, std::span<const Sample> data, const TrainConfig& cfg) {
  if (data.empty()) fail(ErrorKind::EmptyList, "empty dataset");
  cfg.size.validate();
  if (static_cast<std::size_t>(cfg.size.n_branches) != m.n_branches()) {
    fail(ErrorKind::ShapeMismatch, "model branch count differs from the configuration");
  }
  const auto routes = size_routes(data, cfg);
  return detail::descend(m, 0, m.head_params(), cfg.lr, cfg.momentum, cfg.epochs, "segmentation",
                         [&](const ToyModel& x) { return segmentation_objective(x, data, routes); });
}

/// Fits the score heads on the score loss with branch heads frozen.
inline LossHistory train_score_stage(ToyModel& m, std::span<const Sample> data, const TrainConfig& cfg) {
  if (data.empty()) fail(ErrorKind::EmptyList, "empty dataset");
  std::vector<GtScore> targets;
  for (const auto& s : data) targets.push_back(score_target(m, s, cfg));
  return detail::descend(m, m.head_params(), m.param_count(), cfg.score_lr, cfg.momentum, cfg.score_epochs,
                         "score", [&](const ToyModel& x) { return score_objective(x, data, targets); });
}

// ---------------------------------------------------------------------------
// Inference

inline constexpr double kDecisionThreshold = 0.5;

struct Prediction {
  BinaryMask mask;
  int branch = 1;       ///< chosen by the learned confidence scores
  int size_branch = 1;  ///< what the size thresholds would pick for the predicted mask
  ScoreVector scores;
};

/// At inference there is no pseudo mask, so the confidence scores are
/// averaged over the pixels where the mean branch probability exceeds 0.5
/// (the whole image when that set is empty).
inline Prediction predict(const ToyModel& m, const FeatureStack& f, const BranchThresholds& thresholds) {
  const ForwardResult fw = forward(m, f);
  MaskGrid support(f.width(), f.height(), 0.0);
  for (std::size_t i = 0; i < support.size(); ++i) {
    double mean = 0.0;
    for (const auto& p : fw.probs) mean += p[i];
    mean /= static_cast<double>(fw.probs.size());
    support[i] = mean > kDecisionThreshold ? 1.0 : 0.0;
  }
  const double rel = relative_size(support);
  if (count_positive(support) == 0) support = MaskGrid(f.width(), f.height(), 1.0);
  Prediction out;
  out.scores = channel_weighted_average(normalize_scores(fw.raw_scores), support);
  out.branch = infer_branch(out.scores);
  out.size_branch = select_branch(rel, thresholds);
  const MaskGrid& chosen = fw.probs[static_cast<std::size_t>(out.branch - 1)];
  out.mask = BinaryMask(f.width(), f.height(), 0);
  for (std::size_t i = 0; i < chosen.size(); ++i) out.mask[i] = chosen[i] > kDecisionThreshold ? 1 : 0;
  return out;
}

}  // namespace crossmask::toy
