#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "crossmask/dataset_io.hpp"
#include "crossmask/losses.hpp"
#include "crossmask/multi_category.hpp"
#include "crossmask/pseudo_mask.hpp"
#include "crossmask/scoring.hpp"
#include "crossmask/size_branching.hpp"
#include "crossmask/toy_trainer.hpp"

namespace crossmask::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

inline void log(const std::string& msg) { std::cerr << msg << '\n'; }

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IoError:
    case ErrorKind::DivergenceDetected:
    case ErrorKind::NonFiniteLoss:
      return kExitRuntime;
    default:
      return kExitValidation;
  }
}

/// Runs `body` and maps library errors onto the exit-code convention.
template <typename Body>
int guarded(const char* command, Body body) {
  try {
    return body();
  } catch (const Error& e) {
    log(std::string(command) + ": " + e.what());
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    log(std::string(command) + ": SchemaError: " + e.what());
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    log(std::string(command) + ": IoError: " + e.what());
    return kExitRuntime;
  }
}

/// Calls fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

struct LoadedDoc {
  fs::path path;
  io::AnnotationDoc doc;
};

/// Loads every annotation in `dir`. All files are checked before returning;
/// failures are reported per file and raised as one SchemaError.
inline std::vector<LoadedDoc> load_annotation_dir(const fs::path& dir) {
  const auto files = io::list_files(dir, ".json");
  if (files.empty()) fail(ErrorKind::InvalidArgument, "no annotations found in " + dir.string());
  std::vector<LoadedDoc> docs;
  std::size_t bad = 0;
  for (const auto& f : files) {
    try {
      docs.push_back({f, io::load_annotation(f)});
    } catch (const Error& e) {
      log(f.filename().string() + ": " + e.what());
      ++bad;
    }
  }
  if (bad > 0) fail(ErrorKind::SchemaError, std::to_string(bad) + " annotation file(s) failed validation");
  return docs;
}

/// Per-category masks of one document with repeated categories merged by
/// pointwise maximum.
inline std::vector<CategoryMask> merge_by_category(std::vector<CategoryMask> masks) {
  std::map<int, MaskGrid> merged;
  for (auto& m : masks) {
    auto [it, inserted] = merged.try_emplace(m.category.value, std::move(m.mask));
    if (!inserted) {
      for (std::size_t i = 0; i < it->second.size(); ++i) it->second[i] = std::max(it->second[i], m.mask[i]);
    }
  }
  std::vector<CategoryMask> out;
  for (auto& [cat, mask] : merged) out.push_back({CategoryId(cat), std::move(mask)});
  return out;
}

inline std::string mask_file_name(const std::string& stem, int category, int instance) {
  std::string name = stem + "_cat" + std::to_string(category);
  if (instance > 1) name += "_" + std::to_string(instance);
  return name;
}

// ---------------------------------------------------------------------------
// genmask

struct GenmaskOptions {
  fs::path annotations;
  fs::path out;
  MaskOp op = MaskOp::Multiply;
  SigmaSpec sigma = SigmaSpec::infinite();
  double shrink = 0.0;
  bool combine = false;
  bool float_export = false;
  int jobs = 1;
};

inline int genmask(const GenmaskOptions& opt) {
  return guarded("genmask", [&] {
    if (!(opt.shrink >= 0.0 && opt.shrink < 1.0)) fail(ErrorKind::InvalidRate, "--shrink must lie in [0, 1)");
    const auto docs = load_annotation_dir(opt.annotations);
    const io::MaskOptions mopt{opt.sigma, opt.op, opt.shrink};
    const io::MaskOptions base{opt.sigma, opt.op, 0.0};

    struct Rendered {
      std::vector<CategoryMask> masks;
      std::vector<std::size_t> base_area;
      std::optional<LabelMap> combined;
    };
    std::vector<Rendered> rendered(docs.size());
    parallel_for(docs.size(), opt.jobs, [&](std::size_t i) {
      Rendered r;
      r.masks = io::pseudo_masks(docs[i].doc, mopt);
      if (opt.shrink > 0.0) {
        for (const auto& m : io::pseudo_masks(docs[i].doc, base)) r.base_area.push_back(count_positive(m.mask));
      }
      if (opt.combine && !r.masks.empty()) r.combined = combine_pseudo_masks(merge_by_category(r.masks));
      rendered[i] = std::move(r);
    });

    json per_mask = json::array();
    bool binary = true;
    std::size_t total_area = 0, n_masks = 0;
    double rel_sum = 0.0, ratio_sum = 0.0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const std::string stem = docs[i].path.stem().string();
      std::map<int, int> instances;
      for (std::size_t k = 0; k < rendered[i].masks.size(); ++k) {
        const auto& cm = rendered[i].masks[k];
        const std::string name = mask_file_name(stem, cm.category.value, ++instances[cm.category.value]);
        io::write_mask(cm.mask, opt.out / (name + ".png"));
        if (opt.float_export) io::write_file_atomic(opt.out / (name + ".f32"), io::encode_float_mask(cm.mask));
        for (double w : cm.mask) binary = binary && (w == 0.0 || w == 1.0);
        const std::size_t area = count_positive(cm.mask);
        json entry = {{"image", docs[i].doc.image},
                      {"file", name + ".png"},
                      {"category", cm.category.value},
                      {"area_px", area},
                      {"relative_size", relative_size(cm.mask)}};
        if (opt.shrink > 0.0) {
          const std::size_t b = rendered[i].base_area[k];
          const double ratio = b ? static_cast<double>(area) / static_cast<double>(b) : 0.0;
          entry["area_ratio_vs_unshrunk"] = ratio;
          ratio_sum += ratio;
        }
        per_mask.push_back(std::move(entry));
        total_area += area;
        rel_sum += relative_size(cm.mask);
        ++n_masks;
      }
      if (rendered[i].combined) io::write_mask(*rendered[i].combined, opt.out / (stem + "_combined.png"));
    }
    json summary = {{"images", docs.size()},
                    {"masks", n_masks},
                    {"op", std::string(to_string(opt.op))},
                    {"sigma_ratio", opt.sigma.is_infinite() ? json("inf") : json(opt.sigma.ratio())},
                    {"shrink", opt.shrink},
                    {"binary", binary},
                    {"total_area_px", total_area},
                    {"mean_area_px", n_masks ? static_cast<double>(total_area) / static_cast<double>(n_masks) : 0.0},
                    {"mean_relative_size", n_masks ? rel_sum / static_cast<double>(n_masks) : 0.0},
                    {"per_mask", std::move(per_mask)}};
    if (opt.shrink > 0.0) summary["mean_area_ratio_vs_unshrunk"] = n_masks ? ratio_sum / static_cast<double>(n_masks) : 0.0;
    io::write_json(opt.out / "summary.json", summary);
    log("genmask: wrote " + std::to_string(n_masks) + " mask(s) for " + std::to_string(docs.size()) + " image(s)");
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// calibrate

/// Category encoded in a mask file name (`..._cat<k>[_n].png`), default 1.
inline int category_from_name(const std::string& stem) {
  static const std::regex pattern(R"(_cat(\d+)(_\d+)?$)");
  std::smatch m;
  if (std::regex_search(stem, m, pattern)) return std::stoi(m[1].str());
  return 1;
}

struct CalibrateOptions {
  fs::path masks;
  fs::path out;
};

inline int calibrate(const CalibrateOptions& opt) {
  return guarded("calibrate", [&] {
    std::map<int, std::vector<double>> sizes;
    for (const auto& f : io::list_files(opt.masks, ".png")) {
      const std::string stem = f.stem().string();
      if (stem.ends_with("_combined")) continue;
      sizes[category_from_name(stem)].push_back(relative_size(io::read_mask(f)));
    }
    if (sizes.empty()) fail(ErrorKind::InsufficientData, "no masks found in " + opt.masks.string());
    ThresholdTable table;
    for (const auto& [cat, values] : sizes) {
      try {
        table[cat] = calibrate_thresholds(values);
      } catch (const Error& e) {
        fail(e.kind(), "category " + std::to_string(cat) + ": " + e.what());
      }
      log("calibrate: category " + std::to_string(cat) + " thr1=" + std::to_string(table[cat].thr1) +
          " thr2=" + std::to_string(table[cat].thr2) + " from " + std::to_string(values.size()) + " mask(s)");
    }
    io::write_json(opt.out, thresholds_to_json(table));
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  fs::path pred;
  fs::path gt;
  fs::path report;
};

inline BinaryMask read_binary_mask(const fs::path& path) {
  const MaskGrid m = io::read_mask(path);
  BinaryMask out(m.width(), m.height(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] > 0.5 ? 1 : 0;
  return out;
}

inline int evaluate(const EvaluateOptions& opt) {
  return guarded("evaluate", [&] {
    const auto gts = io::list_files(opt.gt, ".png");
    if (gts.empty()) fail(ErrorKind::InvalidArgument, "no ground-truth masks in " + opt.gt.string());
    std::vector<MaskPair> pairs;
    json per_image = json::array();
    for (const auto& g : gts) {
      const fs::path p = opt.pred / g.filename();
      if (!fs::exists(p)) fail(ErrorKind::InvalidArgument, "missing prediction for " + g.filename().string());
      MaskPair pair{read_binary_mask(p), read_binary_mask(g)};
      require_same_shape(pair.pred, pair.gt, g.filename().string().c_str());
      per_image.push_back({{"id", g.filename().string()}, {"dice", dice(pair.pred, pair.gt)}});
      pairs.push_back(std::move(pair));
    }
    const double md = mdice(pairs);
    io::write_json(opt.report, {{"per_image", per_image}, {"mdice", md}, {"count", pairs.size()}});
    log("evaluate: mDice " + std::to_string(md) + " over " + std::to_string(pairs.size()) + " image(s)");
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// stats

struct StatsOptions {
  fs::path manifest;
  std::optional<fs::path> gt;
  fs::path report;
};

inline int stats(const StatsOptions& opt) {
  return guarded("stats", [&] {
    const io::DatasetManifest manifest = io::load_manifest(opt.manifest);
    std::vector<io::StatsInput> inputs;
    for (const auto& item : manifest.items) {
      io::StatsInput in{io::load_annotation(manifest.resolve(item.annotation)), std::nullopt};
      std::optional<fs::path> gt_path;
      if (opt.gt) {
        gt_path = *opt.gt / fs::path(item.image).filename();
      } else if (item.gt_mask) {
        gt_path = manifest.resolve(*item.gt_mask);
      }
      if (gt_path) {
        if (!fs::exists(*gt_path)) fail(ErrorKind::MissingGt, "no ground truth for " + item.image);
        in.gt = io::read_label_map(*gt_path);
      }
      inputs.push_back(std::move(in));
    }
    const bool any_gt = std::any_of(inputs.begin(), inputs.end(), [](const auto& in) { return in.gt.has_value(); });
    const io::StatsReport report = io::annotation_stats(inputs, any_gt || opt.gt.has_value());
    io::write_json(opt.report, io::to_json(report));
    log("stats: " + std::to_string(report.per_image.size()) + " image(s), mean fg rate " +
        std::to_string(report.mean_fg_rate));
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// simulate-shrink

struct ShrinkOptions {
  fs::path annotations;
  std::vector<double> rates;
  std::optional<fs::path> gt;
  fs::path report;
  MaskOp op = MaskOp::Multiply;
  SigmaSpec sigma = SigmaSpec::infinite();
};

/// Union of all pseudo masks of a document, as 0/1 weights.
inline MaskGrid union_mask(const std::vector<CategoryMask>& masks, std::size_t w, std::size_t h) {
  MaskGrid out(w, h, 0.0);
  for (const auto& m : masks) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], m.mask[i] > 0.0 ? 1.0 : 0.0);
  }
  return out;
}

inline int simulate_shrink(const ShrinkOptions& opt) {
  return guarded("simulate-shrink", [&] {
    if (opt.rates.empty()) fail(ErrorKind::InvalidArgument, "--rates is empty");
    for (double r : opt.rates) {
      if (!(r >= 0.0 && r < 1.0)) fail(ErrorKind::InvalidRate, "rate " + std::to_string(r) + " outside [0, 1)");
    }
    const auto docs = load_annotation_dir(opt.annotations);
    std::vector<std::optional<MaskGrid>> gts(docs.size());
    if (opt.gt) {
      for (std::size_t i = 0; i < docs.size(); ++i) {
        const fs::path p = *opt.gt / fs::path(docs[i].doc.image).filename();
        if (!fs::exists(p)) fail(ErrorKind::MissingGt, "no ground truth for " + docs[i].doc.image);
        const LabelMap labels = io::read_label_map(p);
        MaskGrid g(labels.width(), labels.height());
        for (std::size_t k = 0; k < labels.size(); ++k) g[k] = labels[k] != 0 ? 1.0 : 0.0;
        gts[i] = std::move(g);
      }
    }
    std::vector<std::vector<std::size_t>> base_area(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
      for (const auto& m : io::pseudo_masks(docs[i].doc, {opt.sigma, opt.op, 0.0})) {
        base_area[i].push_back(count_positive(m.mask));
      }
    }
    json rows = json::array();
    for (double rate : opt.rates) {
      double ratio_sum = 0.0, ep_sum = 0.0, en_sum = 0.0;
      std::size_t n_masks = 0, shrunk_total = 0, base_total = 0, n_err = 0;
      for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto masks = io::pseudo_masks(docs[i].doc, {opt.sigma, opt.op, rate});
        for (std::size_t k = 0; k < masks.size(); ++k) {
          const std::size_t a = count_positive(masks[k].mask);
          if (base_area[i][k] > 0) {
            ratio_sum += static_cast<double>(a) / static_cast<double>(base_area[i][k]);
            ++n_masks;
          }
          shrunk_total += a;
          base_total += base_area[i][k];
        }
        if (gts[i]) {
          const MaskGrid u = union_mask(masks, docs[i].doc.width, docs[i].doc.height);
          require_same_shape(u, *gts[i], docs[i].doc.image.c_str());
          const RelativeErrors e = relative_errors(u, *gts[i]);
          ep_sum += e.e_p;
          en_sum += e.e_n;
          ++n_err;
        }
      }
      json row = {{"rate", rate},
                  {"expected_area_ratio", (1.0 - rate) * (1.0 - rate)},
                  {"mean_area_ratio", n_masks ? ratio_sum / static_cast<double>(n_masks) : 0.0},
                  {"pooled_area_ratio",
                   base_total ? static_cast<double>(shrunk_total) / static_cast<double>(base_total) : 0.0}};
      if (n_err > 0) {
        row["e_p"] = ep_sum / static_cast<double>(n_err);
        row["e_n"] = en_sum / static_cast<double>(n_err);
      }
      rows.push_back(std::move(row));
    }
    io::write_json(opt.report, {{"images", docs.size()}, {"rates", rows}});
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// train-toy

/// Training run description. Without `dataset_dir` a synthetic corpus is
/// generated from `synthetic`.
struct ToyRunConfig {
  toy::TrainConfig train;
  std::optional<fs::path> thresholds_file;
  std::optional<fs::path> dataset_dir;
  toy::SyntheticSpec synthetic;
  std::size_t train_count = 60;
  std::size_t test_count = 20;
  fs::path out_dir = "toy_run";
};

inline ToyRunConfig toy_config_from_json(const json& j, const fs::path& base) {
  ToyRunConfig c;
  c.train.lr = j.value("lr", c.train.lr);
  c.train.momentum = j.value("momentum", c.train.momentum);
  c.train.epochs = j.value("epochs", c.train.epochs);
  c.train.score_lr = j.value("score_lr", c.train.score_lr);
  c.train.score_epochs = j.value("score_epochs", c.train.score_epochs);
  c.train.seed = j.value("seed", std::uint64_t{0});
  c.train.size.coe = j.value("coe", c.train.size.coe);
  c.train.size.n_branches = j.value("n_branches", c.train.size.n_branches);
  const std::string mode = j.value("gt_mode", std::string("min_loss"));
  if (mode == "match") c.train.gt_mode = GtScoreMode::Match;
  else if (mode != "min_loss") fail(ErrorKind::SchemaError, "gt_mode must be 'min_loss' or 'match'");
  if (j.contains("thresholds")) c.thresholds_file = base / j["thresholds"].get<std::string>();
  if (j.contains("dataset_dir")) c.dataset_dir = base / j["dataset_dir"].get<std::string>();
  if (j.contains("synthetic")) {
    const json& s = j["synthetic"];
    c.synthetic.size = s.value("size", c.synthetic.size);
    c.synthetic.min_rel_area = s.value("min_rel_area", c.synthetic.min_rel_area);
    c.synthetic.max_rel_area = s.value("max_rel_area", c.synthetic.max_rel_area);
    c.synthetic.noise = s.value("noise", c.synthetic.noise);
    c.train_count = s.value("train", c.train_count);
    c.test_count = s.value("test", c.test_count);
  }
  c.out_dir = base / j.value("out_dir", std::string("toy_run"));
  if (c.train.epochs < 0 || c.train.score_epochs < 0) fail(ErrorKind::SchemaError, "epochs must be >= 0");
  c.train.size.validate();
  return c;
}

/// Loads a dataset directory laid out as manifest.json + images + annotations
/// (+ optional gt masks); pseudo masks use sigma = infinity.
inline std::pair<std::vector<toy::Sample>, std::vector<toy::Sample>> load_toy_dataset(const fs::path& dir) {
  const io::DatasetManifest manifest = io::load_manifest(dir / "manifest.json");
  std::vector<toy::Sample> train, test;
  for (const auto& item : manifest.items) {
    const io::AnnotationDoc doc = io::load_annotation(manifest.resolve(item.annotation));
    const MaskGrid image = io::read_image(manifest.resolve(item.image));
    const auto masks = io::pseudo_masks(doc, {});
    MaskGrid pseudo = union_mask(masks, doc.width, doc.height);
    std::optional<BinaryMask> gt;
    if (item.gt_mask) gt = binarize(io::read_label_map(manifest.resolve(*item.gt_mask)));
    toy::Sample s = toy::make_sample(item.image, image, std::move(pseudo), std::move(gt));
    (item.split == io::Split::Test ? test : train).push_back(std::move(s));
  }
  return {std::move(train), std::move(test)};
}

struct ToyRunResult {
  json report;
  toy::ToyModel model;
};

inline ToyRunResult run_toy(const ToyRunConfig& cfg_in) {
  ToyRunConfig cfg = cfg_in;
  std::vector<toy::Sample> train, test;
  if (cfg.dataset_dir) {
    std::tie(train, test) = load_toy_dataset(*cfg.dataset_dir);
  } else {
    cfg.synthetic.seed = cfg.train.seed;
    cfg.synthetic.count = cfg.train_count + cfg.test_count;
    auto all = toy::make_synthetic(cfg.synthetic);
    test.assign(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(cfg.train_count)),
                std::make_move_iterator(all.end()));
    all.resize(cfg.train_count);
    train = std::move(all);
  }
  if (train.empty()) fail(ErrorKind::InvalidArgument, "no training samples");

  if (cfg.thresholds_file) {
    const ThresholdTable table = thresholds_from_json(io::read_json(*cfg.thresholds_file));
    const auto it = table.find(1);
    if (it == table.end()) fail(ErrorKind::SchemaError, "thresholds file has no category 1");
    cfg.train.thresholds = it->second;
  } else {
    std::vector<double> sizes;
    for (const auto& s : train) sizes.push_back(relative_size(s.pseudo));
    cfg.train.thresholds = calibrate_thresholds(sizes);
  }

  toy::ToyModel model = toy::ToyModel::zeros(toy::kFeatureCount, static_cast<std::size_t>(cfg.train.size.n_branches));
  const toy::LossHistory seg = toy::train_segmentation_stage(model, train, cfg.train);
  const auto frozen = model.branch_heads;
  const toy::LossHistory scr = toy::train_score_stage(model, train, cfg.train);
  const bool heads_frozen = frozen == model.branch_heads;

  json report = {{"thresholds", {{"thr1", cfg.train.thresholds.thr1}, {"thr2", cfg.train.thresholds.thr2}}},
                 {"train_count", train.size()},
                 {"test_count", test.size()},
                 {"stage1", {{"initial_loss", seg.loss.front()}, {"final_loss", seg.loss.back()}, {"history", seg.loss}}},
                 {"stage2",
                  {{"initial_loss", scr.loss.front()},
                   {"final_loss", scr.loss.back()},
                   {"history", scr.loss},
                   {"branch_heads_frozen", heads_frozen}}}};

  json scores = json::array();
  json per_image = json::array();
  std::vector<MaskPair> pairs;
  std::map<int, int> branch_counts;
  std::size_t agree = 0;
  for (const auto& s : test) {
    const toy::Prediction p = toy::predict(model, s.features, cfg.train.thresholds);
    ++branch_counts[p.branch];
    const GtScore target = toy::score_target(model, s, cfg.train);
    const ScoreVector sv = toy::confidence_scores(model, s.features, s.pseudo);
    agree += infer_branch(sv) == target.index() ? 1 : 0;
    scores.push_back(to_json(ScoreReport{s.id, sv, infer_branch(sv), target, score_loss(target, sv)}));
    json entry = {{"id", s.id}, {"branch", p.branch}, {"size_branch", p.size_branch}};
    if (s.gt) {
      entry["dice"] = dice(p.mask, *s.gt);
      pairs.push_back({p.mask, *s.gt});
    }
    per_image.push_back(std::move(entry));
  }
  json counts = json::object();
  for (const auto& [b, n] : branch_counts) counts[std::to_string(b)] = n;
  report["test"] = {{"per_image", per_image},
                    {"branch_counts", counts},
                    {"score_agreement", test.empty() ? 0.0 : static_cast<double>(agree) / static_cast<double>(test.size())}};
  if (!pairs.empty()) report["test"]["mdice"] = mdice(pairs);
  report["score_reports"] = scores;
  return {report, model};
}

struct TrainToyOptions {
  fs::path config;
};

inline int train_toy(const TrainToyOptions& opt) {
  return guarded("train-toy", [&] {
    const ToyRunConfig cfg = toy_config_from_json(io::read_json(opt.config), opt.config.parent_path());
    const ToyRunResult result = run_toy(cfg);
    io::write_json(cfg.out_dir / "report.json", result.report);
    io::write_json(cfg.out_dir / "model.json", toy::checkpoint_to_json(result.model));
    log("train-toy: stage-1 loss " + std::to_string(result.report["stage1"]["initial_loss"].get<double>()) + " -> " +
        std::to_string(result.report["stage1"]["final_loss"].get<double>()));
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// make-synthetic

struct SyntheticOptions {
  fs::path out;
  std::size_t count = 20;
  std::size_t size = 64;
  std::uint64_t seed = 0;
  std::size_t test_count = 0;
};

/// Writes images/, annotations/, gt/ and manifest.json for a synthetic corpus.
inline int make_synthetic(const SyntheticOptions& opt) {
  return guarded("make-synthetic", [&] {
    toy::SyntheticSpec spec;
    spec.count = opt.count;
    spec.size = opt.size;
    spec.seed = opt.seed;
    const auto samples = toy::make_synthetic(spec);
    io::DatasetManifest manifest;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      MaskGrid img = s.image;
      for (double& v : img) v = std::clamp(v, 0.0, 1.0);
      io::write_mask(img, opt.out / "images" / (s.id + ".png"));
      LabelMap gt(s.gt->width(), s.gt->height(), 0);
      for (std::size_t k = 0; k < gt.size(); ++k) gt[k] = (*s.gt)[k] ? 255 : 0;
      io::write_mask(gt, opt.out / "gt" / (s.id + ".png"));
      io::AnnotationDoc doc;
      doc.image = s.id + ".png";
      doc.width = spec.size;
      doc.height = spec.size;
      doc.entries.push_back({1, s.cross->seg_ab, s.cross->seg_cd, std::nullopt});
      io::save_annotation(doc, opt.out / "annotations" / (s.id + ".json"));
      const bool is_test = i + opt.test_count >= samples.size();
      manifest.items.push_back({"images/" + s.id + ".png", "annotations/" + s.id + ".json", "gt/" + s.id + ".png",
                                is_test ? io::Split::Test : io::Split::Train});
    }
    io::write_json(opt.out / "manifest.json", io::to_json(manifest));
    log("make-synthetic: wrote " + std::to_string(samples.size()) + " sample(s) to " + opt.out.string());
    return kExitOk;
  });
}

}  // namespace crossmask::cli
