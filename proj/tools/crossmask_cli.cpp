#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>

#include "crossmask/commands.hpp"
#include "crossmask/service.hpp"

namespace {

namespace cli = crossmask::cli;

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

crossmask::SigmaSpec parse_sigma(const std::string& s) { return crossmask::SigmaSpec::parse(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-scribble pseudo-mask toolkit"};
  app.require_subcommand(1);

  std::string op = "mul", sigma = "inf";

  cli::GenmaskOptions gen;
  auto* genmask = app.add_subcommand("genmask", "Render pseudo masks from annotation files");
  genmask->add_option("--annotations", gen.annotations, "Directory of annotation JSON files")->required();
  genmask->add_option("--out", gen.out, "Output directory")->required();
  genmask->add_option("--op", op, "Weight operator")->check(CLI::IsMember({"mul", "add", "max"}));
  genmask->add_option("--sigma-ratio", sigma, "Sigma to arm-length ratio, or 'inf' for binary masks");
  genmask->add_option("--shrink", gen.shrink, "Shrink rate in [0, 1)")->check(CLI::Range(0.0, 0.999999));
  genmask->add_flag("--combine", gen.combine, "Also write a combined label map per image");
  genmask->add_flag("--float", gen.float_export, "Also write raw float masks (.f32)");
  genmask->add_option("--jobs", gen.jobs, "Worker threads")->check(CLI::PositiveNumber);
  std::uint64_t unused_seed = 0;
  genmask->add_option("--seed", unused_seed, "Accepted for symmetry; rendering is deterministic");

  cli::CalibrateOptions cal;
  auto* calibrate = app.add_subcommand("calibrate", "Derive size thresholds from pseudo masks");
  calibrate->add_option("--masks", cal.masks, "Directory of *_cat<k>.png masks")->required()->check(CLI::ExistingDirectory);
  calibrate->add_option("--out", cal.out, "Threshold JSON file")->required();

  cli::EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "Dice and mDice of predictions against ground truth");
  evaluate->add_option("--pred", ev.pred, "Prediction mask directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--gt", ev.gt, "Ground-truth mask directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--report", ev.report, "Report JSON file")->required();

  cli::StatsOptions st;
  std::string stats_gt;
  auto* stats = app.add_subcommand("stats", "Annotated-rate and coverage statistics");
  stats->add_option("--manifest", st.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  stats->add_option("--gt", stats_gt, "Ground-truth directory (overrides manifest refs)");
  stats->add_option("--report", st.report, "Report JSON file")->required();

  cli::ShrinkOptions sh;
  std::string shrink_gt;
  auto* shrink = app.add_subcommand("simulate-shrink", "Area and error change under endpoint shrinkage");
  shrink->add_option("--annotations", sh.annotations, "Directory of annotation JSON files")->required();
  shrink->add_option("--rates", sh.rates, "Shrink rates")->required()->delimiter(',');
  shrink->add_option("--gt", shrink_gt, "Ground-truth directory");
  shrink->add_option("--report", sh.report, "Report JSON file")->required();
  shrink->add_option("--op", op, "Weight operator")->check(CLI::IsMember({"mul", "add", "max"}));
  shrink->add_option("--sigma-ratio", sigma, "Sigma to arm-length ratio, or 'inf'");

  cli::TrainToyOptions tt;
  auto* train = app.add_subcommand("train-toy", "Two-stage training of the toy per-pixel model");
  train->add_option("--config", tt.config, "Training config JSON")->required()->check(CLI::ExistingFile);

  cli::SyntheticOptions syn;
  auto* synth = app.add_subcommand("make-synthetic", "Write a synthetic annotated corpus");
  synth->add_option("--out", syn.out, "Output directory")->required();
  synth->add_option("--count", syn.count, "Number of images")->check(CLI::PositiveNumber);
  synth->add_option("--size", syn.size, "Image side length")->check(CLI::Range(16, 4096));
  synth->add_option("--seed", syn.seed, "Random seed");
  synth->add_option("--test", syn.test_count, "How many of the images go to the test split");

  std::string root, thresholds_file, host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP backend for the annotation UI");
  serve->add_option("--root", root, "Image root directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--thresholds", thresholds_file, "Threshold JSON for branch hints")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitValidation;
  }

  try {
    const auto mask_op = crossmask::parse_mask_op(op);
    if (*genmask) {
      gen.op = mask_op;
      gen.sigma = parse_sigma(sigma);
      return cli::genmask(gen);
    }
    if (*calibrate) return cli::calibrate(cal);
    if (*evaluate) return cli::evaluate(ev);
    if (*stats) {
      if (!stats_gt.empty()) st.gt = stats_gt;
      return cli::stats(st);
    }
    if (*shrink) {
      sh.op = mask_op;
      sh.sigma = parse_sigma(sigma);
      if (!shrink_gt.empty()) sh.gt = shrink_gt;
      return cli::simulate_shrink(sh);
    }
    if (*train) return cli::train_toy(tt);
    if (*synth) return cli::make_synthetic(syn);
    if (*serve) {
      std::optional<crossmask::ThresholdTable> table;
      if (!thresholds_file.empty()) table = crossmask::thresholds_from_json(crossmask::io::read_json(thresholds_file));
      crossmask::service::AnnotationService service(root, table);
      httplib::Server server;
      service.mount(server);
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      cli::log("serve: listening on " + host + ":" + std::to_string(port));
      if (!server.listen(host, port)) {
        cli::log("serve: could not bind " + host + ":" + std::to_string(port));
        return cli::kExitRuntime;
      }
      return cli::kExitOk;
    }
  } catch (const crossmask::Error& e) {
    cli::log(e.what());
    return cli::exit_code_for(e.kind());
  }
  return cli::kExitValidation;
}
