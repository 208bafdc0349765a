// Command-line driver: restricted continued fractions via non-stationary
// transfer operators.  Experiments write CSV/JSON into the output directory;
// the exit status is 0 iff every executed check passed.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rcf/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"restricted continued fraction statistics"};
  app.set_help_flag("-h,--help", "print help");

  std::string config_path, experiment, preset, seed_range, out_dir, mode;
  bool show_presets = false;

  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--experiment", experiment,
                 "simulate|lil|moments|dimension|contraction|martingale|duality|condition|all");
  app.add_option("--preset", preset, "polynomial|geometric|doubly-exponential");
  app.add_option("--seed-range", seed_range, "inclusive range A..B");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--mode", mode, "sampler mode: product|operator");
  app.add_flag("--list-presets", show_presets, "print the shipped families and exit");

  long long n = -1, n_max = -1;
  double delta = -1, tol = -1;
  int depth = -1, width = -1, threads = -1, K = -1;
  app.add_option("-n,--length", n, "trajectory length / deepest level");
  app.add_option("--n-max", n_max, "martingale levels");
  app.add_option("--delta", delta, "growth-condition / dimension delta");
  app.add_option("--grid-depth", depth, "cylinder grid depth");
  app.add_option("--grid-width", width, "cylinder grid width");
  app.add_option("--tol", tol, "operator convergence tolerance");
  app.add_option("--threads", threads, "worker pool size (env CF_RESTRICTED_THREADS caps)");
  app.add_option("-K,--correction-steps", K, "operator-mode correction steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return (code == 0) ? 0 : 2;
  }

  if (show_presets) {
    std::cout << rcf::list_presets();
    return 0;
  }

  try {
    rcf::RunConfig cfg;
    if (!config_path.empty()) cfg = rcf::parse_config_file(config_path);
    if (!preset.empty()) cfg.family = rcf::preset_family(preset);
    if (!experiment.empty()) cfg.experiment = experiment;
    if (!seed_range.empty()) rcf::apply_config_line(cfg, "seeds", seed_range);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!mode.empty()) rcf::apply_config_line(cfg, "mode", mode);
    if (n > 0) cfg.n = n;
    if (n_max > 0) cfg.n_max = n_max;
    if (delta > 0) cfg.delta = delta;
    if (depth > 0) cfg.grid.depth = depth;
    if (width > 0) cfg.grid.width = width;
    if (tol > 0) cfg.grid.tol = tol;
    if (threads >= 0) cfg.threads = threads;
    if (K >= 0) cfg.K = K;
    return rcf::run_experiment(cfg, std::cout);
  } catch (const rcf::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
