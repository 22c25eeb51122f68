#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gibly/bench.hpp"
#include "gibly/config.hpp"
#include "gibly/io.hpp"
#include "gibly/layer.hpp"
#include "gibly/neighborhood.hpp"
#include "gibly/rng.hpp"
#include "gibly/scene_spec.hpp"
#include "gibly/training.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;

struct ConfigCliArgs {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

// One flag per config key; flags override the config file.
void add_config_flags(CLI::App* cmd, ConfigCliArgs& args) {
  cmd->add_option("--config", args.config_path, "TOML-style config file");
  static const char* keys[] = {
      "base_radius",   "radius_factor", "num_scales",  "gibs_per_kind",
      "num_composites", "mc_samples",   "projection_dim", "lambda_l1",
      "lambda_l2",     "max_neighbors", "workers",     "seed",
      "epochs",        "learning_rate", "weight_decay"};
  for (const char* key : keys) {
    std::string flag = "--";
    for (const char* c = key; *c; ++c) flag += *c == '_' ? '-' : *c;
    cmd->add_option_function<std::string>(
        flag,
        [&args, key](const std::string& value) {
          args.overrides.emplace_back(key, value);
        },
        std::string("override config key ") + key);
  }
}

gibly::CliConfig resolve_config(const ConfigCliArgs& args) {
  gibly::CliConfig config;
  if (!args.config_path.empty()) {
    config = gibly::load_config_file(args.config_path);
  }
  for (const auto& [key, value] : args.overrides) {
    gibly::apply_config_key(config, key, value);
  }
  return config;
}

gibly::PointCloud load_cloud_or_exit(const std::string& path) {
  try {
    return gibly::read_cloud(path);
  } catch (const gibly::ParseError& e) {
    std::cerr << "error: " << path << ": " << e.what() << "\n";
    std::exit(kExitParse);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::exit(kExitParse);
  }
}

int run_synth(const std::string& spec_path, const std::string& out_path,
              bool has_seed, std::uint64_t seed) {
  gibly::SyntheticSceneSpec spec = gibly::load_scene_spec(spec_path);
  if (has_seed) spec.seed = seed;
  const gibly::PointCloud cloud = gibly::generate_scene(spec);
  gibly::write_cloud(cloud, out_path);
  std::cout << "wrote " << cloud.size() << " points to " << out_path << "\n";
  return kExitOk;
}

int run_extract(const std::string& cloud_path, const gibly::CliConfig& config,
                const std::string& features_path,
                const std::string& pre_projection_path) {
  const gibly::PointCloud cloud = load_cloud_or_exit(cloud_path);
  const gibly::GiblyLayer layer =
      gibly::make_layer(config.layer, cloud.feature_dim());
  const gibly::NeighborhoodIndex index =
      gibly::build_index(cloud, config.layer.schedule.largest_radius());
  const gibly::ForwardResult result = gibly::forward(layer, cloud, index);
  if (!features_path.empty()) {
    gibly::write_features(result.features, features_path);
    std::cout << "wrote " << result.features.rows() << "x"
              << result.features.cols() << " features to " << features_path
              << "\n";
  }
  if (!pre_projection_path.empty()) {
    gibly::write_features(result.pre_projection, pre_projection_path);
    std::cout << "wrote " << result.pre_projection.rows() << "x"
              << result.pre_projection.cols() << " pre-projection features to "
              << pre_projection_path << "\n";
  }
  return kExitOk;
}

gibly::FitMask parse_trainable(const std::string& list) {
  gibly::FitMask mask;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "r") mask.r = true;
    else if (item == "t") mask.t = true;
    else if (item == "beta") mask.beta = true;
    else if (item == "w") mask.w = true;
    else if (item == "angles") mask.angles = true;
    else if (item == "ell") mask.ell_scales = true;
    else throw gibly::ConfigError("unknown trainable field: '" + item + "'");
  }
  return mask;
}

gibly::RotationAngles parse_angles(const std::string& csv) {
  std::stringstream ss(csv);
  std::string item;
  std::vector<double> vals;
  while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
  if (vals.size() != 3) {
    throw gibly::ConfigError("--angles expects 'x,y,z' radians");
  }
  return {vals[0], vals[1], vals[2]};
}

int run_fit(const std::string& cloud_path, const std::string& kind,
            const std::string& trainable, int steps, double lr,
            const std::string& report_path, double r0, double t0, double beta0,
            double w0, const std::string& angles, int mc_samples,
            std::uint64_t mc_seed) {
  gibly::GibParams params;
  params.kind = gibly::gib_kind_from_string(kind);  // reject bad kinds early
  const gibly::PointCloud cloud = load_cloud_or_exit(cloud_path);
  params.r = r0;
  params.t = t0;
  params.beta = beta0;
  params.w = w0;
  if (!angles.empty()) params.angles = parse_angles(angles);

  const gibly::FitMask mask = parse_trainable(trainable);
  const gibly::FitResult result =
      gibly::fit_shape(cloud, params, mask, steps, lr, mc_samples, mc_seed);

  std::printf("objective: initial %.9g final %.9g\n", result.objective.front(),
              result.objective.back());
  std::printf("fitted: r %.9g t %.9g beta %.9g w %.9g angles %.9g %.9g %.9g\n",
              result.params.r, result.params.t, result.params.beta,
              result.params.w, result.params.angles.phi_x,
              result.params.angles.phi_y, result.params.angles.phi_z);
  if (!report_path.empty()) {
    gibly::write_fit_report_csv(result, report_path);
    std::cout << "wrote trajectory to " << report_path << "\n";
  }
  return kExitOk;
}

int run_train(const std::string& scene_path, const gibly::CliConfig& config,
              const std::string& report_path, const std::string& params_path) {
  const gibly::PointCloud scene = load_cloud_or_exit(scene_path);
  const gibly::TrainReport report =
      gibly::train_segmenter(scene, config.layer, config.train_options());
  const gibly::EpochMetrics& g = report.gibly_epochs.back();
  const gibly::EpochMetrics& b = report.baseline_epochs.back();
  std::printf("gibly:    loss %.6f accuracy %.4f miou %.4f\n", g.loss,
              g.accuracy, g.miou);
  std::printf("baseline: loss %.6f accuracy %.4f miou %.4f\n", b.loss,
              b.accuracy, b.miou);
  if (!report_path.empty()) {
    gibly::write_train_report_csv(report, report_path);
    std::cout << "wrote report to " << report_path << "\n";
  }
  if (!params_path.empty()) {
    gibly::write_layer_params(report.trained_layer, params_path);
    std::cout << "wrote parameters to " << params_path << "\n";
  }
  return kExitOk;
}

int run_gradcheck(const gibly::CliConfig& config, int points, int scenes,
                  double step, double tolerance) {
  bool all_pass = true;
  for (int s = 0; s < scenes; ++s) {
    const gibly::GradcheckReport report = gibly::layer_gradcheck(
        config.layer, points, gibly::derive_seed(config.layer.global_seed, 1000 + s),
        step, tolerance);
    std::printf("scene %d: max rel error %.3e (%zu parameters) %s\n", s,
                report.max_rel_error, report.rel_errors.size(),
                report.pass ? "PASS" : "FAIL");
    all_pass &= report.pass;
  }
  return all_pass ? kExitOk : kExitCheckFailed;
}

int run_bench(const gibly::CliConfig& config, int points, int repeats,
              std::string csv_path) {
  const gibly::PointCloud cloud =
      gibly::make_benchmark_cloud(points, config.layer.global_seed);
  std::cout << "benchmark cloud: " << cloud.size() << " points\n";
  const gibly::PhaseTimings timings =
      gibly::run_benchmark(cloud, config.layer, repeats);
  std::cout << gibly::format_timings_table(timings);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    out << gibly::format_timings_csv(timings);
    std::cout << "wrote CSV to " << csv_path << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GIBLy geometric inductive bias layer"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled cloud");
  std::string synth_spec, synth_out;
  std::uint64_t synth_seed = 0;
  synth->add_option("spec", synth_spec, "scene spec JSON")->required();
  synth->add_option("--out", synth_out, "output cloud path")->required();
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "override spec seed");

  // extract
  auto* extract = app.add_subcommand("extract", "compute GIBLy features");
  std::string extract_cloud, extract_features, extract_pre;
  ConfigCliArgs extract_cfg;
  extract->add_option("cloud", extract_cloud, "input cloud")->required();
  extract->add_option("--out-features", extract_features, "features CSV");
  extract->add_option("--out-pre-projection", extract_pre,
                      "pre-projection features CSV");
  add_config_flags(extract, extract_cfg);

  // fit
  auto* fit = app.add_subcommand("fit", "fit one GIB to a cloud");
  std::string fit_cloud, fit_kind, fit_trainable = "r", fit_report, fit_angles;
  int fit_steps = 200, fit_mc = 256;
  double fit_lr = 1e-2, fit_r = 0.2, fit_t = 0.1, fit_beta = 0.25, fit_w = 0.2;
  std::uint64_t fit_seed = 1234;
  fit->add_option("cloud", fit_cloud, "input cloud")->required();
  fit->add_option("--kind", fit_kind, "GIB kind")->required();
  fit->add_option("--trainable", fit_trainable,
                  "comma list of r,t,beta,w,angles,ell");
  fit->add_option("--steps", fit_steps, "ascent steps");
  fit->add_option("--lr", fit_lr, "learning rate");
  fit->add_option("--report", fit_report, "trajectory CSV path");
  fit->add_option("--r", fit_r, "initial radius");
  fit->add_option("--t", fit_t, "initial thickness");
  fit->add_option("--beta", fit_beta, "initial cone slope");
  fit->add_option("--w", fit_w, "initial disk width");
  fit->add_option("--angles", fit_angles, "initial angles 'x,y,z'");
  fit->add_option("--mc-samples", fit_mc, "MC sample count");
  fit->add_option("--seed", fit_seed, "MC seed");

  // train
  auto* train = app.add_subcommand("train", "train segmenter + baseline");
  std::string train_scene, train_report, train_params;
  ConfigCliArgs train_cfg;
  train->add_option("scene", train_scene, "labeled scene cloud")->required();
  train->add_option("--report", train_report, "per-epoch metrics CSV");
  train->add_option("--params-out", train_params, "trained parameter dump");
  add_config_flags(train, train_cfg);

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference oracle");
  int gc_points = 30, gc_scenes = 3;
  double gc_step = 1e-5, gc_tolerance = 1e-4;
  ConfigCliArgs gc_cfg;
  gradcheck->add_option("--points", gc_points, "points per scene");
  gradcheck->add_option("--scenes", gc_scenes, "number of scenes");
  gradcheck->add_option("--step", gc_step, "finite-difference step");
  gradcheck->add_option("--tolerance", gc_tolerance, "max relative error");
  add_config_flags(gradcheck, gc_cfg);

  // bench
  auto* bench = app.add_subcommand("bench", "phase timing breakdown");
  int bench_points = 100000, bench_repeats = 5;
  std::string bench_csv;
  ConfigCliArgs bench_cfg;
  bench->add_option("--points", bench_points, "cloud size after FPS");
  bench->add_option("--repeats", bench_repeats, "timing repeats (>= 3)");
  bench->add_option("--csv", bench_csv, "also write CSV");
  add_config_flags(bench, bench_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      return run_synth(synth_spec, synth_out, synth_seed_opt->count() > 0,
                       synth_seed);
    }
    if (extract->parsed()) {
      return run_extract(extract_cloud, resolve_config(extract_cfg),
                         extract_features, extract_pre);
    }
    if (fit->parsed()) {
      return run_fit(fit_cloud, fit_kind, fit_trainable, fit_steps, fit_lr,
                     fit_report, fit_r, fit_t, fit_beta, fit_w, fit_angles,
                     fit_mc, fit_seed);
    }
    if (train->parsed()) {
      return run_train(train_scene, resolve_config(train_cfg), train_report,
                       train_params);
    }
    if (gradcheck->parsed()) {
      return run_gradcheck(resolve_config(gc_cfg), gc_points, gc_scenes,
                           gc_step, gc_tolerance);
    }
    if (bench->parsed()) {
      return run_bench(resolve_config(bench_cfg), bench_points, bench_repeats,
                       bench_csv);
    }
  } catch (const gibly::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const gibly::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
