// Acceptance suite: runs every criterion end to end and prints one
// PASS/FAIL line per criterion. Exit code 0 only if all pass.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gibly/bench.hpp"
#include "gibly/io.hpp"
#include "gibly/layer.hpp"
#include "gibly/neighborhood.hpp"
#include "gibly/normalization.hpp"
#include "gibly/rng.hpp"
#include "gibly/training.hpp"

using namespace gibly;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared helpers

GibParams random_kernel_params(GibKind kind, Rng& rng) {
  GibParams p;
  p.kind = kind;
  p.r = rng.uniform(0.1, 1.2);
  p.t = rng.uniform(0.05, 0.6);
  p.beta = rng.uniform(0.05, 0.45);
  p.w = rng.uniform(-0.8, 0.8);
  p.angles = {rng.uniform(-M_PI, M_PI), rng.uniform(-M_PI, M_PI),
              rng.uniform(-M_PI, M_PI)};
  for (int i = 0; i < 3; ++i) p.ell_scales[i] = rng.uniform(-1.0, 1.5);
  return p;
}

// Central differences are undefined on the kernels' subgradient kinks;
// sample offsets with a margin (mirrors the documented conventions).
Vec3 random_safe_offset(const GibParams& p, Rng& rng) {
  const PreparedGib gib(p);
  for (;;) {
    Vec3 o{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
           rng.uniform(-1.5, 1.5)};
    const CanonicalOffset z = gib.canonicalize(o);
    const double guard = 1e-2;
    if (kind_uses_beta(p.kind) && std::abs(z.z3 - kMinConeHeight) < guard)
      continue;
    const bool hollow_radial = p.kind == GibKind::HollowCylinder ||
                               p.kind == GibKind::HollowCone ||
                               p.kind == GibKind::HollowDisk;
    if (hollow_radial && z.rho() < guard) continue;
    if (kind_uses_w(p.kind) && std::abs(p.w - z.z3) < guard) continue;
    if (p.kind == GibKind::HollowEllipsoid) {
      double q = 0.0;
      const double zz[3] = {z.z1, z.z2, z.z3};
      for (int i = 0; i < 3; ++i)
        q += positive_scale(p.ell_scales[i]) * zz[i] * zz[i];
      if (std::sqrt(q) < guard) continue;
    }
    return o;
  }
}

double param_slot(const GibParams& p, int slot) {
  switch (slot) {
    case 0: return p.r;
    case 1: return p.t;
    case 2: return p.beta;
    case 3: return p.w;
    case 4: return p.ell_scales[0];
    case 5: return p.ell_scales[1];
    case 6: return p.ell_scales[2];
    case 7: return p.angles.phi_x;
    case 8: return p.angles.phi_y;
    default: return p.angles.phi_z;
  }
}

void set_param_slot(GibParams& p, int slot, double v) {
  switch (slot) {
    case 0: p.r = v; break;
    case 1: p.t = v; break;
    case 2: p.beta = v; break;
    case 3: p.w = v; break;
    case 4: p.ell_scales[0] = v; break;
    case 5: p.ell_scales[1] = v; break;
    case 6: p.ell_scales[2] = v; break;
    case 7: p.angles.phi_x = v; break;
    case 8: p.angles.phi_y = v; break;
    default: p.angles.phi_z = v; break;
  }
}

double grad_slot(const GibGrad& g, int slot) {
  switch (slot) {
    case 0: return g.d_r;
    case 1: return g.d_t;
    case 2: return g.d_beta;
    case 3: return g.d_w;
    case 4: return g.d_ell_scales[0];
    case 5: return g.d_ell_scales[1];
    case 6: return g.d_ell_scales[2];
    case 7: return g.d_angles[0];
    case 8: return g.d_angles[1];
    default: return g.d_angles[2];
  }
}

// The criterion-6 fixture: four interleaved primitive classes, 5000 points
// each, noise sigma 0.01.
PointCloud four_class_scene(std::uint64_t seed) {
  SyntheticSceneSpec spec;
  spec.seed = derive_seed(seed, 0);
  Rng place(derive_seed(seed, 1));
  auto center = [&]() -> Vec3 {
    return {place.uniform(0.0, 10.0), place.uniform(0.0, 10.0),
            place.uniform(0.0, 3.0)};
  };
  auto pose = [&]() -> RotationAngles {
    return {place.uniform(-M_PI, M_PI), place.uniform(-M_PI, M_PI),
            place.uniform(-M_PI, M_PI)};
  };
  for (int i = 0; i < 5; ++i) {
    ScenePrimitive cyl;
    cyl.kind = PrimitiveKind::Cylinder;
    cyl.label = 0;
    cyl.count = 1000;
    cyl.center = center();
    cyl.orientation = pose();
    cyl.radius = place.uniform(0.15, 0.35);
    cyl.height = place.uniform(1.5, 3.0);
    cyl.surface = true;
    cyl.noise_sigma = 0.01;
    spec.primitives.push_back(cyl);

    ScenePrimitive cone;
    cone.kind = PrimitiveKind::Cone;
    cone.label = 1;
    cone.count = 1000;
    cone.center = center();
    cone.orientation = pose();
    cone.radius = place.uniform(0.4, 0.8);
    cone.height = place.uniform(1.0, 2.0);
    cone.surface = true;
    cone.noise_sigma = 0.01;
    spec.primitives.push_back(cone);

    ScenePrimitive disk;
    disk.kind = PrimitiveKind::Disk;
    disk.label = 2;
    disk.count = 1000;
    disk.center = center();
    disk.orientation = pose();
    disk.radius = place.uniform(0.5, 1.0);
    disk.surface = true;
    disk.noise_sigma = 0.01;
    spec.primitives.push_back(disk);

    ScenePrimitive ell;
    ell.kind = PrimitiveKind::Ellipsoid;
    ell.label = 3;
    ell.count = 1000;
    ell.center = center();
    ell.orientation = pose();
    ell.extents = {place.uniform(0.3, 0.7), place.uniform(0.3, 0.7),
                   place.uniform(0.3, 0.7)};
    ell.surface = false;
    ell.noise_sigma = 0.01;
    spec.primitives.push_back(ell);
  }
  return generate_scene(spec);
}

// The criterion-7 fixture: surface cylinders against box noise.
PointCloud cylinder_noise_scene(std::uint64_t seed) {
  SyntheticSceneSpec spec;
  spec.seed = derive_seed(seed, 0);
  Rng place(derive_seed(seed, 1));
  for (int i = 0; i < 3; ++i) {
    ScenePrimitive cyl;
    cyl.kind = PrimitiveKind::Cylinder;
    cyl.label = 1;
    cyl.count = 1000;
    cyl.center = {place.uniform(0.0, 6.0), place.uniform(0.0, 6.0),
                  place.uniform(0.0, 2.0)};
    cyl.orientation = {place.uniform(-M_PI, M_PI), place.uniform(-M_PI, M_PI),
                       place.uniform(-M_PI, M_PI)};
    cyl.radius = place.uniform(0.15, 0.3);
    cyl.height = place.uniform(2.0, 3.0);
    cyl.surface = true;
    cyl.noise_sigma = 0.01;
    spec.primitives.push_back(cyl);
  }
  ScenePrimitive noise;
  noise.kind = PrimitiveKind::Box;
  noise.label = 0;
  noise.count = 3000;
  noise.center = {3.0, 3.0, 1.0};
  noise.extents = {8.0, 8.0, 4.0};
  noise.noise_sigma = 0.01;
  spec.primitives.push_back(noise);
  return generate_scene(spec);
}

GiblyConfig training_config(std::uint64_t seed) {
  GiblyConfig cfg;  // reference defaults: S=3, base 0.4, factor 2, 16 comps
  cfg.projection_dim = 16;
  cfg.max_neighbors = 32;  // bounds per-epoch cost on dense surfaces
  cfg.global_seed = seed;
  return cfg;
}

struct CriterionResult {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Criterion 1: gradient oracle

CriterionResult criterion_gradient_oracle() {
  const auto t0 = Clock::now();
  Rng rng(20260809);

  int kernel_failures = 0;
  double worst_kernel = 0.0;
  for (int i = 0; i < 200; ++i) {
    const GibKind kind = kAllGibKinds[i % 8];
    const GibParams p = random_kernel_params(kind, rng);
    const Vec3 o = random_safe_offset(p, rng);
    GibGrad grad;
    PreparedGib(p).eval_grad(o, grad);
    const double step = 1e-5;
    for (int slot = 0; slot < 10; ++slot) {
      GibParams up = p, down = p;
      set_param_slot(up, slot, param_slot(p, slot) + step);
      set_param_slot(down, slot, param_slot(p, slot) - step);
      const double fd = (eval_gib(up, o) - eval_gib(down, o)) / (2.0 * step);
      const double a = grad_slot(grad, slot);
      const double mag = std::max(std::abs(a), std::abs(fd));
      if (mag < 1e-3) {
        if (std::abs(a - fd) >= 1e-8) ++kernel_failures;
      } else {
        const double rel = std::abs(a - fd) / mag;
        worst_kernel = std::max(worst_kernel, rel);
        if (rel >= 1e-5) ++kernel_failures;
      }
    }
  }

  GiblyConfig cfg;
  cfg.num_composites = 8;
  cfg.mc_samples = 64;
  cfg.projection_dim = 4;
  int layer_failures = 0;
  double worst_layer = 0.0;
  for (int scene = 0; scene < 20; ++scene) {
    cfg.global_seed = derive_seed(99, scene);
    const int points = 30 + (scene * 7) % 21;  // 30..50
    const GradcheckReport report =
        layer_gradcheck(cfg, points, derive_seed(7777, scene), 1e-5, 1e-4);
    worst_layer = std::max(worst_layer, report.max_rel_error);
    if (!report.pass) ++layer_failures;
  }

  const double elapsed = seconds_since(t0);
  CriterionResult result;
  result.pass = kernel_failures == 0 && layer_failures == 0 && elapsed < 60.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "200 kernel configs (worst rel %.2e), 20 layer scenes "
                "(worst rel %.2e), %.1fs < 60s",
                worst_kernel, worst_layer, elapsed);
  result.detail = buf;
  return result;
}

// ---------------------------------------------------------------------------
// Criterion 2: normalization zero-mean

CriterionResult criterion_zero_mean() {
  const auto t0 = Clock::now();
  Rng rng(31337);
  double worst = 0.0;
  const int m = 256;
  for (GibKind kind : kAllGibKinds) {
    for (int draw = 0; draw < 10; ++draw) {
      const GibParams p = random_kernel_params(kind, rng);
      const McSampleSet mc = make_mc_samples(
          m, rng.uniform(0.4, 1.6),
          derive_seed(555, static_cast<int>(kind) * 16 + draw));
      double sum = 0.0;
      for (const Vec3& y : mc.samples) sum += normalized_eval(p, y, mc);
      worst = std::max(worst, std::abs(sum));
    }
  }
  const double elapsed = seconds_since(t0);
  CriterionResult result;
  result.pass = worst <= 1e-10 * m && elapsed < 5.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "worst |sum psi~| = %.2e (limit %.1e), %.1fs < 5s", worst,
                1e-10 * m, elapsed);
  result.detail = buf;
  return result;
}

// ---------------------------------------------------------------------------
// Criterion 3: exact invariances

CriterionResult criterion_invariances() {
  const auto t0 = Clock::now();

  // Translation: dyadic cloud + dyadic shift leave pre-projection features
  // bit-identical.
  GiblyConfig cfg;
  cfg.mc_samples = 32;
  cfg.projection_dim = 8;
  cfg.global_seed = 17;
  const GiblyLayer layer = make_layer(cfg, 0);
  PointCloud cloud;
  Rng rng(271828);
  for (int i = 0; i < 80; ++i) {
    auto snap = [&]() {
      return std::floor(rng.uniform(-2.0, 2.0) * 65536.0) / 65536.0;
    };
    cloud.coords.push_back({snap(), snap(), snap()});
  }
  PointCloud shifted = cloud;
  const Vec3 t{18.0, -7.25, 106.5};
  for (Vec3& p : shifted.coords) p = p + t;
  const ForwardResult a =
      forward(layer, cloud, build_index(cloud, cfg.schedule.largest_radius()));
  const ForwardResult b = forward(
      layer, shifted, build_index(shifted, cfg.schedule.largest_radius()));
  bool translation_exact = true;
  for (Eigen::Index i = 0; i < a.pre_projection.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.pre_projection.cols(); ++j) {
      translation_exact &= a.pre_projection(i, j) == b.pre_projection(i, j);
    }
  }

  // Rotation consistency per kernel within 1e-13.
  double worst_rot = 0.0;
  for (GibKind kind : kAllGibKinds) {
    for (int i = 0; i < 40; ++i) {
      const GibParams p = random_kernel_params(kind, rng);
      const Vec3 o{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2),
                   rng.uniform(-1.2, 1.2)};
      GibParams aligned = p;
      aligned.angles = {0, 0, 0};
      const Eigen::Vector3d pre = rotation_matrix(p.angles).transpose() *
                                  Eigen::Vector3d(o.x, o.y, o.z);
      const double diff = std::abs(
          eval_gib(p, o) - eval_gib(aligned, {pre.x(), pre.y(), pre.z()}));
      worst_rot = std::max(worst_rot, diff);
    }
  }

  const double elapsed = seconds_since(t0);
  CriterionResult result;
  result.pass = translation_exact && worst_rot < 1e-13 && elapsed < 10.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "translation bit-exact: %s, rotation worst diff %.2e < 1e-13, "
                "%.1fs < 10s",
                translation_exact ? "yes" : "NO", worst_rot, elapsed);
  result.detail = buf;
  return result;
}

// ---------------------------------------------------------------------------
// Criterion 4: neighborhood exactness

std::vector<int> brute_force_neighbors(const PointCloud& cloud,
                                       const Vec3& query, double radius) {
  std::vector<int> out;
  for (int i = 0; i < cloud.size(); ++i) {
    if ((cloud.coords[i] - query).squared_norm() <= radius * radius) {
      out.push_back(i);
    }
  }
  return out;
}

// Independent greedy FPS oracle (same tie rule: smallest index wins).
std::vector<int> fps_oracle(const PointCloud& cloud, int k, int seed_index) {
  const int n = cloud.size();
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  std::vector<int> out{seed_index};
  taken[seed_index] = 1;
  while (static_cast<int>(out.size()) < k) {
    const Vec3& latest = cloud.coords[out.back()];
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_d[i] = std::min(min_d[i], (cloud.coords[i] - latest).squared_norm());
    }
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < n; ++i) {
      if (taken[i] || min_d[i] <= best_d) continue;
      best = i;
      best_d = min_d[i];
    }
    taken[best] = 1;
    out.push_back(best);
  }
  return out;
}

CriterionResult criterion_neighborhood_exactness() {
  const auto t0 = Clock::now();
  Rng rng(424242);
  int mismatches = 0;
  for (int c = 0; c < 100; ++c) {
    const int n = 50 + static_cast<int>(rng.next_u64() % 4951);  // <= 5000
    const double spread = rng.uniform(0.5, 4.0);
    PointCloud cloud;
    for (int i = 0; i < n; ++i) {
      cloud.coords.push_back({rng.uniform(-spread, spread),
                              rng.uniform(-spread, spread),
                              rng.uniform(-spread, spread)});
    }
    const double cell = rng.uniform(0.1, 1.2) * spread;
    const NeighborhoodIndex index = build_index(cloud, cell);
    for (int q = 0; q < 25; ++q) {
      const Vec3 query{rng.uniform(-1.2 * spread, 1.2 * spread),
                       rng.uniform(-1.2 * spread, 1.2 * spread),
                       rng.uniform(-1.2 * spread, 1.2 * spread)};
      const double radius = rng.uniform(0.05, 1.5) * spread;
      if (index.radius_neighbors(query, radius) !=
          brute_force_neighbors(cloud, query, radius)) {
        ++mismatches;
      }
    }
  }

  int fps_mismatches = 0;
  for (int c = 0; c < 10; ++c) {
    const int n = 100 + static_cast<int>(rng.next_u64() % 1400);
    PointCloud cloud;
    for (int i = 0; i < n; ++i) {
      cloud.coords.push_back(
          {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
    }
    const int k = 1 + static_cast<int>(rng.next_u64() % 64);
    if (farthest_point_sample(cloud, k, 0) != fps_oracle(cloud, k, 0)) {
      ++fps_mismatches;
    }
  }

  const double elapsed = seconds_since(t0);
  CriterionResult result;
  result.pass = mismatches == 0 && fps_mismatches == 0 && elapsed < 30.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "100 clouds x 25 radius queries: %d mismatches; FPS oracle: "
                "%d mismatches; %.1fs < 30s",
                mismatches, fps_mismatches, elapsed);
  result.detail = buf;
  return result;
}

// ---------------------------------------------------------------------------
// Criterion 5: radius recovery

CriterionResult criterion_radius_recovery() {
  const auto t0 = Clock::now();
  SyntheticSceneSpec spec;
  spec.seed = 31;
  ScenePrimitive prim;
  prim.kind = PrimitiveKind::Cylinder;
  prim.count = 2000;
  prim.radius = 0.5;
  prim.height = 4.0;
  prim.surface = true;
  spec.primitives.push_back(prim);
  const PointCloud cloud = generate_scene(spec);

  // 1-D scan oracle over r before trusting the descent.
  GibParams p;
  p.kind = GibKind::HollowCylinder;
  p.t = 0.1;
  p.angles = {0, 0, 0};
  double best_r = 0.0, best_j = -1e300;
  for (double r = 0.10; r <= 1.001; r += 0.01) {
    p.r = r;
    const double j = fit_objective(cloud, p);
    if (j > best_j) {
      best_j = j;
      best_r = r;
    }
  }
  const bool scan_ok = best_r > 0.45 && best_r < 0.55;

  p.r = 0.2;
  FitMask mask;
  mask.r = true;
  const FitResult fit = fit_shape(cloud, p, mask, 500, 1e-2);
  const bool fit_ok = fit.params.r > 0.48 && fit.params.r < 0.52;

  const double elapsed = seconds_since(t0);
  CriterionResult result;
  result.pass = scan_ok && fit_ok && elapsed < 30.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "scan peak at r=%.2f, fitted r=%.4f in [0.48, 0.52]: %s, "
                "%.1fs < 30s",
                best_r, fit.params.r, fit_ok ? "yes" : "NO", elapsed);
  result.detail = buf;
  return result;
}

// ---------------------------------------------------------------------------
// Criteria 6 and 7: segmentation uplift and interpretability

// Golden threshold frozen from the oracle run (observed margin ~ +22 points
// at these seeds); the target for the comparison is >= +10 accuracy points.
constexpr double kAccuracyUpliftThreshold = 0.10;

struct TrainingOutcome {
  TrainReport report;
  double seconds = 0.0;
};

TrainingOutcome run_uplift_training() {
  TrainingOutcome outcome;
  const PointCloud scene = four_class_scene(2026);
  const auto t0 = Clock::now();
  TrainOptions opts;
  opts.epochs = 15;
  opts.learning_rate = 1e-2;
  opts.seed = 1;
  outcome.report = train_segmenter(scene, training_config(1), opts);
  outcome.seconds = seconds_since(t0);
  return outcome;
}

CriterionResult criterion_uplift(const TrainingOutcome& outcome) {
  const EpochMetrics& g = outcome.report.gibly_epochs.back();
  const EpochMetrics& b = outcome.report.baseline_epochs.back();
  const double margin = g.accuracy - b.accuracy;
  CriterionResult result;
  result.pass = g.accuracy > b.accuracy && g.miou > b.miou &&
                margin >= kAccuracyUpliftThreshold && outcome.seconds < 300.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "gibly acc %.3f miou %.3f vs baseline acc %.3f miou %.3f, "
                "margin %+.1f pts (need >= +10), %.0fs < 300s",
                g.accuracy, g.miou, b.accuracy, b.miou, 100.0 * margin,
                outcome.seconds);
  result.detail = buf;
  return result;
}

CriterionResult criterion_interpretability(double budget_used) {
  const auto t0 = Clock::now();
  const PointCloud scene = cylinder_noise_scene(4099);
  TrainOptions opts;
  opts.epochs = 15;
  opts.learning_rate = 1e-2;
  opts.seed = 2;
  const TrainReport report = train_segmenter(scene, training_config(2), opts);

  const GiblyLayer& layer = report.trained_layer;
  const NeighborhoodIndex index =
      build_index(scene, layer.config.schedule.largest_radius());
  const ForwardResult out = forward(layer, scene, index);

  // Most class-discriminative composite: largest standardized mean gap of a
  // pre-projection composite column between the two classes.
  const int n = layer.config.num_composites;
  const int cols = n * layer.config.schedule.num_scales;
  double best_score = -1.0;
  int best_composite = -1;
  for (int c = 0; c < cols; ++c) {
    const int col = layer.c_in + c;
    double m0 = 0, m1 = 0, c0 = 0, c1 = 0;
    for (int i = 0; i < scene.size(); ++i) {
      if (scene.labels[i] == 0) {
        m0 += out.pre_projection(i, col);
        c0 += 1;
      } else {
        m1 += out.pre_projection(i, col);
        c1 += 1;
      }
    }
    m0 /= c0;
    m1 /= c1;
    double var = 0;
    for (int i = 0; i < scene.size(); ++i) {
      const double d =
          out.pre_projection(i, col) - (scene.labels[i] == 0 ? m0 : m1);
      var += d * d;
    }
    var /= scene.size();
    const double score = std::abs(m1 - m0) / (std::sqrt(var) + 1e-12);
    if (score > best_score) {
      best_score = score;
      best_composite = c % n;
    }
  }

  int best_gib = 0;
  for (int j = 1; j < layer.weights.m(); ++j) {
    if (std::abs(layer.weights.w(best_composite, j)) >
        std::abs(layer.weights.w(best_composite, best_gib))) {
      best_gib = j;
    }
  }
  const GibKind kind = layer.gibs[best_gib].kind;
  const bool cylinder_family =
      kind == GibKind::Cylinder || kind == GibKind::HollowCylinder;

  const double elapsed = seconds_since(t0);
  CriterionResult result;
  result.pass = cylinder_family && (budget_used + elapsed) < 300.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "top |W| of the most discriminative composite selects %s "
                "(%s), %.0fs combined < 300s",
                to_string(kind).c_str(),
                cylinder_family ? "cylinder family" : "NOT cylinder family",
                budget_used + elapsed);
  result.detail = buf;
  return result;
}

// ---------------------------------------------------------------------------
// Criterion 8: timing structure

CriterionResult criterion_timing() {
  const auto t0 = Clock::now();
  const PointCloud cloud = make_benchmark_cloud(100000, 7);
  GiblyConfig cfg;  // reference defaults
  cfg.global_seed = 7;
  const PhaseTimings timings = run_benchmark(cloud, cfg, 3);

  double sum = 0.0;
  int largest = 0;
  for (int p = 0; p < kPhaseCount; ++p) {
    sum += timings.fractions[p];
    if (timings.fractions[p] > timings.fractions[largest]) largest = p;
  }
  const bool sums_to_one = std::abs(sum - 1.0) <= 1e-6;
  const bool neighborhood_largest =
      largest == static_cast<int>(Phase::Neighborhood);
  const bool above_40 = timings.neighborhood_fraction() > 0.40;

  const double elapsed = seconds_since(t0);
  CriterionResult result;
  result.pass =
      sums_to_one && neighborhood_largest && above_40 && elapsed < 180.0;
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "fractions sum %.8f (ok: %s); neighborhood %.1f%% "
                "(largest: %s, >40%%: %s; largest is '%s' at %.1f%%), "
                "%.0fs < 180s",
                sum, sums_to_one ? "yes" : "NO",
                100.0 * timings.neighborhood_fraction(),
                neighborhood_largest ? "yes" : "NO", above_40 ? "yes" : "NO",
                kPhaseNames[largest], 100.0 * timings.fractions[largest],
                elapsed);
  result.detail = buf;
  return result;
}

// ---------------------------------------------------------------------------
// Criterion 9: CLI determinism

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GIBLY_CLI_PATH) + " " + args +
                          " > acceptance_cli_out.txt 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CriterionResult criterion_determinism() {
  const auto t0 = Clock::now();

  // A compact labeled scene written once, shared by extract and train.
  PointCloud scene = cylinder_noise_scene(888);
  {
    const std::vector<int> keep = farthest_point_sample(scene, 1200, 0);
    PointCloud small;
    for (int idx : keep) {
      small.coords.push_back(scene.coords[idx]);
      small.labels.push_back(scene.labels[idx]);
    }
    scene = small;
  }
  write_cloud(scene, "acceptance_scene.xyz");

  bool ok = true;
  std::string why;

  const std::string extract_common =
      "extract acceptance_scene.xyz --seed 11 --mc-samples 64 ";
  ok &= run_cli(extract_common +
                "--workers 1 --out-features acc_f1.csv "
                "--out-pre-projection acc_p1.csv") == 0;
  ok &= run_cli(extract_common +
                "--workers 1 --out-features acc_f2.csv "
                "--out-pre-projection acc_p2.csv") == 0;
  ok &= run_cli(extract_common +
                "--workers 8 --out-features acc_f8.csv "
                "--out-pre-projection acc_p8.csv") == 0;
  if (!ok) why = "extract run failed; ";
  const std::string f1 = slurp("acc_f1.csv");
  if (f1.empty() || f1 != slurp("acc_f2.csv")) {
    ok = false;
    why += "extract rerun differs; ";
  }
  if (f1 != slurp("acc_f8.csv") || slurp("acc_p1.csv") != slurp("acc_p8.csv")) {
    ok = false;
    why += "extract workers 1 vs 8 differ; ";
  }

  const std::string train_common =
      "train acceptance_scene.xyz --seed 11 --mc-samples 64 --epochs 4 "
      "--max-neighbors 24 ";
  ok &= run_cli(train_common + "--workers 1 --report acc_t1.csv") == 0;
  ok &= run_cli(train_common + "--workers 1 --report acc_t2.csv") == 0;
  ok &= run_cli(train_common + "--workers 8 --report acc_t8.csv") == 0;
  const std::string t1 = slurp("acc_t1.csv");
  if (t1.empty() || t1 != slurp("acc_t2.csv")) {
    ok = false;
    why += "train rerun differs; ";
  }
  if (t1 != slurp("acc_t8.csv")) {
    ok = false;
    why += "train workers 1 vs 8 differ; ";
  }

  const double elapsed = seconds_since(t0);
  CriterionResult result;
  result.pass = ok && elapsed < 120.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s%.0fs < 120s",
                ok ? "extract and train byte-identical across reruns and "
                     "workers 1 vs 8, "
                   : why.c_str(),
                elapsed);
  result.detail = buf;
  return result;
}

void report_line(int number, const char* name, const CriterionResult& result,
                 int& failures) {
  std::printf("[%s] criterion %d: %s (%s)\n", result.pass ? "PASS" : "FAIL",
              number, name, result.detail.c_str());
  std::fflush(stdout);
  failures += result.pass ? 0 : 1;
}

}  // namespace

int main() {
  int failures = 0;
  report_line(1, "gradient oracle", criterion_gradient_oracle(), failures);
  report_line(2, "normalization zero-mean", criterion_zero_mean(), failures);
  report_line(3, "exact invariances", criterion_invariances(), failures);
  report_line(4, "neighborhood exactness", criterion_neighborhood_exactness(),
              failures);
  report_line(5, "radius recovery", criterion_radius_recovery(), failures);
  const TrainingOutcome uplift = run_uplift_training();
  report_line(6, "synthetic segmentation uplift", criterion_uplift(uplift),
              failures);
  report_line(7, "interpretability", criterion_interpretability(uplift.seconds),
              failures);
  report_line(8, "timing structure", criterion_timing(), failures);
  report_line(9, "determinism", criterion_determinism(), failures);

  if (failures == 0) {
    std::printf("all criteria passed\n");
  } else {
    std::printf("%d criteria failed\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
