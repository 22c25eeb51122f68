#include "gibly/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "gibly/neighborhood.hpp"
#include "gibly/rng.hpp"
#include "gibly/training.hpp"

namespace gibly {

const std::array<const char*, kPhaseCount> kPhaseNames = {
    "Neighborhood Computation", "R_phi Computation",
    "GIB Normalization",        "GIB Computation",
    "Composite Bias Computation", "Other operations"};

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

}  // namespace

PhaseTimings run_benchmark(const PointCloud& cloud, const GiblyConfig& config,
                           int repeats) {
  if (repeats < 3) throw std::invalid_argument("repeats must be >= 3");
  validate_cloud(cloud);
  validate_config(config);

  const GiblyLayer layer = make_layer(config, cloud.feature_dim());

  std::array<std::vector<double>, kPhaseCount> samples;
  std::vector<double> totals;
  for (int rep = 0; rep < repeats; ++rep) {
    PhaseClock clock;
    const auto t0 = Clock::now();
    // Grid construction is part of neighborhood computation.
    const auto t_index0 = Clock::now();
    const NeighborhoodIndex index =
        build_index(cloud, config.schedule.largest_radius());
    clock.add(Phase::Neighborhood,
              std::chrono::duration<double>(Clock::now() - t_index0).count());
    forward(layer, cloud, index, nullptr, &clock);
    const double wall =
        std::chrono::duration<double>(Clock::now() - t0).count();
    if (rep == 0) continue;  // warm-up

    const auto phase = clock.totals();
    double named = 0.0;
    for (int p = 0; p < kPhaseCount - 1; ++p) named += phase[p];
    for (int p = 0; p < kPhaseCount - 1; ++p) samples[p].push_back(phase[p]);
    // The residual row: everything the named phases do not cover.
    samples[kPhaseCount - 1].push_back(std::max(0.0, wall - named));
    totals.push_back(wall);
  }

  PhaseTimings out;
  double sum = 0.0;
  for (int p = 0; p < kPhaseCount; ++p) {
    out.seconds[p] = median(samples[p]);
    sum += out.seconds[p];
  }
  out.total_seconds = median(totals);
  for (int p = 0; p < kPhaseCount; ++p) out.fractions[p] = out.seconds[p] / sum;
  return out;
}

std::string format_timings_table(const PhaseTimings& timings) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-28s %12s %10s\n", "Operation",
                "Time (s)", "Fraction");
  out << line;
  for (int p = 0; p < kPhaseCount; ++p) {
    std::snprintf(line, sizeof(line), "%-28s %12.4f %9.2f%%\n", kPhaseNames[p],
                  timings.seconds[p], 100.0 * timings.fractions[p]);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-28s %12.4f %9.2f%%\n", "Total",
                timings.total_seconds, 100.0);
  out << line;
  return out.str();
}

std::string format_timings_csv(const PhaseTimings& timings) {
  std::ostringstream out;
  out << "operation,seconds,fraction\n";
  char line[128];
  for (int p = 0; p < kPhaseCount; ++p) {
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f\n", kPhaseNames[p],
                  timings.seconds[p], timings.fractions[p]);
    out << line;
  }
  return out.str();
}

PointCloud make_benchmark_cloud(int num_points, std::uint64_t seed) {
  if (num_points < 1) throw std::invalid_argument("num_points must be >= 1");
  // Outdoor-style tile: a ground slab, tower cylinders, tree cones and
  // vegetation blobs scattered over roughly 40 x 40 x 10 m.
  const int pre_fps = static_cast<int>(std::ceil(num_points * 1.05));
  SyntheticSceneSpec spec;
  spec.seed = derive_seed(seed, 0);
  Rng placer(derive_seed(seed, 1));

  auto remaining = [&]() {
    int total = 0;
    for (const auto& prim : spec.primitives) total += prim.count;
    return pre_fps - total;
  };

  {
    ScenePrimitive ground;
    ground.kind = PrimitiveKind::Box;
    ground.label = 0;
    ground.count = pre_fps / 2;
    ground.center = {20.0, 20.0, 0.1};
    ground.extents = {40.0, 40.0, 0.2};
    ground.noise_sigma = 0.02;
    spec.primitives.push_back(ground);
  }
  for (int i = 0; i < 24; ++i) {  // vegetation blobs
    ScenePrimitive blob;
    blob.kind = PrimitiveKind::Ellipsoid;
    blob.label = 1;
    blob.count = pre_fps / 100;
    blob.center = {placer.uniform(2.0, 38.0), placer.uniform(2.0, 38.0),
                   placer.uniform(0.5, 3.0)};
    blob.extents = {placer.uniform(0.5, 2.0), placer.uniform(0.5, 2.0),
                    placer.uniform(0.5, 1.5)};
    blob.surface = true;
    blob.noise_sigma = 0.05;
    spec.primitives.push_back(blob);
  }
  for (int i = 0; i < 12; ++i) {  // tree crowns
    ScenePrimitive cone;
    cone.kind = PrimitiveKind::Cone;
    cone.label = 2;
    cone.count = pre_fps / 100;
    cone.center = {placer.uniform(2.0, 38.0), placer.uniform(2.0, 38.0),
                   placer.uniform(2.0, 6.0)};
    cone.orientation = {M_PI, 0.0, 0.0};  // opening downward
    cone.radius = placer.uniform(0.8, 1.6);
    cone.height = placer.uniform(1.5, 3.0);
    cone.surface = true;
    cone.noise_sigma = 0.03;
    spec.primitives.push_back(cone);
  }
  for (int i = 0; i < 8; ++i) {  // towers / trunks
    ScenePrimitive pole;
    pole.kind = PrimitiveKind::Cylinder;
    pole.label = 3;
    pole.count = pre_fps / 150;
    pole.center = {placer.uniform(2.0, 38.0), placer.uniform(2.0, 38.0), 4.0};
    pole.radius = placer.uniform(0.2, 0.6);
    pole.height = 8.0;
    pole.surface = true;
    pole.noise_sigma = 0.02;
    spec.primitives.push_back(pole);
  }
  {
    ScenePrimitive wire;  // a long horizontal span
    wire.kind = PrimitiveKind::Cylinder;
    wire.label = 4;
    wire.count = std::max(1, remaining());
    wire.center = {20.0, 20.0, 9.0};
    wire.orientation = {0.0, M_PI / 2.0, 0.0};
    wire.radius = 0.05;
    wire.height = 36.0;
    wire.surface = true;
    wire.noise_sigma = 0.02;
    spec.primitives.push_back(wire);
  }

  PointCloud scene = generate_scene(spec);
  const std::vector<int> keep = farthest_point_sample(
      scene, std::min(num_points, scene.size()), 0);
  PointCloud sampled;
  sampled.coords.reserve(keep.size());
  sampled.labels.reserve(keep.size());
  for (int idx : keep) {
    sampled.coords.push_back(scene.coords[idx]);
    sampled.labels.push_back(scene.labels[idx]);
  }
  return sampled;
}

}  // namespace gibly
