#pragma once

#include <array>
#include <string>

#include "gibly/layer.hpp"
#include "gibly/point_cloud.hpp"

namespace gibly {

// Wall time and fraction of the forward pass spent in each cost center.
struct PhaseTimings {
  std::array<double, kPhaseCount> seconds = {};
  std::array<double, kPhaseCount> fractions = {};
  double total_seconds = 0.0;

  double neighborhood_fraction() const {
    return fractions[static_cast<int>(Phase::Neighborhood)];
  }
};

extern const std::array<const char*, kPhaseCount> kPhaseNames;

// Runs the forward pass `repeats` times (the first is warm-up and
// discarded) and reports per-phase medians. repeats must be >= 3.
PhaseTimings run_benchmark(const PointCloud& cloud, const GiblyConfig& config,
                           int repeats);

// Plain-text table / CSV with one row per phase.
std::string format_timings_table(const PhaseTimings& timings);
std::string format_timings_csv(const PhaseTimings& timings);

// The benchmark input: a synthetic scene roughly 40 x 40 x 10 m, farthest
// point sampled down to `num_points`.
PointCloud make_benchmark_cloud(int num_points, std::uint64_t seed);

}  // namespace gibly
