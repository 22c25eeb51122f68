#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gibly/kernels.hpp"

namespace gibly {

// Fixed set of offsets sampled uniformly in the ball of radius r_ball,
// used to estimate a kernel's average response over the neighborhood.
// Regeneration with the same (count, r_ball, seed) is bit-identical.
struct McSampleSet {
  std::vector<Vec3> samples;
  double r_ball = 1.0;
  std::uint64_t seed = 0;

  int count() const { return static_cast<int>(samples.size()); }
};

McSampleSet make_mc_samples(int count, double r_ball, std::uint64_t seed);

// Cumulative alignment score over the sample set: Omega = sum_y psi(y).
double omega(const GibParams& params, const McSampleSet& mc);
double omega(const PreparedGib& gib, const McSampleSet& mc);

// Omega plus the summed parameter gradients over the sample set.
std::pair<double, GibGrad> omega_grad(const PreparedGib& gib,
                                      const McSampleSet& mc);

// psi~(x) = psi(x) - Omega / |MC|. Positive for offsets better aligned than
// the ball average, negative otherwise.
double normalized_eval(const GibParams& params, const Vec3& offset,
                       const McSampleSet& mc);

std::pair<double, GibGrad> normalized_eval_grad(const GibParams& params,
                                                const Vec3& offset,
                                                const McSampleSet& mc);

}  // namespace gibly
