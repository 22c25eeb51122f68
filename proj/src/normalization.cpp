#include "gibly/normalization.hpp"

#include <stdexcept>

#include "gibly/rng.hpp"

namespace gibly {

McSampleSet make_mc_samples(int count, double r_ball, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  if (!(r_ball > 0.0)) throw std::invalid_argument("r_ball must be positive");

  McSampleSet mc;
  mc.r_ball = r_ball;
  mc.seed = seed;
  mc.samples.reserve(count);
  Rng rng(seed);
  while (static_cast<int>(mc.samples.size()) < count) {
    // Rejection from the enclosing cube; acceptance ~ pi/6.
    const Vec3 y{rng.uniform(-r_ball, r_ball), rng.uniform(-r_ball, r_ball),
                 rng.uniform(-r_ball, r_ball)};
    if (y.squared_norm() <= r_ball * r_ball) mc.samples.push_back(y);
  }
  return mc;
}

double omega(const PreparedGib& gib, const McSampleSet& mc) {
  if (mc.samples.empty()) throw std::invalid_argument("empty MC sample set");
  double sum = 0.0;
  for (const Vec3& y : mc.samples) sum += gib.eval(y);
  return sum;
}

double omega(const GibParams& params, const McSampleSet& mc) {
  return omega(PreparedGib(params), mc);
}

std::pair<double, GibGrad> omega_grad(const PreparedGib& gib,
                                      const McSampleSet& mc) {
  if (mc.samples.empty()) throw std::invalid_argument("empty MC sample set");
  double sum = 0.0;
  GibGrad total;
  GibGrad g;
  for (const Vec3& y : mc.samples) {
    sum += gib.eval_grad(y, g);
    total.axpy(g, 1.0);
  }
  return {sum, total};
}

double normalized_eval(const GibParams& params, const Vec3& offset,
                       const McSampleSet& mc) {
  const PreparedGib gib(params);
  return gib.eval(offset) - omega(gib, mc) / mc.count();
}

std::pair<double, GibGrad> normalized_eval_grad(const GibParams& params,
                                                const Vec3& offset,
                                                const McSampleSet& mc) {
  const PreparedGib gib(params);
  GibGrad point_grad;
  const double score = gib.eval_grad(offset, point_grad);
  auto [omega_value, omega_sum_grad] = omega_grad(gib, mc);
  const double inv_m = 1.0 / mc.count();
  point_grad.axpy(omega_sum_grad, -inv_m);
  return {score - omega_value * inv_m, point_grad};
}

}  // namespace gibly
