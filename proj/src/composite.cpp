#include "gibly/composite.hpp"

#include <cmath>
#include <stdexcept>

#include "gibly/rng.hpp"

namespace gibly {

Eigen::VectorXd composite_scores(const CompositeWeights& weights,
                                 const Eigen::VectorXd& gib_scores) {
  if (weights.m() != gib_scores.size()) {
    throw std::invalid_argument("gib score vector length does not match W");
  }
  return weights.w * gib_scores;
}

std::pair<double, Eigen::MatrixXd> regularizer(const CompositeWeights& weights,
                                               const RegularizerConfig& cfg) {
  if (cfg.lambda_l1 < 0.0 || cfg.lambda_l2 < 0.0) {
    throw std::invalid_argument("regularizer coefficients must be >= 0");
  }
  double value = 0.0;
  Eigen::MatrixXd grad(weights.w.rows(), weights.w.cols());
  for (Eigen::Index i = 0; i < weights.w.rows(); ++i) {
    for (Eigen::Index j = 0; j < weights.w.cols(); ++j) {
      const double v = weights.w(i, j);
      const double sgn = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      value += cfg.lambda_l1 * std::abs(v) + cfg.lambda_l2 * v * v;
      grad(i, j) = cfg.lambda_l1 * sgn + 2.0 * cfg.lambda_l2 * v;
    }
  }
  return {value, grad};
}

CompositeWeights init_weights(int n, int m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw std::invalid_argument("n and m must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(m));
  Rng rng(seed);
  CompositeWeights weights;
  weights.w.resize(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      weights.w(i, j) = rng.uniform(-bound, bound);
    }
  }
  return weights;
}

}  // namespace gibly
