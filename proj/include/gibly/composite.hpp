#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

namespace gibly {

// Learnable mixing matrix W (n composites x m GIB instances).
struct CompositeWeights {
  Eigen::MatrixXd w;

  int n() const { return static_cast<int>(w.rows()); }
  int m() const { return static_cast<int>(w.cols()); }
};

struct RegularizerConfig {
  double lambda_l1 = 1e-4;
  double lambda_l2 = 1e-4;
};

// gamma = W * gib_scores.
Eigen::VectorXd composite_scores(const CompositeWeights& weights,
                                 const Eigen::VectorXd& gib_scores);

// L1 sparsity plus L2 magnitude penalty and its (sub)gradient, sign(0) = 0.
std::pair<double, Eigen::MatrixXd> regularizer(const CompositeWeights& weights,
                                               const RegularizerConfig& cfg);

// Entries i.i.d. uniform(-1/sqrt(m), 1/sqrt(m)), deterministic in seed.
CompositeWeights init_weights(int n, int m, std::uint64_t seed);

}  // namespace gibly
