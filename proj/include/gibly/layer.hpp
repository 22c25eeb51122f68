#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <mutex>
#include <vector>

#include "gibly/composite.hpp"
#include "gibly/kernels.hpp"
#include "gibly/neighborhood.hpp"
#include "gibly/normalization.hpp"
#include "gibly/point_cloud.hpp"

namespace gibly {

// Cost centers of the forward pass, mirroring the benchmark table rows.
enum class Phase : int {
  Neighborhood = 0,
  Rotation = 1,
  Normalization = 2,
  GibEval = 3,
  Composite = 4,
  Other = 5,
};
inline constexpr int kPhaseCount = 6;

// Accumulates per-phase busy seconds; workers merge their local tallies.
class PhaseClock {
 public:
  void add(Phase phase, double seconds) {
    std::lock_guard<std::mutex> lock(mutex_);
    acc_[static_cast<int>(phase)] += seconds;
  }
  std::array<double, kPhaseCount> totals() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return acc_;
  }

 private:
  mutable std::mutex mutex_;
  std::array<double, kPhaseCount> acc_ = {};
};

struct GiblyConfig {
  ScaleSchedule schedule;
  int gibs_per_kind = 2;
  int num_composites = 16;
  int mc_samples = 256;
  int projection_dim = 16;
  RegularizerConfig reg;
  std::uint64_t global_seed = 0;
  int max_neighbors = 0;  // 0 = uncapped
  int workers = 1;
};

void validate_config(const GiblyConfig& config);

// Full parameter container: all GIB instances, the mixing matrix W, the
// output projection, and the per-scale Monte Carlo sample sets.
struct GiblyLayer {
  GiblyConfig config;
  int c_in = 0;
  std::vector<GibParams> gibs;  // 8 * gibs_per_kind, kind-major
  CompositeWeights weights;     // n x m
  Eigen::MatrixXd projection;   // (c_in + n*S) x projection_dim
  Eigen::VectorXd bias;         // projection_dim
  std::vector<McSampleSet> mc_sets;  // one per scale

  int gib_count() const { return static_cast<int>(gibs.size()); }
  int pre_projection_dim() const {
    return c_in + config.num_composites * config.schedule.num_scales;
  }
};

// Seeded construction; parameter ranges span the base neighborhood radius.
GiblyLayer make_layer(const GiblyConfig& config, int c_in);

struct ForwardResult {
  Eigen::MatrixXd features;        // N x projection_dim
  Eigen::MatrixXd pre_projection;  // N x (c_in + n*S)
};

// Intermediates retained for backward.
struct ForwardCache {
  std::vector<std::vector<std::vector<int>>> neighbors;  // [S][point]
  std::vector<Eigen::MatrixXd> raw_scores;               // [S], each N x m
  Eigen::MatrixXd pre_projection;                        // N x (c_in + n*S)
  int n_points = 0;
  int m_gibs = 0;
  int n_scales = 0;
  bool valid = false;
};

// Per query point, GIB instance and scale: mean normalized kernel response
// over the neighborhood, mixed by W into composites, concatenated with the
// input features and sent through the affine projection. Deterministic for
// any worker count.
ForwardResult forward(const GiblyLayer& layer, const PointCloud& cloud,
                      const NeighborhoodIndex& index,
                      ForwardCache* cache = nullptr,
                      PhaseClock* clock = nullptr);

struct LayerGrads {
  std::vector<GibGrad> gibs;
  Eigen::MatrixXd weights;  // includes the regularizer term
  Eigen::MatrixXd projection;
  Eigen::VectorXd bias;
};

// Exact derivatives of the implemented forward with respect to every
// learnable parameter, given the upstream gradient on the output features.
LayerGrads backward(const GiblyLayer& layer, const PointCloud& cloud,
                    const NeighborhoodIndex& index, const ForwardCache& cache,
                    const Eigen::MatrixXd& upstream);

// Clamps every GIB's shape parameters and wraps its angles. Idempotent.
void project_parameters(GiblyLayer& layer);

}  // namespace gibly
