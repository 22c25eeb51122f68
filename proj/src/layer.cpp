#include "gibly/layer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "gibly/rng.hpp"

namespace gibly {

namespace {

constexpr int kBlockSize = 64;

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double inverse_positive_scale(double target) {
  // Inverse of positive_scale: target = softplus(raw) + floor.
  return std::log(std::expm1(target - kEllipsoidEigenFloor));
}

struct BlockScratch {
  std::vector<int> nb_indices;          // pair-major neighbor indices
  std::vector<int> range_begin;         // per (pt, scale)
  std::vector<int> range_end;           // per (pt, scale)
  std::vector<Vec3> offsets;            // per pair
  std::vector<CanonicalOffset> canon;   // per (gib, pair), gib-major
  std::vector<double> scores;           // per (pt, scale, gib)
  std::vector<int> query_scratch;
};

}  // namespace

void validate_config(const GiblyConfig& config) {
  validate_schedule(config.schedule);
  if (config.gibs_per_kind < 1)
    throw std::invalid_argument("gibs_per_kind must be >= 1");
  if (config.num_composites < 1)
    throw std::invalid_argument("num_composites must be >= 1");
  if (config.mc_samples < 1)
    throw std::invalid_argument("mc_samples must be >= 1");
  if (config.projection_dim < 1)
    throw std::invalid_argument("projection_dim must be >= 1");
  if (config.max_neighbors < 0)
    throw std::invalid_argument("max_neighbors must be >= 0");
  if (config.workers < 1)
    throw std::invalid_argument("workers must be >= 1");
  if (config.reg.lambda_l1 < 0.0 || config.reg.lambda_l2 < 0.0)
    throw std::invalid_argument("regularizer coefficients must be >= 0");
}

GiblyLayer make_layer(const GiblyConfig& config, int c_in) {
  validate_config(config);
  if (c_in < 0) throw std::invalid_argument("c_in must be >= 0");

  GiblyLayer layer;
  layer.config = config;
  layer.c_in = c_in;

  const double base = config.schedule.base_radius;
  Rng rng(derive_seed(config.global_seed, 0));
  layer.gibs.reserve(8 * config.gibs_per_kind);
  for (GibKind kind : kAllGibKinds) {
    for (int inst = 0; inst < config.gibs_per_kind; ++inst) {
      GibParams p;
      p.kind = kind;
      p.r = rng.uniform(0.1, 1.0) * base;
      p.t = rng.uniform(0.1, 1.0) * base;
      p.w = rng.uniform(0.1, 1.0) * base;
      p.beta = rng.uniform(0.05, 0.45);
      p.angles.phi_x = M_PI - 2.0 * M_PI * rng.uniform();
      p.angles.phi_y = M_PI - 2.0 * M_PI * rng.uniform();
      p.angles.phi_z = M_PI - 2.0 * M_PI * rng.uniform();
      for (int i = 0; i < 3; ++i) {
        p.ell_scales[i] = inverse_positive_scale(rng.uniform(0.5, 2.0));
      }
      clamp_params(p);
      layer.gibs.push_back(p);
    }
  }

  layer.weights = init_weights(config.num_composites, layer.gib_count(),
                               derive_seed(config.global_seed, 1));

  const int fan_in = layer.pre_projection_dim();
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Rng proj_rng(derive_seed(config.global_seed, 2));
  layer.projection.resize(fan_in, config.projection_dim);
  for (int i = 0; i < fan_in; ++i) {
    for (int j = 0; j < config.projection_dim; ++j) {
      layer.projection(i, j) = proj_rng.uniform(-bound, bound);
    }
  }
  layer.bias = Eigen::VectorXd::Zero(config.projection_dim);

  layer.mc_sets.reserve(config.schedule.num_scales);
  for (int s = 0; s < config.schedule.num_scales; ++s) {
    layer.mc_sets.push_back(make_mc_samples(
        config.mc_samples, config.schedule.radius(s),
        derive_seed(config.global_seed, 16 + static_cast<std::uint64_t>(s))));
  }
  return layer;
}

void project_parameters(GiblyLayer& layer) {
  for (GibParams& p : layer.gibs) clamp_params(p);
}

ForwardResult forward(const GiblyLayer& layer, const PointCloud& cloud,
                      const NeighborhoodIndex& index, ForwardCache* cache,
                      PhaseClock* clock) {
  validate_cloud(cloud);
  if (index.point_count() != cloud.size()) {
    throw std::invalid_argument("neighborhood index does not match cloud");
  }
  if (cloud.feature_dim() != layer.c_in) {
    throw std::invalid_argument("cloud feature width does not match layer");
  }

  const int n_points = cloud.size();
  const int n_scales = layer.config.schedule.num_scales;
  const int m = layer.gib_count();
  const int n = layer.config.num_composites;
  const int pre_dim = layer.pre_projection_dim();
  const ScaleSchedule& schedule = layer.config.schedule;
  const int cap = layer.config.max_neighbors;

  // Rotation matrices and per-kind constants, one per GIB.
  auto t0 = Clock::now();
  std::vector<PreparedGib> prepared;
  prepared.reserve(m);
  for (const GibParams& p : layer.gibs) prepared.emplace_back(p);
  double t_rot_serial = seconds_since(t0);

  // Per (gib, scale) mean kernel response over the MC ball.
  t0 = Clock::now();
  Eigen::MatrixXd mc_mean(m, n_scales);
  for (int j = 0; j < m; ++j) {
    for (int s = 0; s < n_scales; ++s) {
      mc_mean(j, s) =
          omega(prepared[j], layer.mc_sets[s]) / layer.mc_sets[s].count();
    }
  }
  const double t_norm = seconds_since(t0);

  Eigen::MatrixXd pre(n_points, pre_dim);

  if (cache != nullptr) {
    cache->neighbors.assign(n_scales, std::vector<std::vector<int>>(n_points));
    cache->raw_scores.assign(n_scales, Eigen::MatrixXd(n_points, m));
    cache->n_points = n_points;
    cache->m_gibs = m;
    cache->n_scales = n_scales;
    cache->valid = false;
  }

  const int block_count = (n_points + kBlockSize - 1) / kBlockSize;
  std::atomic<int> next_block{0};
  std::mutex clock_mutex;
  double t_nbhd = 0.0, t_rot = t_rot_serial, t_gib = 0.0, t_comp = 0.0;

  auto worker_fn = [&]() {
    BlockScratch scratch;
    double local_nbhd = 0.0, local_rot = 0.0, local_gib = 0.0,
           local_comp = 0.0;
    Eigen::VectorXd gib_vec(m);
    for (;;) {
      const int block = next_block.fetch_add(1);
      if (block >= block_count) break;
      const int begin = block * kBlockSize;
      const int end = std::min(begin + kBlockSize, n_points);
      const int count = end - begin;

      // Neighborhood queries at every scale.
      auto tp = Clock::now();
      scratch.nb_indices.clear();
      scratch.range_begin.assign(count * n_scales, 0);
      scratch.range_end.assign(count * n_scales, 0);
      for (int p = 0; p < count; ++p) {
        const Vec3& q = cloud.coords[begin + p];
        for (int s = 0; s < n_scales; ++s) {
          scratch.range_begin[p * n_scales + s] =
              static_cast<int>(scratch.nb_indices.size());
          if (cap > 0) {
            scratch.query_scratch.clear();
            index.radius_neighbors_into(q, schedule.radius(s),
                                        scratch.query_scratch);
            if (static_cast<int>(scratch.query_scratch.size()) > cap) {
              std::stable_sort(
                  scratch.query_scratch.begin(), scratch.query_scratch.end(),
                  [&](int a, int b) {
                    const double da = (cloud.coords[a] - q).squared_norm();
                    const double db = (cloud.coords[b] - q).squared_norm();
                    return da != db ? da < db : a < b;
                  });
              scratch.query_scratch.resize(cap);
              std::sort(scratch.query_scratch.begin(),
                        scratch.query_scratch.end());
            }
            scratch.nb_indices.insert(scratch.nb_indices.end(),
                                      scratch.query_scratch.begin(),
                                      scratch.query_scratch.end());
          } else {
            index.radius_neighbors_into(q, schedule.radius(s),
                                        scratch.nb_indices);
          }
          scratch.range_end[p * n_scales + s] =
              static_cast<int>(scratch.nb_indices.size());
        }
      }
      local_nbhd += seconds_since(tp);

      // Offsets and canonical projections for every (pair, gib).
      tp = Clock::now();
      const int pairs = static_cast<int>(scratch.nb_indices.size());
      scratch.offsets.resize(pairs);
      for (int p = 0; p < count; ++p) {
        const Vec3& q = cloud.coords[begin + p];
        const int lo = scratch.range_begin[p * n_scales];
        const int hi = scratch.range_end[p * n_scales + n_scales - 1];
        for (int k = lo; k < hi; ++k) {
          scratch.offsets[k] = cloud.coords[scratch.nb_indices[k]] - q;
        }
      }
      scratch.canon.resize(static_cast<std::size_t>(m) * pairs);
      for (int j = 0; j < m; ++j) {
        const Mat3& rot = prepared[j].rotation();
        CanonicalOffset* out = scratch.canon.data() +
                               static_cast<std::size_t>(j) * pairs;
        for (int k = 0; k < pairs; ++k) {
          out[k] = rotate_offset(rot, scratch.offsets[k]);
        }
      }
      local_rot += seconds_since(tp);

      // Kernel evaluations and per-neighborhood means.
      tp = Clock::now();
      scratch.scores.assign(static_cast<std::size_t>(count) * n_scales * m,
                            0.0);
      for (int j = 0; j < m; ++j) {
        const PreparedGib& gib = prepared[j];
        const CanonicalOffset* zs =
            scratch.canon.data() + static_cast<std::size_t>(j) * pairs;
        for (int p = 0; p < count; ++p) {
          for (int s = 0; s < n_scales; ++s) {
            const int lo = scratch.range_begin[p * n_scales + s];
            const int hi = scratch.range_end[p * n_scales + s];
            double sum = 0.0;
            for (int k = lo; k < hi; ++k) sum += gib.eval_canonical(zs[k]);
            const double mean =
                hi > lo ? sum / (hi - lo) - mc_mean(j, s) : -mc_mean(j, s);
            scratch.scores[(static_cast<std::size_t>(p) * n_scales + s) * m +
                           j] = mean;
          }
        }
      }
      local_gib += seconds_since(tp);

      // Composite mixing into the pre-projection rows.
      tp = Clock::now();
      for (int p = 0; p < count; ++p) {
        for (int s = 0; s < n_scales; ++s) {
          for (int j = 0; j < m; ++j) {
            gib_vec(j) =
                scratch.scores[(static_cast<std::size_t>(p) * n_scales + s) *
                                   m +
                               j];
          }
          pre.row(begin + p).segment(layer.c_in + s * n, n) =
              (layer.weights.w * gib_vec).transpose();
          if (cache != nullptr) {
            cache->raw_scores[s].row(begin + p) = gib_vec.transpose();
          }
        }
      }
      local_comp += seconds_since(tp);

      if (cache != nullptr) {
        for (int p = 0; p < count; ++p) {
          for (int s = 0; s < n_scales; ++s) {
            const int lo = scratch.range_begin[p * n_scales + s];
            const int hi = scratch.range_end[p * n_scales + s];
            cache->neighbors[s][begin + p].assign(
                scratch.nb_indices.begin() + lo, scratch.nb_indices.begin() + hi);
          }
        }
      }
    }
    std::lock_guard<std::mutex> lock(clock_mutex);
    t_nbhd += local_nbhd;
    t_rot += local_rot;
    t_gib += local_gib;
    t_comp += local_comp;
  };

  const int workers = std::max(1, layer.config.workers);
  if (workers == 1) {
    worker_fn();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
    for (std::thread& th : pool) th.join();
  }

  // Input-feature concatenation and the affine projection.
  t0 = Clock::now();
  if (layer.c_in > 0) pre.leftCols(layer.c_in) = cloud.features;
  ForwardResult result;
  result.features = pre * layer.projection;
  result.features.rowwise() += layer.bias.transpose();
  result.pre_projection = pre;
  const double t_other = seconds_since(t0);

  if (cache != nullptr) {
    cache->pre_projection = pre;
    cache->valid = true;
  }
  if (clock != nullptr) {
    clock->add(Phase::Neighborhood, t_nbhd);
    clock->add(Phase::Rotation, t_rot);
    clock->add(Phase::Normalization, t_norm);
    clock->add(Phase::GibEval, t_gib);
    clock->add(Phase::Composite, t_comp);
    clock->add(Phase::Other, t_other);
  }
  return result;
}

LayerGrads backward(const GiblyLayer& layer, const PointCloud& cloud,
                    const NeighborhoodIndex& index, const ForwardCache& cache,
                    const Eigen::MatrixXd& upstream) {
  const int n_points = cloud.size();
  const int n_scales = layer.config.schedule.num_scales;
  const int m = layer.gib_count();
  const int n = layer.config.num_composites;
  if (!cache.valid || cache.n_points != n_points || cache.m_gibs != m ||
      cache.n_scales != n_scales) {
    throw std::invalid_argument("stale forward cache");
  }
  if (index.point_count() != n_points) {
    throw std::invalid_argument("neighborhood index does not match cloud");
  }
  if (upstream.rows() != n_points ||
      upstream.cols() != layer.config.projection_dim) {
    throw std::invalid_argument("upstream gradient has wrong shape");
  }

  LayerGrads grads;
  grads.gibs.assign(m, GibGrad{});
  grads.weights = Eigen::MatrixXd::Zero(n, m);

  // Affine projection block.
  grads.projection = cache.pre_projection.transpose() * upstream;
  grads.bias = upstream.colwise().sum();
  const Eigen::MatrixXd d_pre = upstream * layer.projection.transpose();

  // Composite block: per scale, dL/dW and dL/dg.
  std::vector<Eigen::MatrixXd> d_scores(n_scales);
  for (int s = 0; s < n_scales; ++s) {
    const Eigen::MatrixXd dc = d_pre.middleCols(layer.c_in + s * n, n);
    grads.weights += dc.transpose() * cache.raw_scores[s];
    d_scores[s] = dc * layer.weights.w;  // N x m
  }

  std::vector<PreparedGib> prepared;
  prepared.reserve(m);
  for (const GibParams& p : layer.gibs) prepared.emplace_back(p);

  // The MC mean is subtracted from every score, so its parameter gradient
  // enters with the negated total score weight.
  for (int j = 0; j < m; ++j) {
    for (int s = 0; s < n_scales; ++s) {
      const double coef = -d_scores[s].col(j).sum();
      if (coef == 0.0) continue;
      auto [omega_value, omega_sum] = omega_grad(prepared[j], layer.mc_sets[s]);
      (void)omega_value;
      grads.gibs[j].axpy(omega_sum, coef / layer.mc_sets[s].count());
    }
  }

  // Per-pair kernel gradients, reduced in block order for determinism.
  const int block_count = (n_points + kBlockSize - 1) / kBlockSize;
  std::vector<std::vector<GibGrad>> block_partials(
      block_count, std::vector<GibGrad>(m));
  std::atomic<int> next_block{0};

  auto worker_fn = [&]() {
    GibGrad pair_grad;
    for (;;) {
      const int block = next_block.fetch_add(1);
      if (block >= block_count) break;
      const int begin = block * kBlockSize;
      const int end = std::min(begin + kBlockSize, n_points);
      std::vector<GibGrad>& partial = block_partials[block];
      for (int i = begin; i < end; ++i) {
        const Vec3& q = cloud.coords[i];
        for (int s = 0; s < n_scales; ++s) {
          const std::vector<int>& nbrs = cache.neighbors[s][i];
          if (nbrs.empty()) continue;
          const double inv_count = 1.0 / static_cast<double>(nbrs.size());
          for (int idx : nbrs) {
            const Vec3 offset = cloud.coords[idx] - q;
            for (int j = 0; j < m; ++j) {
              const double weight = d_scores[s](i, j) * inv_count;
              if (weight == 0.0) continue;
              prepared[j].eval_grad(offset, pair_grad);
              partial[j].axpy(pair_grad, weight);
            }
          }
        }
      }
    }
  };

  const int workers = std::max(1, layer.config.workers);
  if (workers == 1) {
    worker_fn();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
    for (std::thread& th : pool) th.join();
  }
  for (int b = 0; b < block_count; ++b) {
    for (int j = 0; j < m; ++j) grads.gibs[j].axpy(block_partials[b][j], 1.0);
  }

  grads.weights += regularizer(layer.weights, layer.config.reg).second;
  return grads;
}

}  // namespace gibly
