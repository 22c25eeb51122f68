#include "gibly/neighborhood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gibly {

void validate_schedule(const ScaleSchedule& schedule) {
  if (!(schedule.base_radius > 0.0)) {
    throw std::invalid_argument("base_radius must be positive");
  }
  if (!(schedule.factor > 1.0)) {
    throw std::invalid_argument("factor must exceed 1 (radii strictly increasing)");
  }
  if (schedule.num_scales < 1) {
    throw std::invalid_argument("num_scales must be at least 1");
  }
}

namespace {

inline std::int64_t cell_coord(double v, double cell_size) {
  return static_cast<std::int64_t>(std::floor(v / cell_size));
}

}  // namespace

std::int64_t NeighborhoodIndex::cell_key(std::int64_t cx, std::int64_t cy,
                                         std::int64_t cz) const {
  // 21 bits per axis, biased; clouds at desk scale stay far inside.
  const std::int64_t mask = (1LL << 21) - 1;
  return ((cx & mask) << 42) | ((cy & mask) << 21) | (cz & mask);
}

NeighborhoodIndex::NeighborhoodIndex(const PointCloud& cloud, double cell_size)
    : cell_size_(cell_size), points_(cloud.coords) {
  if (!(cell_size > 0.0)) {
    throw std::invalid_argument("cell_size must be positive");
  }
  validate_cloud(cloud);
  grid_.reserve(points_.size());
  for (int i = 0; i < static_cast<int>(points_.size()); ++i) {
    const Vec3& p = points_[i];
    grid_[cell_key(cell_coord(p.x, cell_size_), cell_coord(p.y, cell_size_),
                   cell_coord(p.z, cell_size_))]
        .push_back(i);
  }
}

void NeighborhoodIndex::radius_neighbors_into(const Vec3& query, double radius,
                                              std::vector<int>& out) const {
  if (!(radius > 0.0)) {
    throw std::invalid_argument("radius must be positive");
  }
  const double r_sq = radius * radius;
  const std::int64_t x0 = cell_coord(query.x - radius, cell_size_);
  const std::int64_t x1 = cell_coord(query.x + radius, cell_size_);
  const std::int64_t y0 = cell_coord(query.y - radius, cell_size_);
  const std::int64_t y1 = cell_coord(query.y + radius, cell_size_);
  const std::int64_t z0 = cell_coord(query.z - radius, cell_size_);
  const std::int64_t z1 = cell_coord(query.z + radius, cell_size_);
  const std::size_t first = out.size();
  for (std::int64_t cx = x0; cx <= x1; ++cx) {
    for (std::int64_t cy = y0; cy <= y1; ++cy) {
      for (std::int64_t cz = z0; cz <= z1; ++cz) {
        auto it = grid_.find(cell_key(cx, cy, cz));
        if (it == grid_.end()) continue;
        for (int i : it->second) {
          const Vec3 d = points_[i] - query;
          if (d.squared_norm() <= r_sq) out.push_back(i);
        }
      }
    }
  }
  std::sort(out.begin() + first, out.end());
}

std::vector<int> NeighborhoodIndex::radius_neighbors(const Vec3& query,
                                                     double radius) const {
  std::vector<int> out;
  radius_neighbors_into(query, radius, out);
  return out;
}

std::vector<int> farthest_point_sample(const PointCloud& cloud, int k,
                                       int seed_index) {
  validate_cloud(cloud);
  const int n = cloud.size();
  if (k < 1 || k > n) {
    throw std::invalid_argument("k out of range [1, N]");
  }
  if (seed_index < 0 || seed_index >= n) {
    throw std::invalid_argument("seed_index out of range");
  }

  std::vector<int> selected;
  selected.reserve(k);
  std::vector<double> min_dist_sq(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);

  int current = seed_index;
  for (int round = 0; round < k; ++round) {
    selected.push_back(current);
    taken[current] = 1;
    if (round + 1 == k) break;
    const Vec3 p = cloud.coords[current];
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double d = (cloud.coords[i] - p).squared_norm();
      if (d < min_dist_sq[i]) min_dist_sq[i] = d;
      if (min_dist_sq[i] > best_d) {  // strict > keeps the smallest index on ties
        best_d = min_dist_sq[i];
        best = i;
      }
    }
    current = best;
  }
  return selected;
}

std::vector<std::vector<std::vector<int>>> multi_scale_neighborhoods(
    const NeighborhoodIndex& index, const std::vector<Vec3>& queries,
    const ScaleSchedule& schedule, int max_neighbors) {
  validate_schedule(schedule);
  std::vector<std::vector<std::vector<int>>> result(queries.size());
  std::vector<int> scratch;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    result[q].resize(schedule.num_scales);
    for (int s = 0; s < schedule.num_scales; ++s) {
      scratch.clear();
      index.radius_neighbors_into(queries[q], schedule.radius(s), scratch);
      if (max_neighbors > 0 &&
          static_cast<int>(scratch.size()) > max_neighbors) {
        std::stable_sort(scratch.begin(), scratch.end(), [&](int a, int b) {
          const double da = (index.points()[a] - queries[q]).squared_norm();
          const double db = (index.points()[b] - queries[q]).squared_norm();
          return da != db ? da < db : a < b;
        });
        scratch.resize(max_neighbors);
        std::sort(scratch.begin(), scratch.end());
      }
      result[q][s] = scratch;
    }
  }
  return result;
}

}  // namespace gibly
