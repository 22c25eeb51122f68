#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "gibly/point_cloud.hpp"

namespace gibly {

// Geometrically increasing query radii: radius(s) = base_radius * factor^s.
struct ScaleSchedule {
  double base_radius = 0.4;
  double factor = 2.0;
  int num_scales = 3;

  double radius(int scale) const {
    double r = base_radius;
    for (int s = 0; s < scale; ++s) r *= factor;
    return r;
  }
  double largest_radius() const { return radius(num_scales - 1); }
};

void validate_schedule(const ScaleSchedule& schedule);

// Uniform-grid spatial index answering radius queries exactly. Immutable
// once built; queries are safe from any number of threads.
class NeighborhoodIndex {
 public:
  NeighborhoodIndex(const PointCloud& cloud, double cell_size);

  // Indices i with ||p_i - query|| <= radius, ascending.
  std::vector<int> radius_neighbors(const Vec3& query, double radius) const;

  // Appends results to `out` instead of allocating; same contract.
  void radius_neighbors_into(const Vec3& query, double radius,
                             std::vector<int>& out) const;

  double cell_size() const { return cell_size_; }
  int point_count() const { return static_cast<int>(points_.size()); }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  std::int64_t cell_key(std::int64_t cx, std::int64_t cy,
                        std::int64_t cz) const;

  double cell_size_;
  std::vector<Vec3> points_;
  std::unordered_map<std::int64_t, std::vector<int>> grid_;
};

inline NeighborhoodIndex build_index(const PointCloud& cloud,
                                     double cell_size) {
  return NeighborhoodIndex(cloud, cell_size);
}

// Greedy farthest point sampling starting from seed_index; ties broken by
// smallest index. Returns the k selected indices in selection order.
std::vector<int> farthest_point_sample(const PointCloud& cloud, int k,
                                       int seed_index = 0);

// result[q][s] = radius_neighbors(queries[q], schedule.radius(s)).
// max_neighbors > 0 keeps only the closest that many per scale
// (ties by index), re-sorted ascending.
std::vector<std::vector<std::vector<int>>> multi_scale_neighborhoods(
    const NeighborhoodIndex& index, const std::vector<Vec3>& queries,
    const ScaleSchedule& schedule, int max_neighbors = 0);

}  // namespace gibly
