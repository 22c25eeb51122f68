#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gibly/geometry.hpp"

namespace gibly {

// N points with coordinates in meters, optional per-point features and
// integer class labels. Labels, when present, are in [0, 65535].
struct PointCloud {
  std::vector<Vec3> coords;
  Eigen::MatrixXd features;  // N x C_in; 0 columns when absent
  std::vector<int> labels;   // empty when absent

  int size() const { return static_cast<int>(coords.size()); }
  int feature_dim() const {
    return features.rows() == 0 ? 0 : static_cast<int>(features.cols());
  }
  bool has_labels() const { return !labels.empty(); }
};

// Throws std::invalid_argument if the cloud violates its invariants
// (empty, non-finite coordinates, mismatched feature/label row counts,
// label out of range).
void validate_cloud(const PointCloud& cloud);

}  // namespace gibly
