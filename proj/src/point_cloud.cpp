#include "gibly/point_cloud.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gibly {

void validate_cloud(const PointCloud& cloud) {
  if (cloud.coords.empty()) {
    throw std::invalid_argument("point cloud must contain at least one point");
  }
  for (std::size_t i = 0; i < cloud.coords.size(); ++i) {
    const Vec3& p = cloud.coords[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw std::invalid_argument("non-finite coordinate at point " +
                                  std::to_string(i));
    }
  }
  if (cloud.features.rows() != 0 &&
      cloud.features.rows() != static_cast<Eigen::Index>(cloud.coords.size())) {
    throw std::invalid_argument("feature row count does not match point count");
  }
  if (!cloud.labels.empty()) {
    if (cloud.labels.size() != cloud.coords.size()) {
      throw std::invalid_argument("label count does not match point count");
    }
    for (int label : cloud.labels) {
      if (label < 0 || label > 65535) {
        throw std::invalid_argument("label out of range [0, 65535]: " +
                                    std::to_string(label));
      }
    }
  }
}

}  // namespace gibly
