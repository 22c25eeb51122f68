#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>

namespace gibly {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double squared_norm() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(squared_norm()); }
};

// Learned kernel orientation, radians. Canonical storage range after each
// optimizer projection is (-pi, pi].
struct RotationAngles {
  double phi_x = 0.0;
  double phi_y = 0.0;
  double phi_z = 0.0;
};

// Neighbor offset expressed in a kernel's canonical frame. z3 is the height
// along the symmetry axis; rho the perpendicular distance from it.
struct CanonicalOffset {
  double z1 = 0.0;
  double z2 = 0.0;
  double z3 = 0.0;

  double rho_sq() const { return z1 * z1 + z2 * z2; }
  double rho() const { return std::sqrt(rho_sq()); }
  double height() const { return z3; }
};

using Mat3 = Eigen::Matrix3d;

// R = Rz(phi_z) * Ry(phi_y) * Rx(phi_x).
Mat3 rotation_matrix(const RotationAngles& angles);

// Partial derivatives of rotation_matrix, one per angle in (x, y, z) order.
std::array<Mat3, 3> rotation_matrix_grad(const RotationAngles& angles);

// R^T * offset for a precomputed rotation matrix.
inline CanonicalOffset rotate_offset(const Mat3& rot, const Vec3& d) {
  return {rot(0, 0) * d.x + rot(1, 0) * d.y + rot(2, 0) * d.z,
          rot(0, 1) * d.x + rot(1, 1) * d.y + rot(2, 1) * d.z,
          rot(0, 2) * d.x + rot(1, 2) * d.y + rot(2, 2) * d.z};
}

// R^T * (neighbor - query). The subtraction happens before any rotation
// arithmetic so translation invariance holds exactly in floating point.
CanonicalOffset canonical_offset(const Vec3& query, const Vec3& neighbor,
                                 const RotationAngles& angles);

// Wraps to (-pi, pi]; idempotent.
double wrap_angle(double radians);

}  // namespace gibly
