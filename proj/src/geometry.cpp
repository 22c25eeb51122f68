#include "gibly/geometry.hpp"

namespace gibly {

namespace {

Mat3 rot_x(double c, double s) {
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Mat3 rot_y(double c, double s) {
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat3 rot_z(double c, double s) {
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

}  // namespace

Mat3 rotation_matrix(const RotationAngles& a) {
  const Mat3 rx = rot_x(std::cos(a.phi_x), std::sin(a.phi_x));
  const Mat3 ry = rot_y(std::cos(a.phi_y), std::sin(a.phi_y));
  const Mat3 rz = rot_z(std::cos(a.phi_z), std::sin(a.phi_z));
  return rz * ry * rx;
}

std::array<Mat3, 3> rotation_matrix_grad(const RotationAngles& a) {
  const double cx = std::cos(a.phi_x), sx = std::sin(a.phi_x);
  const double cy = std::cos(a.phi_y), sy = std::sin(a.phi_y);
  const double cz = std::cos(a.phi_z), sz = std::sin(a.phi_z);
  const Mat3 rx = rot_x(cx, sx);
  const Mat3 ry = rot_y(cy, sy);
  const Mat3 rz = rot_z(cz, sz);
  // d/dphi of each axis factor is the same factor with (cos, sin) replaced
  // by (-sin, cos) in the rotating 2x2 block.
  Mat3 drx;
  drx << 0, 0, 0, 0, -sx, -cx, 0, cx, -sx;
  Mat3 dry;
  dry << -sy, 0, cy, 0, 0, 0, -cy, 0, -sy;
  Mat3 drz;
  drz << -sz, -cz, 0, cz, -sz, 0, 0, 0, 0;
  return {rz * ry * drx, rz * dry * rx, drz * ry * rx};
}

CanonicalOffset canonical_offset(const Vec3& query, const Vec3& neighbor,
                                 const RotationAngles& angles) {
  const Vec3 d = neighbor - query;
  return rotate_offset(rotation_matrix(angles), d);
}

double wrap_angle(double radians) {
  double a = std::remainder(radians, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace gibly
