#pragma once

#include <array>
#include <string>

#include "gibly/geometry.hpp"

namespace gibly {

enum class GibKind {
  Cylinder,
  HollowCylinder,
  Cone,
  HollowCone,
  Disk,
  HollowDisk,
  Ellipsoid,
  HollowEllipsoid,
};

inline constexpr std::array<GibKind, 8> kAllGibKinds = {
    GibKind::Cylinder,  GibKind::HollowCylinder, GibKind::Cone,
    GibKind::HollowCone, GibKind::Disk,          GibKind::HollowDisk,
    GibKind::Ellipsoid, GibKind::HollowEllipsoid};

std::string to_string(GibKind kind);
GibKind gib_kind_from_string(const std::string& name);

// Lower clamp for r, t and the cone height; beta lives in
// [kMinShapeParam, 0.5 - kMinShapeParam].
inline constexpr double kMinShapeParam = 1e-3;
inline constexpr double kBetaMax = 0.5 - kMinShapeParam;
inline constexpr double kMinConeHeight = 1e-3;
inline constexpr double kEllipsoidEigenFloor = 1e-6;

// One kernel instance. Only the fields relevant to `kind` are read:
//   r          radius (all kinds except Ellipsoid)
//   t          shell thickness (hollow variants)
//   beta       cone slope, scaled by pi inside the kernel (cone family)
//   w          vertical width threshold (disk family)
//   ell_scales raw per-axis precisions, pre-positivity-map (ellipsoid family)
struct GibParams {
  GibKind kind = GibKind::Cylinder;
  RotationAngles angles;
  double r = 0.5;
  double t = 0.1;
  double beta = 0.25;
  double w = 0.2;
  std::array<double, 3> ell_scales = {0.5413, 0.5413, 0.5413};  // pos() ~ 1
};

// Partial derivatives of a kernel score with respect to every learnable
// parameter. Entries for parameters unused by the kind are exactly zero.
struct GibGrad {
  double d_r = 0.0;
  double d_t = 0.0;
  double d_beta = 0.0;
  double d_w = 0.0;
  std::array<double, 3> d_angles = {0.0, 0.0, 0.0};
  std::array<double, 3> d_ell_scales = {0.0, 0.0, 0.0};

  void axpy(const GibGrad& other, double weight) {
    d_r += weight * other.d_r;
    d_t += weight * other.d_t;
    d_beta += weight * other.d_beta;
    d_w += weight * other.d_w;
    for (int i = 0; i < 3; ++i) {
      d_angles[i] += weight * other.d_angles[i];
      d_ell_scales[i] += weight * other.d_ell_scales[i];
    }
  }

  void scale(double s) {
    d_r *= s;
    d_t *= s;
    d_beta *= s;
    d_w *= s;
    for (int i = 0; i < 3; ++i) {
      d_angles[i] *= s;
      d_ell_scales[i] *= s;
    }
  }
};

bool kind_uses_r(GibKind kind);
bool kind_uses_t(GibKind kind);
bool kind_uses_beta(GibKind kind);
bool kind_uses_w(GibKind kind);
bool kind_uses_ell_scales(GibKind kind);

// Positivity map for raw ellipsoid scales: softplus plus a small floor.
double positive_scale(double raw);
double positive_scale_grad(double raw);

// Clamps r, t, beta to their invariant ranges and wraps angles to
// (-pi, pi]. Idempotent.
void clamp_params(GibParams& params);

// A kernel with its rotation matrices and per-kind constants precomputed,
// for evaluation loops over many offsets. Immutable after construction.
class PreparedGib {
 public:
  explicit PreparedGib(const GibParams& params);

  const GibParams& params() const { return params_; }
  const Mat3& rotation() const { return rot_; }

  CanonicalOffset canonicalize(const Vec3& offset) const {
    return rotate_offset(rot_, offset);
  }

  // Alignment score in (0, 1] for an offset already in the canonical frame.
  double eval_canonical(const CanonicalOffset& z) const;

  double eval(const Vec3& offset) const {
    return eval_canonical(canonicalize(offset));
  }

  // Score plus exact partial derivatives of the implemented formula
  // (including the epsilon floors and subgradient conventions).
  double eval_grad(const Vec3& offset, GibGrad& grad) const;

 private:
  GibParams params_;
  Mat3 rot_;
  std::array<Mat3, 3> rot_grad_;
  double tan_bpi_ = 0.0;
  double dtan_dbeta_ = 0.0;
  std::array<double, 3> pos_scales_ = {0.0, 0.0, 0.0};
  std::array<double, 3> sig_scales_ = {0.0, 0.0, 0.0};
};

// Convenience single-shot forms. `offset` is the raw neighbor offset x - q;
// the rotation into the canonical frame happens inside.
double eval_gib(const GibParams& params, const Vec3& offset);
std::pair<double, GibGrad> eval_gib_grad(const GibParams& params,
                                         const Vec3& offset);

// Lambda(phi) = R * diag(pos(ell_scales)) * R^T. Requires an ellipsoid kind.
Mat3 ellipsoid_precision(const GibParams& params);

}  // namespace gibly
