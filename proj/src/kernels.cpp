#include "gibly/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gibly {

std::string to_string(GibKind kind) {
  switch (kind) {
    case GibKind::Cylinder: return "cylinder";
    case GibKind::HollowCylinder: return "hollow_cylinder";
    case GibKind::Cone: return "cone";
    case GibKind::HollowCone: return "hollow_cone";
    case GibKind::Disk: return "disk";
    case GibKind::HollowDisk: return "hollow_disk";
    case GibKind::Ellipsoid: return "ellipsoid";
    case GibKind::HollowEllipsoid: return "hollow_ellipsoid";
  }
  return "unknown";
}

GibKind gib_kind_from_string(const std::string& name) {
  for (GibKind kind : kAllGibKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown GIB kind: " + name);
}

bool kind_uses_r(GibKind kind) { return kind != GibKind::Ellipsoid; }

bool kind_uses_t(GibKind kind) {
  return kind == GibKind::HollowCylinder || kind == GibKind::HollowCone ||
         kind == GibKind::HollowDisk || kind == GibKind::HollowEllipsoid;
}

bool kind_uses_beta(GibKind kind) {
  return kind == GibKind::Cone || kind == GibKind::HollowCone;
}

bool kind_uses_w(GibKind kind) {
  return kind == GibKind::Disk || kind == GibKind::HollowDisk;
}

bool kind_uses_ell_scales(GibKind kind) {
  return kind == GibKind::Ellipsoid || kind == GibKind::HollowEllipsoid;
}

double positive_scale(double raw) {
  const double softplus = raw > 30.0 ? raw : std::log1p(std::exp(raw));
  return softplus + kEllipsoidEigenFloor;
}

double positive_scale_grad(double raw) {
  if (raw >= 0.0) return 1.0 / (1.0 + std::exp(-raw));
  const double e = std::exp(raw);
  return e / (1.0 + e);
}

void clamp_params(GibParams& params) {
  params.r = std::max(params.r, kMinShapeParam);
  params.t = std::max(params.t, kMinShapeParam);
  params.beta = std::clamp(params.beta, kMinShapeParam, kBetaMax);
  params.angles.phi_x = wrap_angle(params.angles.phi_x);
  params.angles.phi_y = wrap_angle(params.angles.phi_y);
  params.angles.phi_z = wrap_angle(params.angles.phi_z);
}

PreparedGib::PreparedGib(const GibParams& params)
    : params_(params),
      rot_(rotation_matrix(params.angles)),
      rot_grad_(rotation_matrix_grad(params.angles)) {
  if (kind_uses_beta(params_.kind)) {
    tan_bpi_ = std::tan(params_.beta * M_PI);
    dtan_dbeta_ = M_PI * (1.0 + tan_bpi_ * tan_bpi_);
  }
  if (kind_uses_ell_scales(params_.kind)) {
    for (int i = 0; i < 3; ++i) {
      pos_scales_[i] = positive_scale(params_.ell_scales[i]);
      sig_scales_[i] = positive_scale_grad(params_.ell_scales[i]);
    }
  }
}

double PreparedGib::eval_canonical(const CanonicalOffset& z) const {
  const double rho_sq = z.rho_sq();
  switch (params_.kind) {
    case GibKind::Cylinder:
      return std::exp(-rho_sq / (2.0 * params_.r * params_.r));
    case GibKind::HollowCylinder: {
      const double dev = std::sqrt(rho_sq) - params_.r;
      return std::exp(-dev * dev / (2.0 * params_.t * params_.t));
    }
    case GibKind::Cone: {
      const double h_eff = std::max(z.z3, kMinConeHeight);
      const double sigma = params_.r * h_eff * tan_bpi_;
      return std::exp(-rho_sq / (2.0 * sigma * sigma));
    }
    case GibKind::HollowCone: {
      const double h_eff = std::max(z.z3, kMinConeHeight);
      const double dev = std::sqrt(rho_sq) - params_.r * h_eff * tan_bpi_;
      return std::exp(-dev * dev / (2.0 * params_.t * params_.t));
    }
    case GibKind::Disk: {
      const double gap = std::abs(params_.w - z.z3);
      return std::exp(-rho_sq / (2.0 * params_.r * params_.r) * gap);
    }
    case GibKind::HollowDisk: {
      const double dev = std::sqrt(rho_sq) - params_.r;
      const double gap = std::abs(params_.w - z.z3);
      return std::exp(-dev * dev / (2.0 * params_.t * params_.t) * gap);
    }
    case GibKind::Ellipsoid: {
      const double q = pos_scales_[0] * z.z1 * z.z1 +
                       pos_scales_[1] * z.z2 * z.z2 +
                       pos_scales_[2] * z.z3 * z.z3;
      return std::exp(-0.5 * q);
    }
    case GibKind::HollowEllipsoid: {
      const double q = pos_scales_[0] * z.z1 * z.z1 +
                       pos_scales_[1] * z.z2 * z.z2 +
                       pos_scales_[2] * z.z3 * z.z3;
      const double dev = std::sqrt(q) - params_.r;
      return std::exp(-dev * dev / (2.0 * params_.t * params_.t));
    }
  }
  return 0.0;
}

double PreparedGib::eval_grad(const Vec3& offset, GibGrad& grad) const {
  grad = GibGrad{};
  const CanonicalOffset z = canonicalize(offset);
  const double rho_sq = z.rho_sq();
  const double r = params_.r;
  const double t = params_.t;

  // Exponent partials; the score multiplies in at the end.
  double de_dr = 0.0, de_dt = 0.0, de_dbeta = 0.0, de_dw = 0.0;
  std::array<double, 3> de_dscale = {0.0, 0.0, 0.0};
  double de_dz1 = 0.0, de_dz2 = 0.0, de_dz3 = 0.0;
  double exponent = 0.0;

  switch (params_.kind) {
    case GibKind::Cylinder: {
      const double inv = 1.0 / (2.0 * r * r);
      exponent = -rho_sq * inv;
      de_dr = rho_sq / (r * r * r);
      de_dz1 = -z.z1 / (r * r);
      de_dz2 = -z.z2 / (r * r);
      break;
    }
    case GibKind::HollowCylinder: {
      const double rho = std::sqrt(rho_sq);
      const double dev = rho - r;
      exponent = -dev * dev / (2.0 * t * t);
      de_dr = dev / (t * t);
      de_dt = dev * dev / (t * t * t);
      if (rho > 0.0) {  // subgradient 0 at the axis kink
        const double de_drho = -dev / (t * t);
        de_dz1 = de_drho * z.z1 / rho;
        de_dz2 = de_drho * z.z2 / rho;
      }
      break;
    }
    case GibKind::Cone: {
      const double h_eff = std::max(z.z3, kMinConeHeight);
      const double sigma = r * h_eff * tan_bpi_;
      exponent = -rho_sq / (2.0 * sigma * sigma);
      const double de_dsigma = rho_sq / (sigma * sigma * sigma);
      de_dr = de_dsigma * h_eff * tan_bpi_;
      de_dbeta = de_dsigma * r * h_eff * dtan_dbeta_;
      de_dz1 = -z.z1 / (sigma * sigma);
      de_dz2 = -z.z2 / (sigma * sigma);
      if (z.z3 > kMinConeHeight) {
        de_dz3 = de_dsigma * r * tan_bpi_;
      }
      break;
    }
    case GibKind::HollowCone: {
      const double rho = std::sqrt(rho_sq);
      const double h_eff = std::max(z.z3, kMinConeHeight);
      const double mu = r * h_eff * tan_bpi_;
      const double dev = rho - mu;
      exponent = -dev * dev / (2.0 * t * t);
      const double de_dmu = dev / (t * t);
      de_dr = de_dmu * h_eff * tan_bpi_;
      de_dbeta = de_dmu * r * h_eff * dtan_dbeta_;
      de_dt = dev * dev / (t * t * t);
      if (rho > 0.0) {
        const double de_drho = -dev / (t * t);
        de_dz1 = de_drho * z.z1 / rho;
        de_dz2 = de_drho * z.z2 / rho;
      }
      if (z.z3 > kMinConeHeight) {
        de_dz3 = de_dmu * r * tan_bpi_;
      }
      break;
    }
    case GibKind::Disk: {
      const double diff = params_.w - z.z3;
      const double gap = std::abs(diff);
      const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      const double radial = rho_sq / (2.0 * r * r);
      exponent = -radial * gap;
      de_dr = gap * rho_sq / (r * r * r);
      de_dw = -radial * sgn;
      de_dz1 = -gap * z.z1 / (r * r);
      de_dz2 = -gap * z.z2 / (r * r);
      de_dz3 = radial * sgn;
      break;
    }
    case GibKind::HollowDisk: {
      const double rho = std::sqrt(rho_sq);
      const double dev = rho - r;
      const double diff = params_.w - z.z3;
      const double gap = std::abs(diff);
      const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      const double shell = dev * dev / (2.0 * t * t);
      exponent = -shell * gap;
      de_dr = gap * dev / (t * t);
      de_dt = gap * dev * dev / (t * t * t);
      de_dw = -shell * sgn;
      de_dz3 = shell * sgn;
      if (rho > 0.0) {
        const double de_drho = -gap * dev / (t * t);
        de_dz1 = de_drho * z.z1 / rho;
        de_dz2 = de_drho * z.z2 / rho;
      }
      break;
    }
    case GibKind::Ellipsoid: {
      const double q = pos_scales_[0] * z.z1 * z.z1 +
                       pos_scales_[1] * z.z2 * z.z2 +
                       pos_scales_[2] * z.z3 * z.z3;
      exponent = -0.5 * q;
      de_dscale[0] = -0.5 * z.z1 * z.z1 * sig_scales_[0];
      de_dscale[1] = -0.5 * z.z2 * z.z2 * sig_scales_[1];
      de_dscale[2] = -0.5 * z.z3 * z.z3 * sig_scales_[2];
      de_dz1 = -pos_scales_[0] * z.z1;
      de_dz2 = -pos_scales_[1] * z.z2;
      de_dz3 = -pos_scales_[2] * z.z3;
      break;
    }
    case GibKind::HollowEllipsoid: {
      const double q = pos_scales_[0] * z.z1 * z.z1 +
                       pos_scales_[1] * z.z2 * z.z2 +
                       pos_scales_[2] * z.z3 * z.z3;
      const double s = std::sqrt(q);
      const double dev = s - r;
      exponent = -dev * dev / (2.0 * t * t);
      de_dr = dev / (t * t);
      de_dt = dev * dev / (t * t * t);
      if (s > 0.0) {
        const double de_ds = -dev / (t * t);
        de_dscale[0] = de_ds * 0.5 * z.z1 * z.z1 * sig_scales_[0] / s;
        de_dscale[1] = de_ds * 0.5 * z.z2 * z.z2 * sig_scales_[1] / s;
        de_dscale[2] = de_ds * 0.5 * z.z3 * z.z3 * sig_scales_[2] / s;
        de_dz1 = de_ds * pos_scales_[0] * z.z1 / s;
        de_dz2 = de_ds * pos_scales_[1] * z.z2 / s;
        de_dz3 = de_ds * pos_scales_[2] * z.z3 / s;
      }
      break;
    }
  }

  const double score = std::exp(exponent);
  if (kind_uses_r(params_.kind)) grad.d_r = score * de_dr;
  if (kind_uses_t(params_.kind)) grad.d_t = score * de_dt;
  if (kind_uses_beta(params_.kind)) grad.d_beta = score * de_dbeta;
  if (kind_uses_w(params_.kind)) grad.d_w = score * de_dw;
  if (kind_uses_ell_scales(params_.kind)) {
    for (int i = 0; i < 3; ++i) grad.d_ell_scales[i] = score * de_dscale[i];
  }
  // Chain through z = R^T d: dz/dphi_a = (dR/dphi_a)^T d.
  for (int a = 0; a < 3; ++a) {
    const CanonicalOffset dz = rotate_offset(rot_grad_[a], offset);
    grad.d_angles[a] =
        score * (de_dz1 * dz.z1 + de_dz2 * dz.z2 + de_dz3 * dz.z3);
  }
  return score;
}

double eval_gib(const GibParams& params, const Vec3& offset) {
  return PreparedGib(params).eval(offset);
}

std::pair<double, GibGrad> eval_gib_grad(const GibParams& params,
                                         const Vec3& offset) {
  GibGrad grad;
  const double score = PreparedGib(params).eval_grad(offset, grad);
  return {score, grad};
}

Mat3 ellipsoid_precision(const GibParams& params) {
  if (!kind_uses_ell_scales(params.kind)) {
    throw std::invalid_argument(
        "ellipsoid_precision requires an ellipsoid kind");
  }
  const Mat3 rot = rotation_matrix(params.angles);
  Eigen::Vector3d diag(positive_scale(params.ell_scales[0]),
                       positive_scale(params.ell_scales[1]),
                       positive_scale(params.ell_scales[2]));
  return rot * diag.asDiagonal() * rot.transpose();
}

}  // namespace gibly
