#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "gibly/layer.hpp"
#include "gibly/point_cloud.hpp"

namespace gibly {

// ---------------------------------------------------------------------------
// Synthetic scenes

enum class PrimitiveKind { Cylinder, Cone, Disk, Ellipsoid, Box };

std::string to_string(PrimitiveKind kind);
PrimitiveKind primitive_kind_from_string(const std::string& name);

struct ScenePrimitive {
  PrimitiveKind kind = PrimitiveKind::Cylinder;
  int label = 0;
  int count = 1;
  Vec3 center;
  RotationAngles orientation;
  double radius = 0.5;   // cylinder / cone base / disk
  double height = 1.0;   // cylinder length, cone height, disk thickness
  Vec3 extents{1.0, 1.0, 1.0};  // ellipsoid semi-axes, box edge lengths
  bool surface = true;   // surface shell vs filled volume
  double noise_sigma = 0.0;
};

struct SyntheticSceneSpec {
  std::vector<ScenePrimitive> primitives;
  std::uint64_t seed = 0;
};

// Deterministic labeled cloud; surface mode places points on the primitive
// boundary, volume mode fills it, then per-point Gaussian noise is added.
PointCloud generate_scene(const SyntheticSceneSpec& spec);

// ---------------------------------------------------------------------------
// Optimizer (adaptive moments with decoupled weight decay)

struct OptimizerState {
  Eigen::VectorXd m1;
  Eigen::VectorXd m2;
  long step = 0;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
};

OptimizerState make_optimizer(Eigen::Index param_count, double learning_rate,
                              double weight_decay);

// In-place update. `trainable`, when given, freezes masked-out entries
// completely (no moment update, no decay).
void optimizer_step(OptimizerState& state, Eigen::VectorXd& params,
                    const Eigen::VectorXd& grads,
                    const std::vector<char>* trainable = nullptr);

// ---------------------------------------------------------------------------
// Parameter flattening (optimizer / gradcheck order: per GIB
// [r, t, beta, w, ell0, ell1, ell2, phi_x, phi_y, phi_z], then W row-major,
// then projection row-major, then bias)

inline constexpr int kSlotsPerGib = 10;

Eigen::Index layer_param_count(const GiblyLayer& layer);
Eigen::VectorXd flatten_layer(const GiblyLayer& layer);
void unflatten_layer(const Eigen::VectorXd& params, GiblyLayer& layer);
Eigen::VectorXd flatten_layer_grads(const GiblyLayer& layer,
                                    const LayerGrads& grads);
std::vector<std::string> layer_param_names(const GiblyLayer& layer);

// ---------------------------------------------------------------------------
// Single-kernel fitting

struct FitMask {
  bool r = false;
  bool t = false;
  bool beta = false;
  bool w = false;
  bool angles = false;
  bool ell_scales = false;
};

struct FitResult {
  GibParams params;
  std::vector<double> objective;  // steps + 1 entries, index 0 = initial
};

// Gradient ascent on the mean normalized score of the kernel over all cloud
// points (offsets taken from the centroid; MC ball radius = bounding radius).
FitResult fit_shape(const PointCloud& cloud, GibParams params,
                    const FitMask& mask, int steps, double lr,
                    int mc_samples = 256, std::uint64_t mc_seed = 1234);

// Mean normalized score for fixed params on the fit_shape objective; the
// 1-D scan oracle for radius recovery evaluates this directly.
double fit_objective(const PointCloud& cloud, const GibParams& params,
                     int mc_samples = 256, std::uint64_t mc_seed = 1234);

// ---------------------------------------------------------------------------
// Segmentation training

struct SegMetrics {
  double accuracy = 0.0;
  std::vector<double> class_iou;
  double miou = 0.0;
};

SegMetrics evaluate_segmentation(const std::vector<int>& predicted,
                                 const std::vector<int>& truth,
                                 int num_classes);

struct LinearHead {
  Eigen::MatrixXd w;  // input_dim x classes
  Eigen::VectorXd b;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> class_iou;
  double miou = 0.0;
};

enum class TrainScope { All, WeightsOnly };

struct TrainOptions {
  int epochs = 50;
  double learning_rate = 1e-2;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  TrainScope scope = TrainScope::All;
};

struct TrainReport {
  std::vector<EpochMetrics> gibly_epochs;
  std::vector<EpochMetrics> baseline_epochs;
  GiblyLayer trained_layer;
  LinearHead gibly_head;
  LinearHead baseline_head;
  int num_classes = 0;
};

// Trains GiblyLayer + linear softmax head end to end with cross-entropy,
// and a baseline head on raw coordinates (+ input features) under the same
// budget. Deterministic for a fixed seed.
TrainReport train_segmenter(const PointCloud& scene, const GiblyConfig& config,
                            const TrainOptions& options);

// ---------------------------------------------------------------------------
// Finite-difference oracle

struct GradcheckReport {
  std::vector<double> rel_errors;
  double max_rel_error = 0.0;
  int worst_index = -1;
  bool pass = false;
};

// Central differences with the given step on every parameter; relative
// error |a - f| / max(|a|, |f|, 1e-8) per entry.
GradcheckReport gradcheck(
    const std::function<double(const Eigen::VectorXd&)>& loss_fn,
    const Eigen::VectorXd& params, const Eigen::VectorXd& analytic_grad,
    double step, double tolerance);

// Gradcheck of the full layer on a random scene: loss = sum of all output
// features. Returns the report over every layer parameter.
GradcheckReport layer_gradcheck(const GiblyConfig& config, int num_points,
                                std::uint64_t scene_seed, double step,
                                double tolerance);

}  // namespace gibly
