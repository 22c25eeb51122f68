#include "gibly/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gibly/rng.hpp"

namespace gibly {

// ---------------------------------------------------------------------------
// Synthetic scenes

std::string to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::Cylinder: return "cylinder";
    case PrimitiveKind::Cone: return "cone";
    case PrimitiveKind::Disk: return "disk";
    case PrimitiveKind::Ellipsoid: return "ellipsoid";
    case PrimitiveKind::Box: return "box";
  }
  return "unknown";
}

PrimitiveKind primitive_kind_from_string(const std::string& name) {
  if (name == "cylinder") return PrimitiveKind::Cylinder;
  if (name == "cone") return PrimitiveKind::Cone;
  if (name == "disk") return PrimitiveKind::Disk;
  if (name == "ellipsoid") return PrimitiveKind::Ellipsoid;
  if (name == "box") return PrimitiveKind::Box;
  throw std::invalid_argument("unknown primitive kind: " + name);
}

namespace {

Vec3 rotate_vec(const Mat3& rot, const Vec3& v) {
  return {rot(0, 0) * v.x + rot(0, 1) * v.y + rot(0, 2) * v.z,
          rot(1, 0) * v.x + rot(1, 1) * v.y + rot(1, 2) * v.z,
          rot(2, 0) * v.x + rot(2, 1) * v.y + rot(2, 2) * v.z};
}

Vec3 unit_direction(Rng& rng) {
  for (;;) {
    const Vec3 g{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    const double norm = g.norm();
    if (norm > 1e-12) return g * (1.0 / norm);
  }
}

void validate_primitive(const ScenePrimitive& prim) {
  if (prim.count < 1) throw std::invalid_argument("primitive count must be >= 1");
  if (prim.noise_sigma < 0.0)
    throw std::invalid_argument("noise sigma must be >= 0");
  if (prim.label < 0 || prim.label > 65535)
    throw std::invalid_argument("primitive label out of range");
  switch (prim.kind) {
    case PrimitiveKind::Cylinder:
    case PrimitiveKind::Cone:
      if (!(prim.radius > 0.0) || !(prim.height > 0.0))
        throw std::invalid_argument("radius and height must be positive");
      break;
    case PrimitiveKind::Disk:
      if (!(prim.radius > 0.0) || prim.height < 0.0)
        throw std::invalid_argument("disk radius must be positive");
      break;
    case PrimitiveKind::Ellipsoid:
    case PrimitiveKind::Box:
      if (!(prim.extents.x > 0.0) || !(prim.extents.y > 0.0) ||
          !(prim.extents.z > 0.0))
        throw std::invalid_argument("extents must be positive");
      break;
  }
}

Vec3 sample_local(const ScenePrimitive& prim, Rng& rng) {
  switch (prim.kind) {
    case PrimitiveKind::Cylinder: {
      const double theta = 2.0 * M_PI * rng.uniform();
      const double z = (rng.uniform() - 0.5) * prim.height;
      const double rho =
          prim.surface ? prim.radius : prim.radius * std::sqrt(rng.uniform());
      return {rho * std::cos(theta), rho * std::sin(theta), z};
    }
    case PrimitiveKind::Cone: {
      // Apex at the local origin, opening toward +z.
      const double theta = 2.0 * M_PI * rng.uniform();
      if (prim.surface) {
        const double f = std::sqrt(rng.uniform());  // area-uniform lateral shell
        const double rho = prim.radius * f;
        return {rho * std::cos(theta), rho * std::sin(theta), f * prim.height};
      }
      const double f = std::cbrt(rng.uniform());
      const double rho = prim.radius * f * std::sqrt(rng.uniform());
      return {rho * std::cos(theta), rho * std::sin(theta), f * prim.height};
    }
    case PrimitiveKind::Disk: {
      const double theta = 2.0 * M_PI * rng.uniform();
      const double rho = prim.radius * std::sqrt(rng.uniform());
      const double z =
          prim.surface ? 0.0 : (rng.uniform() - 0.5) * prim.height;
      return {rho * std::cos(theta), rho * std::sin(theta), z};
    }
    case PrimitiveKind::Ellipsoid: {
      const Vec3 dir = unit_direction(rng);
      const double scale = prim.surface ? 1.0 : std::cbrt(rng.uniform());
      return {dir.x * prim.extents.x * scale, dir.y * prim.extents.y * scale,
              dir.z * prim.extents.z * scale};
    }
    case PrimitiveKind::Box: {
      return {(rng.uniform() - 0.5) * prim.extents.x,
              (rng.uniform() - 0.5) * prim.extents.y,
              (rng.uniform() - 0.5) * prim.extents.z};
    }
  }
  return {};
}

}  // namespace

PointCloud generate_scene(const SyntheticSceneSpec& spec) {
  if (spec.primitives.empty()) {
    throw std::invalid_argument("scene spec must contain at least one primitive");
  }
  for (const ScenePrimitive& prim : spec.primitives) validate_primitive(prim);

  PointCloud cloud;
  Rng rng(spec.seed);
  for (const ScenePrimitive& prim : spec.primitives) {
    const Mat3 rot = rotation_matrix(prim.orientation);
    for (int i = 0; i < prim.count; ++i) {
      Vec3 p = prim.center + rotate_vec(rot, sample_local(prim, rng));
      if (prim.noise_sigma > 0.0) {
        p.x += prim.noise_sigma * rng.gaussian();
        p.y += prim.noise_sigma * rng.gaussian();
        p.z += prim.noise_sigma * rng.gaussian();
      }
      cloud.coords.push_back(p);
      cloud.labels.push_back(prim.label);
    }
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// Optimizer

OptimizerState make_optimizer(Eigen::Index param_count, double learning_rate,
                              double weight_decay) {
  OptimizerState state;
  state.m1 = Eigen::VectorXd::Zero(param_count);
  state.m2 = Eigen::VectorXd::Zero(param_count);
  state.learning_rate = learning_rate;
  state.weight_decay = weight_decay;
  return state;
}

void optimizer_step(OptimizerState& state, Eigen::VectorXd& params,
                    const Eigen::VectorXd& grads,
                    const std::vector<char>* trainable) {
  if (params.size() != state.m1.size() || grads.size() != params.size()) {
    throw std::invalid_argument("optimizer shape mismatch");
  }
  if (trainable != nullptr &&
      static_cast<Eigen::Index>(trainable->size()) != params.size()) {
    throw std::invalid_argument("trainable mask shape mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    if (trainable != nullptr && !(*trainable)[i]) continue;
    const double g = grads[i];
    state.m1[i] = state.beta1 * state.m1[i] + (1.0 - state.beta1) * g;
    state.m2[i] = state.beta2 * state.m2[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m1[i] / bc1;
    const double v_hat = state.m2[i] / bc2;
    params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    params[i] -= state.learning_rate * state.weight_decay * params[i];
  }
}

// ---------------------------------------------------------------------------
// Parameter flattening

Eigen::Index layer_param_count(const GiblyLayer& layer) {
  return static_cast<Eigen::Index>(kSlotsPerGib) * layer.gib_count() +
         layer.weights.w.size() + layer.projection.size() + layer.bias.size();
}

Eigen::VectorXd flatten_layer(const GiblyLayer& layer) {
  Eigen::VectorXd out(layer_param_count(layer));
  Eigen::Index at = 0;
  for (const GibParams& p : layer.gibs) {
    out[at++] = p.r;
    out[at++] = p.t;
    out[at++] = p.beta;
    out[at++] = p.w;
    for (int i = 0; i < 3; ++i) out[at++] = p.ell_scales[i];
    out[at++] = p.angles.phi_x;
    out[at++] = p.angles.phi_y;
    out[at++] = p.angles.phi_z;
  }
  for (Eigen::Index i = 0; i < layer.weights.w.rows(); ++i)
    for (Eigen::Index j = 0; j < layer.weights.w.cols(); ++j)
      out[at++] = layer.weights.w(i, j);
  for (Eigen::Index i = 0; i < layer.projection.rows(); ++i)
    for (Eigen::Index j = 0; j < layer.projection.cols(); ++j)
      out[at++] = layer.projection(i, j);
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) out[at++] = layer.bias[i];
  return out;
}

void unflatten_layer(const Eigen::VectorXd& params, GiblyLayer& layer) {
  if (params.size() != layer_param_count(layer)) {
    throw std::invalid_argument("parameter vector has wrong length");
  }
  Eigen::Index at = 0;
  for (GibParams& p : layer.gibs) {
    p.r = params[at++];
    p.t = params[at++];
    p.beta = params[at++];
    p.w = params[at++];
    for (int i = 0; i < 3; ++i) p.ell_scales[i] = params[at++];
    p.angles.phi_x = params[at++];
    p.angles.phi_y = params[at++];
    p.angles.phi_z = params[at++];
  }
  for (Eigen::Index i = 0; i < layer.weights.w.rows(); ++i)
    for (Eigen::Index j = 0; j < layer.weights.w.cols(); ++j)
      layer.weights.w(i, j) = params[at++];
  for (Eigen::Index i = 0; i < layer.projection.rows(); ++i)
    for (Eigen::Index j = 0; j < layer.projection.cols(); ++j)
      layer.projection(i, j) = params[at++];
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = params[at++];
}

Eigen::VectorXd flatten_layer_grads(const GiblyLayer& layer,
                                    const LayerGrads& grads) {
  Eigen::VectorXd out(layer_param_count(layer));
  Eigen::Index at = 0;
  for (const GibGrad& g : grads.gibs) {
    out[at++] = g.d_r;
    out[at++] = g.d_t;
    out[at++] = g.d_beta;
    out[at++] = g.d_w;
    for (int i = 0; i < 3; ++i) out[at++] = g.d_ell_scales[i];
    for (int i = 0; i < 3; ++i) out[at++] = g.d_angles[i];
  }
  for (Eigen::Index i = 0; i < grads.weights.rows(); ++i)
    for (Eigen::Index j = 0; j < grads.weights.cols(); ++j)
      out[at++] = grads.weights(i, j);
  for (Eigen::Index i = 0; i < grads.projection.rows(); ++i)
    for (Eigen::Index j = 0; j < grads.projection.cols(); ++j)
      out[at++] = grads.projection(i, j);
  for (Eigen::Index i = 0; i < grads.bias.size(); ++i) out[at++] = grads.bias[i];
  return out;
}

std::vector<std::string> layer_param_names(const GiblyLayer& layer) {
  std::vector<std::string> names;
  names.reserve(layer_param_count(layer));
  for (int g = 0; g < layer.gib_count(); ++g) {
    const std::string prefix =
        "gib" + std::to_string(g) + "." + to_string(layer.gibs[g].kind) + ".";
    for (const char* field :
         {"r", "t", "beta", "w", "ell0", "ell1", "ell2", "phi_x", "phi_y",
          "phi_z"}) {
      names.push_back(prefix + field);
    }
  }
  for (Eigen::Index i = 0; i < layer.weights.w.rows(); ++i)
    for (Eigen::Index j = 0; j < layer.weights.w.cols(); ++j)
      names.push_back("W[" + std::to_string(i) + "][" + std::to_string(j) + "]");
  for (Eigen::Index i = 0; i < layer.projection.rows(); ++i)
    for (Eigen::Index j = 0; j < layer.projection.cols(); ++j)
      names.push_back("proj[" + std::to_string(i) + "][" + std::to_string(j) +
                      "]");
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
    names.push_back("bias[" + std::to_string(i) + "]");
  return names;
}

// ---------------------------------------------------------------------------
// Single-kernel fitting

namespace {

struct FitSetup {
  std::vector<Vec3> offsets;
  McSampleSet mc;
};

FitSetup make_fit_setup(const PointCloud& cloud, int mc_samples,
                        std::uint64_t mc_seed) {
  validate_cloud(cloud);
  Vec3 centroid{0, 0, 0};
  for (const Vec3& p : cloud.coords) centroid = centroid + p;
  centroid = centroid * (1.0 / cloud.size());
  FitSetup setup;
  setup.offsets.reserve(cloud.size());
  double r_ball = 0.0;
  for (const Vec3& p : cloud.coords) {
    const Vec3 o = p - centroid;
    r_ball = std::max(r_ball, o.norm());
    setup.offsets.push_back(o);
  }
  setup.mc = make_mc_samples(mc_samples, std::max(r_ball, 1e-6), mc_seed);
  return setup;
}

double mean_normalized_score(const PreparedGib& gib,
                             const std::vector<Vec3>& offsets,
                             const McSampleSet& mc) {
  double sum = 0.0;
  for (const Vec3& o : offsets) sum += gib.eval(o);
  return sum / offsets.size() - omega(gib, mc) / mc.count();
}

}  // namespace

double fit_objective(const PointCloud& cloud, const GibParams& params,
                     int mc_samples, std::uint64_t mc_seed) {
  const FitSetup setup = make_fit_setup(cloud, mc_samples, mc_seed);
  return mean_normalized_score(PreparedGib(params), setup.offsets, setup.mc);
}

FitResult fit_shape(const PointCloud& cloud, GibParams params,
                    const FitMask& mask, int steps, double lr, int mc_samples,
                    std::uint64_t mc_seed) {
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  const FitSetup setup = make_fit_setup(cloud, mc_samples, mc_seed);

  FitResult result;
  result.objective.reserve(steps + 1);
  clamp_params(params);
  result.objective.push_back(
      mean_normalized_score(PreparedGib(params), setup.offsets, setup.mc));

  GibGrad pair_grad;
  for (int step = 0; step < steps; ++step) {
    const PreparedGib gib(params);
    GibGrad total;
    for (const Vec3& o : setup.offsets) {
      gib.eval_grad(o, pair_grad);
      total.axpy(pair_grad, 1.0);
    }
    total.scale(1.0 / setup.offsets.size());
    auto [omega_value, omega_sum] = omega_grad(gib, setup.mc);
    (void)omega_value;
    total.axpy(omega_sum, -1.0 / setup.mc.count());

    if (mask.r) params.r += lr * total.d_r;
    if (mask.t) params.t += lr * total.d_t;
    if (mask.beta) params.beta += lr * total.d_beta;
    if (mask.w) params.w += lr * total.d_w;
    if (mask.angles) {
      params.angles.phi_x += lr * total.d_angles[0];
      params.angles.phi_y += lr * total.d_angles[1];
      params.angles.phi_z += lr * total.d_angles[2];
    }
    if (mask.ell_scales) {
      for (int i = 0; i < 3; ++i) params.ell_scales[i] += lr * total.d_ell_scales[i];
    }
    clamp_params(params);
    result.objective.push_back(
        mean_normalized_score(PreparedGib(params), setup.offsets, setup.mc));
  }
  result.params = params;
  return result;
}

// ---------------------------------------------------------------------------
// Segmentation metrics and training

SegMetrics evaluate_segmentation(const std::vector<int>& predicted,
                                 const std::vector<int>& truth,
                                 int num_classes) {
  if (predicted.size() != truth.size() || predicted.empty()) {
    throw std::invalid_argument("prediction/label size mismatch");
  }
  SegMetrics metrics;
  std::vector<long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  long correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int p = predicted[i];
    const int t = truth[i];
    if (p == t) {
      ++correct;
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  metrics.accuracy = static_cast<double>(correct) / predicted.size();
  metrics.class_iou.resize(num_classes, 0.0);
  double sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const long denom = tp[c] + fp[c] + fn[c];
    metrics.class_iou[c] = denom > 0 ? static_cast<double>(tp[c]) / denom : 0.0;
    sum += metrics.class_iou[c];
  }
  metrics.miou = sum / num_classes;
  return metrics;
}

namespace {

LinearHead init_head(Eigen::Index input_dim, int classes, std::uint64_t seed) {
  LinearHead head;
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  Rng rng(seed);
  head.w.resize(input_dim, classes);
  for (Eigen::Index i = 0; i < input_dim; ++i)
    for (int k = 0; k < classes; ++k) head.w(i, k) = rng.uniform(-bound, bound);
  head.b = Eigen::VectorXd::Zero(classes);
  return head;
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& logits) {
  std::vector<int> pred(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k) {
      if (logits(i, k) > logits(i, best)) best = static_cast<int>(k);
    }
    pred[i] = best;
  }
  return pred;
}

// Returns (loss, dlogits) for mean cross-entropy; rows of `probs` are reused
// for dlogits to avoid a second allocation.
std::pair<double, Eigen::MatrixXd> cross_entropy(const Eigen::MatrixXd& logits,
                                                 const std::vector<int>& labels) {
  const Eigen::Index n = logits.rows();
  Eigen::MatrixXd probs = logits;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double row_max = probs.row(i).maxCoeff();
    probs.row(i) = (probs.row(i).array() - row_max).exp();
    const double denom = probs.row(i).sum();
    probs.row(i) /= denom;
    loss -= std::log(std::max(probs(i, labels[i]), 1e-300));
  }
  loss /= static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    probs(i, labels[i]) -= 1.0;
  }
  probs /= static_cast<double>(n);
  return {loss, probs};
}

}  // namespace

TrainReport train_segmenter(const PointCloud& scene, const GiblyConfig& config,
                            const TrainOptions& options) {
  validate_cloud(scene);
  if (!scene.has_labels()) {
    throw std::invalid_argument("degenerate labels: scene has no labels");
  }
  int num_classes = 0;
  for (int label : scene.labels) num_classes = std::max(num_classes, label + 1);
  std::vector<long> histogram(num_classes, 0);
  for (int label : scene.labels) ++histogram[label];
  int present = 0;
  for (long c : histogram) present += c > 0 ? 1 : 0;
  if (present < 2) {
    throw std::invalid_argument(
        "degenerate labels: need at least 2 classes present");
  }

  TrainReport report;
  report.num_classes = num_classes;
  const int n_points = scene.size();

  // GIBLy model: layer + linear softmax head, trained end to end.
  {
    GiblyConfig cfg = config;
    cfg.global_seed = derive_seed(options.seed, 1);
    GiblyLayer layer = make_layer(cfg, scene.feature_dim());
    NeighborhoodIndex index =
        build_index(scene, cfg.schedule.largest_radius());
    LinearHead head = init_head(cfg.projection_dim, num_classes,
                                derive_seed(options.seed, 2));

    const Eigen::Index layer_count = layer_param_count(layer);
    const Eigen::Index total =
        layer_count + head.w.size() + head.b.size();
    Eigen::VectorXd params(total);
    params.head(layer_count) = flatten_layer(layer);
    Eigen::Index at = layer_count;
    for (Eigen::Index i = 0; i < head.w.rows(); ++i)
      for (Eigen::Index j = 0; j < head.w.cols(); ++j) params[at++] = head.w(i, j);
    for (Eigen::Index i = 0; i < head.b.size(); ++i) params[at++] = head.b[i];

    std::vector<char> trainable(total, 1);
    if (options.scope == TrainScope::WeightsOnly) {
      std::fill(trainable.begin(), trainable.end(), 0);
      const Eigen::Index w_begin =
          static_cast<Eigen::Index>(kSlotsPerGib) * layer.gib_count();
      for (Eigen::Index i = 0; i < layer.weights.w.size(); ++i)
        trainable[w_begin + i] = 1;
    }

    OptimizerState opt =
        make_optimizer(total, options.learning_rate, options.weight_decay);

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
      ForwardCache cache;
      const ForwardResult out = forward(layer, scene, index, &cache);
      Eigen::MatrixXd logits = out.features * head.w;
      logits.rowwise() += head.b.transpose();

      auto [ce_loss, dlogits] = cross_entropy(logits, scene.labels);
      const double reg_value = regularizer(layer.weights, cfg.reg).first;

      EpochMetrics em;
      em.epoch = epoch;
      em.loss = ce_loss + reg_value;
      const SegMetrics seg =
          evaluate_segmentation(argmax_rows(logits), scene.labels, num_classes);
      em.accuracy = seg.accuracy;
      em.class_iou = seg.class_iou;
      em.miou = seg.miou;
      report.gibly_epochs.push_back(em);

      const Eigen::MatrixXd d_features = dlogits * head.w.transpose();
      const LayerGrads lgrads = backward(layer, scene, index, cache, d_features);

      Eigen::VectorXd grad(total);
      grad.head(layer_count) = flatten_layer_grads(layer, lgrads);
      at = layer_count;
      const Eigen::MatrixXd head_w_grad = out.features.transpose() * dlogits;
      const Eigen::VectorXd head_b_grad = dlogits.colwise().sum();
      for (Eigen::Index i = 0; i < head_w_grad.rows(); ++i)
        for (Eigen::Index j = 0; j < head_w_grad.cols(); ++j)
          grad[at++] = head_w_grad(i, j);
      for (Eigen::Index i = 0; i < head_b_grad.size(); ++i)
        grad[at++] = head_b_grad[i];

      optimizer_step(opt, params, grad, &trainable);

      unflatten_layer(params.head(layer_count), layer);
      project_parameters(layer);
      params.head(layer_count) = flatten_layer(layer);
      at = layer_count;
      for (Eigen::Index i = 0; i < head.w.rows(); ++i)
        for (Eigen::Index j = 0; j < head.w.cols(); ++j) head.w(i, j) = params[at++];
      for (Eigen::Index i = 0; i < head.b.size(); ++i) head.b[i] = params[at++];
    }
    report.trained_layer = layer;
    report.gibly_head = head;
  }

  // Baseline: identical head and budget on raw coordinates (+ features).
  {
    const Eigen::Index base_dim = 3 + scene.feature_dim();
    Eigen::MatrixXd inputs(n_points, base_dim);
    for (int i = 0; i < n_points; ++i) {
      inputs(i, 0) = scene.coords[i].x;
      inputs(i, 1) = scene.coords[i].y;
      inputs(i, 2) = scene.coords[i].z;
    }
    if (scene.feature_dim() > 0) inputs.rightCols(scene.feature_dim()) = scene.features;

    LinearHead head =
        init_head(base_dim, num_classes, derive_seed(options.seed, 3));
    const Eigen::Index total = head.w.size() + head.b.size();
    Eigen::VectorXd params(total);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < head.w.rows(); ++i)
      for (Eigen::Index j = 0; j < head.w.cols(); ++j) params[at++] = head.w(i, j);
    for (Eigen::Index i = 0; i < head.b.size(); ++i) params[at++] = head.b[i];

    OptimizerState opt =
        make_optimizer(total, options.learning_rate, options.weight_decay);

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
      Eigen::MatrixXd logits = inputs * head.w;
      logits.rowwise() += head.b.transpose();
      auto [ce_loss, dlogits] = cross_entropy(logits, scene.labels);

      EpochMetrics em;
      em.epoch = epoch;
      em.loss = ce_loss;
      const SegMetrics seg =
          evaluate_segmentation(argmax_rows(logits), scene.labels, num_classes);
      em.accuracy = seg.accuracy;
      em.class_iou = seg.class_iou;
      em.miou = seg.miou;
      report.baseline_epochs.push_back(em);

      Eigen::VectorXd grad(total);
      at = 0;
      const Eigen::MatrixXd head_w_grad = inputs.transpose() * dlogits;
      const Eigen::VectorXd head_b_grad = dlogits.colwise().sum();
      for (Eigen::Index i = 0; i < head_w_grad.rows(); ++i)
        for (Eigen::Index j = 0; j < head_w_grad.cols(); ++j)
          grad[at++] = head_w_grad(i, j);
      for (Eigen::Index i = 0; i < head_b_grad.size(); ++i)
        grad[at++] = head_b_grad[i];

      optimizer_step(opt, params, grad);

      at = 0;
      for (Eigen::Index i = 0; i < head.w.rows(); ++i)
        for (Eigen::Index j = 0; j < head.w.cols(); ++j) head.w(i, j) = params[at++];
      for (Eigen::Index i = 0; i < head.b.size(); ++i) head.b[i] = params[at++];
    }
    report.baseline_head = head;
  }

  return report;
}

// ---------------------------------------------------------------------------
// Finite-difference oracle

GradcheckReport gradcheck(
    const std::function<double(const Eigen::VectorXd&)>& loss_fn,
    const Eigen::VectorXd& params, const Eigen::VectorXd& analytic_grad,
    double step, double tolerance) {
  if (analytic_grad.size() != params.size()) {
    throw std::invalid_argument("analytic gradient has wrong length");
  }
  GradcheckReport report;
  report.rel_errors.resize(params.size());
  Eigen::VectorXd probe = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    probe[i] = params[i] + step;
    const double up = loss_fn(probe);
    probe[i] = params[i] - step;
    const double down = loss_fn(probe);
    probe[i] = params[i];
    const double fd = (up - down) / (2.0 * step);
    const double a = analytic_grad[i];
    const double rel =
        std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
    report.rel_errors[i] = rel;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = static_cast<int>(i);
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

namespace {

// Finite differences are only meaningful away from the kernels' subgradient
// kinks (cone height floor, hollow-shell axis, |w - h|); verify every pair
// and MC sample keeps a margin before trusting the oracle on a scene.
// An exactly-zero offset is immune: z stays pinned at the origin under any
// parameter perturbation.
bool scene_clears_kinks(const GiblyLayer& layer, const PointCloud& cloud,
                        const NeighborhoodIndex& index) {
  const ScaleSchedule& schedule = layer.config.schedule;
  std::vector<Vec3> offsets;
  for (int i = 0; i < cloud.size(); ++i) {
    const std::vector<int> nbrs = index.radius_neighbors(
        cloud.coords[i], schedule.largest_radius());
    for (int idx : nbrs) offsets.push_back(cloud.coords[idx] - cloud.coords[i]);
  }
  for (const McSampleSet& mc : layer.mc_sets) {
    offsets.insert(offsets.end(), mc.samples.begin(), mc.samples.end());
  }
  for (const GibParams& p : layer.gibs) {
    const PreparedGib gib(p);
    const bool cone = kind_uses_beta(p.kind);
    const bool hollow_radial =
        p.kind == GibKind::HollowCylinder || p.kind == GibKind::HollowCone ||
        p.kind == GibKind::HollowDisk;
    const bool disk = kind_uses_w(p.kind);
    const bool hollow_ellip = p.kind == GibKind::HollowEllipsoid;
    if (!cone && !hollow_radial && !disk && !hollow_ellip) continue;
    for (const Vec3& o : offsets) {
      const double len = o.norm();
      if (len == 0.0) continue;
      const double guard = std::max(1e-4, 1e-3 * len);
      const CanonicalOffset z = gib.canonicalize(o);
      if (cone && std::abs(z.z3 - kMinConeHeight) < guard) return false;
      if (hollow_radial && z.rho() < guard) return false;
      if (disk && std::abs(p.w - z.z3) < guard) return false;
      if (hollow_ellip) {
        double q = 0.0;
        const double zz[3] = {z.z1, z.z2, z.z3};
        for (int i = 0; i < 3; ++i) {
          q += positive_scale(p.ell_scales[i]) * zz[i] * zz[i];
        }
        if (std::sqrt(q) < guard) return false;
      }
    }
  }
  return true;
}

}  // namespace

GradcheckReport layer_gradcheck(const GiblyConfig& config, int num_points,
                                std::uint64_t scene_seed, double step,
                                double tolerance) {
  if (num_points < 1) throw std::invalid_argument("num_points must be >= 1");
  validate_config(config);

  const double spread = 1.5 * config.schedule.largest_radius();
  PointCloud cloud;
  for (int attempt = 0; attempt < 64; ++attempt) {
    GiblyConfig cfg = config;
    cfg.global_seed = derive_seed(config.global_seed, attempt);
    GiblyLayer layer = make_layer(cfg, 0);
    // The L1 penalty has its own kink at zero weights.
    if (layer.weights.w.cwiseAbs().minCoeff() < 1e-4) continue;

    cloud.coords.clear();
    Rng rng(derive_seed(scene_seed, attempt));
    for (int i = 0; i < num_points; ++i) {
      cloud.coords.push_back({rng.uniform(-spread, spread),
                              rng.uniform(-spread, spread),
                              rng.uniform(-spread, spread)});
    }
    NeighborhoodIndex index =
        build_index(cloud, config.schedule.largest_radius());
    if (!scene_clears_kinks(layer, cloud, index)) continue;

    ForwardCache cache;
    const ForwardResult out = forward(layer, cloud, index, &cache);
    const Eigen::MatrixXd upstream =
        Eigen::MatrixXd::Ones(out.features.rows(), out.features.cols());
    const LayerGrads grads = backward(layer, cloud, index, cache, upstream);
    const Eigen::VectorXd analytic = flatten_layer_grads(layer, grads);
    const Eigen::VectorXd params = flatten_layer(layer);

    // backward folds the regularizer gradient into W, so the scalar loss
    // carries the penalty term as well.
    auto loss_fn = [&](const Eigen::VectorXd& v) {
      GiblyLayer probe = layer;
      unflatten_layer(v, probe);
      return forward(probe, cloud, index).features.sum() +
             regularizer(probe.weights, probe.config.reg).first;
    };
    return gradcheck(loss_fn, params, analytic, step, tolerance);
  }
  throw std::runtime_error(
      "could not build a kink-free gradcheck scene; try another seed");
}

}  // namespace gibly
