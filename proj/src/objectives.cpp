#include "mstopo/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mstopo/errors.hpp"

namespace mstopo {

Mode parse_mode(std::string_view name) {
  if (name == "inverse_homog_field") return Mode::inverse_homog_field;
  if (name == "concurrent") return Mode::concurrent;
  if (name == "metamaterial") return Mode::metamaterial;
  throw InvalidArgument("unknown mode '" + std::string(name) + "'");
}

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::inverse_homog_field:
      return "inverse_homog_field";
    case Mode::concurrent:
      return "concurrent";
    case Mode::metamaterial:
      return "metamaterial";
  }
  return "unknown";
}

Mat3 bulk_weights() {
  Mat3 w;
  w << 1, 1, 0, 1, 1, 0, 0, 0, 0;
  return w;
}

TensorObjective weighted_tensor_objective(const ElasticityTensor& eh, const Mat3& weights) {
  if ((weights - weights.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, weights.cwiseAbs().maxCoeff())) {
    throw InvalidArgument("weighted_tensor_objective: weights must be symmetric");
  }
  TensorObjective out;
  out.value = -(weights.array() * eh.m.array()).sum();
  out.gradient = -weights;
  return out;
}

Mat3 voigt_rotation(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat3 t;
  t << c * c, s * s, c * s,
       s * s, c * c, -c * s,
       -2.0 * c * s, 2.0 * c * s, c * c - s * s;
  return t;
}

ElasticityTensor rotate_tensor(const ElasticityTensor& eh, double theta) {
  const Mat3 t = voigt_rotation(theta);
  const Mat3 r = t.transpose() * eh.m * t;
  return ElasticityTensor(0.5 * (r + r.transpose()));
}

Mat3 weights_to_physical(const Mat3& weights, double theta) {
  if (theta == 0.0) {
    return weights;
  }
  const Mat3 t = voigt_rotation(-theta);
  const Mat3 w = t * weights * t.transpose();
  return 0.5 * (w + w.transpose());
}

VolumePenalty volume_penalty(double vf_current, double vf_target, double alpha) {
  if (!(vf_target > 0.0)) {
    throw InvalidArgument("volume_penalty: target volume fraction must be positive");
  }
  const double r = vf_current / vf_target - 1.0;
  return {alpha * r * r, 2.0 * alpha * r / vf_target};
}

BoundaryLoss boundary_loss(const Eigen::VectorXd& center, const Eigen::VectorXd& neighbor) {
  if (center.size() != neighbor.size()) {
    throw InvalidArgument("boundary_loss: center and neighbor batches differ in length");
  }
  BoundaryLoss out;
  const Eigen::Index n = center.size();
  out.d_center = Eigen::VectorXd::Zero(n);
  out.d_neighbor = Eigen::VectorXd::Zero(n);
  if (n == 0) {
    return out;
  }
  const double inv = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double diff = neighbor(k) - center(k);
    sum += std::abs(diff);
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    out.d_neighbor(k) = sign * inv;
    out.d_center(k) = -sign * inv;
  }
  out.value = sum * inv;
  return out;
}

double normalization_constant(double vf_target, const Mat3& weights, const Material& material) {
  if (!(vf_target > 0.0 && vf_target <= 1.0)) {
    throw InvalidArgument("normalization_constant: volume fraction must lie in (0, 1]");
  }
  const ElasticityTensor uniform(material.simp(vf_target) * material.base_tensor().m);
  const double c0 = weighted_tensor_objective(uniform, weights).value;
  if (c0 == 0.0 || !std::isfinite(c0)) {
    throw InvalidArgument("normalization_constant: degenerate weights give a zero normalizer");
  }
  return c0;
}

double Schedules::alpha(int epoch) const {
  if (total_epochs <= 1) {
    return alpha_end;
  }
  const int e = std::clamp(epoch, 1, total_epochs);
  return alpha_start + (alpha_end - alpha_start) * static_cast<double>(e - 1) /
                           static_cast<double>(total_epochs - 1);
}

double Schedules::beta(int epoch) const {
  if (!boundary_enabled || epoch < beta_start_epoch) {
    return 0.0;
  }
  if (total_epochs <= beta_start_epoch) {
    return beta_end;
  }
  const int e = std::min(epoch, total_epochs);
  return beta_end * static_cast<double>(e - beta_start_epoch) /
         static_cast<double>(total_epochs - beta_start_epoch);
}

CellGradient cell_gradient(const CellTerms& t, Mode mode, double inv_n, double alpha,
                           double beta) {
  CellGradient g;
  g.patch = Eigen::VectorXd::Zero(t.patch_size);
  if (t.d_objective.size() == t.patch_size) {
    // The global compliance of the concurrent mode is not averaged.
    g.patch += mode == Mode::concurrent ? t.d_objective : (inv_n * t.d_objective).eval();
  }
  if (mode == Mode::metamaterial && t.d_displacement.size() == t.patch_size) {
    g.patch += alpha * t.d_displacement;
  }
  if (!t.unit_samples.empty()) {
    const VolumePenalty pen = volume_penalty(t.vf, t.vf_target, 1.0);
    const double per_sample =
        alpha * inv_n * pen.d_vf / static_cast<double>(t.unit_samples.size());
    for (int row : t.unit_samples) {
      g.patch(row) += per_sample;
    }
  }
  g.center_boundary = beta * inv_n * t.boundary.d_center;
  g.neighbor_boundary = beta * inv_n * t.boundary.d_neighbor;
  return g;
}

LossEvaluation combined_loss(const LossInputs& inputs, const Schedules& schedules, int epoch) {
  LossEvaluation out;
  const double alpha = schedules.alpha(epoch);
  const double beta = schedules.beta(epoch);
  const auto n = static_cast<double>(inputs.cells.size());
  const double inv_n = inputs.cells.empty() ? 0.0 : 1.0 / n;
  LossBreakdown& b = out.breakdown;
  b.alpha = alpha;
  b.beta = beta;

  // Own-cell objective terms are averaged; the global compliance and the
  // displacement mismatch are not.
  const bool averaged_objective = inputs.mode != Mode::concurrent;

  out.cells.reserve(inputs.cells.size());
  for (const CellTerms& t : inputs.cells) {
    if (averaged_objective) {
      b.objective += t.objective * inv_n;
    }
    b.volume += volume_penalty(t.vf, t.vf_target, 1.0).value * inv_n;
    b.boundary += t.boundary.value * inv_n;
    out.cells.push_back(cell_gradient(t, inputs.mode, inv_n, alpha, beta));
  }

  switch (inputs.mode) {
    case Mode::inverse_homog_field:
      break;
    case Mode::concurrent: {
      b.objective = inputs.global_objective;
      const Eigen::Index m = inputs.rho_macro.size();
      if (m > 0) {
        const double vf_macro = inputs.rho_macro.mean();
        const VolumePenalty pm = volume_penalty(vf_macro, inputs.vf_macro_target, 1.0);
        b.volume += pm.value;
        out.d_rho_macro = Eigen::VectorXd::Constant(m, alpha * pm.d_vf / static_cast<double>(m));
        if (inputs.d_global_objective_macro.size() == m) {
          out.d_rho_macro += inputs.d_global_objective_macro;
        }
      }
      break;
    }
    case Mode::metamaterial:
      b.displacement = inputs.displacement;
      break;
  }

  b.total = b.objective + alpha * b.volume + beta * b.boundary + alpha * b.displacement;
  return out;
}

}  // namespace mstopo
