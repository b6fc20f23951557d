#pragma once

// Loss terms, penalty schedules and their assembly into the per-mode losses.

#include <Eigen/Dense>

#include <string_view>
#include <vector>

#include "mstopo/tensor.hpp"

namespace mstopo {

enum class Mode { inverse_homog_field, concurrent, metamaterial };

Mode parse_mode(std::string_view name);
std::string_view mode_name(Mode mode);

/// Weight preset for bulk-modulus maximization: c = -(E11 + E12 + E21 + E22).
Mat3 bulk_weights();

struct TensorObjective {
  double value = 0.0;
  Mat3 gradient = Mat3::Zero();  // dc / dE^H
};

/// c = -sum_ij w_ij E_ij over the symmetric weight matrix.
TensorObjective weighted_tensor_objective(const ElasticityTensor& eh, const Mat3& weights);

/// Voigt strain transformation into a frame rotated by theta.
Mat3 voigt_rotation(double theta);

/// Tensor of the material rotated counterclockwise by theta: T^T E T.
ElasticityTensor rotate_tensor(const ElasticityTensor& eh, double theta);

/// Weights w' such that <w', E> = <w, rotate_tensor(E, -theta)>: the weights of
/// a material-frame objective expressed in the physical frame.
Mat3 weights_to_physical(const Mat3& weights, double theta);

struct VolumePenalty {
  double value = 0.0;
  double d_vf = 0.0;  // d value / d vf (multiply by 1 / N per sample)
};

/// (vf / vf_target - 1)^2 scaled by alpha.
VolumePenalty volume_penalty(double vf_current, double vf_target, double alpha);

struct BoundaryLoss {
  double value = 0.0;
  Eigen::VectorXd d_center;
  Eigen::VectorXd d_neighbor;
};

/// Mean absolute difference of aligned samples; subgradient 0 at ties.
BoundaryLoss boundary_loss(const Eigen::VectorXd& center, const Eigen::VectorXd& neighbor);

/// Objective of the uniform design at vf_target: weighted objective of
/// SIMP(vf_target) times the base tensor. Throws when it is zero.
double normalization_constant(double vf_target, const Mat3& weights, const Material& material);

struct Schedules {
  double alpha_start = 1.0;
  double alpha_end = 100.0;
  int beta_start_epoch = 50;
  double beta_end = 1.0;
  int total_epochs = 300;
  bool boundary_enabled = true;

  /// Linear ramp from alpha_start at epoch 1 to alpha_end at total_epochs.
  double alpha(int epoch) const;
  /// Zero before beta_start_epoch, then linear up to beta_end at total_epochs.
  double beta(int epoch) const;
};

struct LossBreakdown {
  double objective = 0.0;
  double volume = 0.0;
  double boundary = 0.0;
  double displacement = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double total = 0.0;
};

/// Per-cell ingredients of a loss evaluation.
struct CellTerms {
  double objective = 0.0;          // c_i / |c0_i| (unused in concurrent mode)
  Eigen::VectorXd d_objective;     // per patch sample; in concurrent mode the
                                   // gradient of the global c / c0
  Eigen::VectorXd d_displacement;  // per patch sample (metamaterial)
  double vf = 0.0;
  double vf_target = 0.5;
  std::vector<int> unit_samples;   // patch rows counted in vf
  Eigen::Index patch_size = 0;
  BoundaryLoss boundary;           // empty vectors when not evaluated
};

struct LossInputs {
  Mode mode = Mode::inverse_homog_field;
  std::vector<CellTerms> cells;
  double global_objective = 0.0;           // concurrent: c / c0
  Eigen::VectorXd d_global_objective_macro;  // concurrent: d(c/c0)/d rho_M per cell
  Eigen::VectorXd rho_macro;                 // concurrent
  double vf_macro_target = 0.5;              // concurrent
  double displacement = 0.0;               // metamaterial: normalized F
};

struct CellGradient {
  Eigen::VectorXd patch;
  Eigen::VectorXd center_boundary;
  Eigen::VectorXd neighbor_boundary;
};

struct LossEvaluation {
  LossBreakdown breakdown;
  std::vector<CellGradient> cells;
  Eigen::VectorXd d_rho_macro;  // concurrent only
};

/// Gradient of the combined loss with respect to one cell's samples; depends
/// only on that cell's terms, the number of averaged cells and the weights.
CellGradient cell_gradient(const CellTerms& terms, Mode mode, double inv_n, double alpha,
                           double beta);

/// Assembles the mode's loss from per-cell terms at a given epoch:
///   inverse:      mean_i(c_i/|c0_i|) + alpha mean_i(P_i) + beta mean_i(Lbc_i)
///   concurrent:   c/c0 + alpha P_M + alpha mean_i(P_i) + beta mean_i(Lbc_i)
///   metamaterial: mean_i(c_i/|c0_i|) + alpha F + alpha mean_i(P_i) + beta mean_i(Lbc_i)
/// and the density gradients of the total.
LossEvaluation combined_loss(const LossInputs& inputs, const Schedules& schedules, int epoch);

}  // namespace mstopo
