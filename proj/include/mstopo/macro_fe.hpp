#pragma once

// Macro-scale linear elasticity on an n_cells_x by n_cells_y mesh of unit
// bilinear quads, one element per microstructure cell, each with its own
// (generally anisotropic) constitutive matrix.
//
// Node (i, j) sits at index j * (nx + 1) + i with DOFs 2n (x) and 2n + 1 (y).

#include <Eigen/Dense>

#include <memory>
#include <vector>

#include "mstopo/homogenize.hpp"
#include "mstopo/tensor.hpp"

namespace mstopo {

struct MacroProblem {
  int nx = 1;
  int ny = 1;
  std::vector<int> fixed_dofs;
  Eigen::VectorXd loads;     // per DOF
  Eigen::VectorXd gamma;     // 0/1 mask of targeted DOFs (may be empty)
  Eigen::VectorXd u_target;  // per DOF, zero off the mask (may be empty)
  double vf_macro = 0.5;
  double vf_micro = 0.5;
  std::vector<bool> solid_mask;  // per cell (may be empty)

  MacroProblem() = default;
  MacroProblem(int nx_, int ny_);

  int n_nodes() const { return (nx + 1) * (ny + 1); }
  int n_dofs() const { return 2 * n_nodes(); }
  int node(int i, int j) const { return j * (nx + 1) + i; }
  std::array<int, 8> element_dofs(int cell) const;

  /// Throws InvalidArgument on inconsistent sizes or values.
  void validate() const;
};

/// Element stiffness of a unit square bilinear quad for constitutive matrix d.
Mat8 macro_element_stiffness(const Mat3& d);

/// Integral over a unit element of B a (B b)^T, symmetrized. For any
/// symmetric D: a^T k(D) b = <D, strain_moment(a, b)>.
Mat3 strain_moment(const Vec8& a, const Vec8& b);

std::vector<ElasticityTensor> simp_interpolate_macro(const Eigen::VectorXd& rho_macro,
                                                     const std::vector<ElasticityTensor>& eh,
                                                     const Material& material);

class MacroFactorization;

struct MacroSolve {
  Eigen::VectorXd u;
  double compliance = 0.0;  // 0.5 u^T K u
  double relative_residual = 0.0;
  std::vector<ElasticityTensor> tensors;
  std::shared_ptr<const MacroFactorization> factorization;

  /// Solves K x = rhs with the stored factorization (fixed DOFs stay zero).
  Eigen::VectorXd solve_again(const Eigen::VectorXd& rhs) const;
  Vec8 element_u(const MacroProblem& problem, int cell) const;
};

MacroSolve solve_macro(const MacroProblem& problem, const std::vector<ElasticityTensor>& tensors);

struct ComplianceSensitivities {
  Eigen::VectorXd d_rho_macro;               // per cell
  std::vector<Eigen::VectorXd> d_rho_micro;  // per cell, per micro element
  std::vector<Mat3> d_tensor;                // dC / dE^H per cell
};

/// Per-cell sensitivity field of E^H; cells with an empty field are skipped.
using CellSensitivities = std::vector<SensitivityField>;

ComplianceSensitivities compliance_sensitivities(const MacroProblem& problem,
                                                 const MacroSolve& solve,
                                                 const Eigen::VectorXd& rho_macro,
                                                 const std::vector<ElasticityTensor>& eh,
                                                 const CellSensitivities& deh_drho_micro,
                                                 const Material& material);

/// F = || gamma o u - u_t ||^2.
double displacement_objective(const MacroSolve& solve, const Eigen::VectorXd& gamma,
                              const Eigen::VectorXd& u_target);

struct DisplacementSensitivities {
  std::vector<Mat3> d_tensor;                // dF / dE^H per cell
  std::vector<Eigen::VectorXd> d_rho_micro;  // per cell, per micro element
};

/// Adjoint gradient: K lambda = 2 gamma o (u - u_t), dF/dx = -lambda^T dK/dx u.
/// `macro_scale` multiplies E^H into E_M per cell (all ones when rho_M = 1).
DisplacementSensitivities displacement_sensitivities(const MacroProblem& problem,
                                                     const MacroSolve& solve,
                                                     const Eigen::VectorXd& gamma,
                                                     const Eigen::VectorXd& u_target,
                                                     const CellSensitivities& deh_drho_micro,
                                                     const Eigen::VectorXd& macro_scale);

}  // namespace mstopo
