#include "mstopo/macro_fe.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mstopo/errors.hpp"

namespace mstopo {

using SparseMatrix = Eigen::SparseMatrix<double>;
using StrainB = Eigen::Matrix<double, 3, 8>;

class MacroFactorization {
 public:
  MacroFactorization(SparseMatrix k_free, std::vector<int> free_dofs, int n_dofs)
      : k_free_(std::move(k_free)), free_(std::move(free_dofs)), n_dofs_(n_dofs) {
    ldlt_.compute(k_free_);
    if (ldlt_.info() != Eigen::Success) {
      throw FeError("solve_macro: stiffness factorization failed");
    }
    const Eigen::VectorXd d = ldlt_.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (!(d.minCoeff() > 1e-14 * dmax)) {
      throw FeError("solve_macro: stiffness matrix is singular (insufficient supports?)");
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs_full) const {
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(free_.size()));
    for (size_t k = 0; k < free_.size(); ++k) {
      rhs(static_cast<Eigen::Index>(k)) = rhs_full(free_[k]);
    }
    const Eigen::VectorXd x = ldlt_.solve(rhs);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n_dofs_);
    for (size_t k = 0; k < free_.size(); ++k) {
      full(free_[k]) = x(static_cast<Eigen::Index>(k));
    }
    return full;
  }

  double relative_residual(const Eigen::VectorXd& u_full, const Eigen::VectorXd& f_full) const {
    Eigen::VectorXd u(static_cast<Eigen::Index>(free_.size()));
    Eigen::VectorXd f(static_cast<Eigen::Index>(free_.size()));
    for (size_t k = 0; k < free_.size(); ++k) {
      u(static_cast<Eigen::Index>(k)) = u_full(free_[k]);
      f(static_cast<Eigen::Index>(k)) = f_full(free_[k]);
    }
    const double fn = f.norm();
    const double r = (k_free_ * u - f).norm();
    return fn > 0.0 ? r / fn : r;
  }

 private:
  SparseMatrix k_free_;
  std::vector<int> free_;
  int n_dofs_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

MacroProblem::MacroProblem(int nx_, int ny_) : nx(nx_), ny(ny_) {
  loads = Eigen::VectorXd::Zero(n_dofs());
}

std::array<int, 8> MacroProblem::element_dofs(int cell) const {
  const int i = cell % nx;
  const int j = cell / nx;
  const std::array<int, 4> nodes = {node(i, j), node(i + 1, j), node(i + 1, j + 1),
                                    node(i, j + 1)};
  std::array<int, 8> dofs{};
  for (int k = 0; k < 4; ++k) {
    dofs[static_cast<size_t>(2 * k)] = 2 * nodes[static_cast<size_t>(k)];
    dofs[static_cast<size_t>(2 * k + 1)] = 2 * nodes[static_cast<size_t>(k)] + 1;
  }
  return dofs;
}

void MacroProblem::validate() const {
  if (nx < 1 || ny < 1) {
    throw InvalidArgument("MacroProblem: mesh must have at least one element");
  }
  if (loads.size() != n_dofs()) {
    throw InvalidArgument("MacroProblem: load vector length does not match DOF count");
  }
  if (!loads.allFinite()) {
    throw InvalidArgument("MacroProblem: non-finite loads");
  }
  std::vector<int> fixed = fixed_dofs;
  std::sort(fixed.begin(), fixed.end());
  fixed.erase(std::unique(fixed.begin(), fixed.end()), fixed.end());
  if (fixed.size() < 3) {
    throw InvalidArgument("MacroProblem: at least 3 constrained DOFs are required");
  }
  for (int d : fixed) {
    if (d < 0 || d >= n_dofs()) {
      throw InvalidArgument("MacroProblem: fixed DOF out of range");
    }
  }
  if (gamma.size() != 0) {
    if (gamma.size() != n_dofs() || u_target.size() != n_dofs()) {
      throw InvalidArgument("MacroProblem: gamma/u_target length does not match DOF count");
    }
    for (Eigen::Index k = 0; k < gamma.size(); ++k) {
      if (gamma(k) != 0.0 && gamma(k) != 1.0) {
        throw InvalidArgument("MacroProblem: gamma entries must be 0 or 1");
      }
    }
  }
  if (!solid_mask.empty() && solid_mask.size() != static_cast<size_t>(nx * ny)) {
    throw InvalidArgument("MacroProblem: solid mask length does not match cell count");
  }
}

namespace {

StrainB strain_matrix(double x, double y) {
  const std::array<double, 4> dx = {-(1.0 - y), 1.0 - y, y, -y};
  const std::array<double, 4> dy = {-(1.0 - x), -x, x, 1.0 - x};
  StrainB b = StrainB::Zero();
  for (size_t k = 0; k < 4; ++k) {
    const auto c = static_cast<Eigen::Index>(2 * k);
    b(0, c) = dx[k];
    b(1, c + 1) = dy[k];
    b(2, c) = dy[k];
    b(2, c + 1) = dx[k];
  }
  return b;
}

const std::array<StrainB, 4>& gauss_strain_matrices() {
  static const std::array<StrainB, 4> mats = [] {
    const double g = 0.5 / std::sqrt(3.0);
    std::array<StrainB, 4> out;
    int k = 0;
    for (double y : {0.5 - g, 0.5 + g}) {
      for (double x : {0.5 - g, 0.5 + g}) {
        out[static_cast<size_t>(k++)] = strain_matrix(x, y);
      }
    }
    return out;
  }();
  return mats;
}

}  // namespace

Mat8 macro_element_stiffness(const Mat3& d) {
  Mat8 k = Mat8::Zero();
  for (const StrainB& b : gauss_strain_matrices()) {
    k += 0.25 * b.transpose() * d * b;
  }
  return k;
}

Mat3 strain_moment(const Vec8& a, const Vec8& b) {
  Mat3 g = Mat3::Zero();
  for (const StrainB& bm : gauss_strain_matrices()) {
    g += 0.25 * (bm * a) * (bm * b).transpose();
  }
  return 0.5 * (g + g.transpose());
}

std::vector<ElasticityTensor> simp_interpolate_macro(const Eigen::VectorXd& rho_macro,
                                                     const std::vector<ElasticityTensor>& eh,
                                                     const Material& material) {
  if (static_cast<size_t>(rho_macro.size()) != eh.size()) {
    throw InvalidArgument("simp_interpolate_macro: density and tensor counts differ");
  }
  std::vector<ElasticityTensor> out;
  out.reserve(eh.size());
  for (size_t i = 0; i < eh.size(); ++i) {
    const double rho = rho_macro(static_cast<Eigen::Index>(i));
    if (rho < 0.0 || rho > 1.0) {
      throw InvalidArgument("simp_interpolate_macro: macro density outside [0, 1]");
    }
    out.emplace_back(material.simp(rho) * eh[i].m);
  }
  return out;
}

Eigen::VectorXd MacroSolve::solve_again(const Eigen::VectorXd& rhs) const {
  if (!factorization) {
    throw InvalidArgument("MacroSolve: no factorization available");
  }
  return factorization->solve(rhs);
}

Vec8 MacroSolve::element_u(const MacroProblem& problem, int cell) const {
  const auto dofs = problem.element_dofs(cell);
  Vec8 ue;
  for (int k = 0; k < 8; ++k) {
    ue(k) = u(dofs[static_cast<size_t>(k)]);
  }
  return ue;
}

MacroSolve solve_macro(const MacroProblem& problem, const std::vector<ElasticityTensor>& tensors) {
  problem.validate();
  const int n_cells = problem.nx * problem.ny;
  if (tensors.size() != static_cast<size_t>(n_cells)) {
    throw InvalidArgument("solve_macro: need one constitutive tensor per cell");
  }
  const int n_dofs = problem.n_dofs();
  std::vector<char> is_fixed(static_cast<size_t>(n_dofs), 0);
  for (int d : problem.fixed_dofs) {
    is_fixed[static_cast<size_t>(d)] = 1;
  }
  std::vector<int> free_dofs;
  std::vector<int> reduced(static_cast<size_t>(n_dofs), -1);
  for (int d = 0; d < n_dofs; ++d) {
    if (!is_fixed[static_cast<size_t>(d)]) {
      reduced[static_cast<size_t>(d)] = static_cast<int>(free_dofs.size());
      free_dofs.push_back(d);
    }
  }

  std::vector<Eigen::Triplet<double>> full_triplets;
  std::vector<Eigen::Triplet<double>> free_triplets;
  full_triplets.reserve(static_cast<size_t>(n_cells) * 64);
  free_triplets.reserve(static_cast<size_t>(n_cells) * 64);
  for (int c = 0; c < n_cells; ++c) {
    if (!tensors[static_cast<size_t>(c)].m.allFinite()) {
      throw FeError("solve_macro: non-finite constitutive tensor");
    }
    const Mat8 ke = macro_element_stiffness(tensors[static_cast<size_t>(c)].m);
    const auto dofs = problem.element_dofs(c);
    for (int r = 0; r < 8; ++r) {
      for (int s = 0; s < 8; ++s) {
        const int gr = dofs[static_cast<size_t>(r)];
        const int gs = dofs[static_cast<size_t>(s)];
        full_triplets.emplace_back(gr, gs, ke(r, s));
        const int fr = reduced[static_cast<size_t>(gr)];
        const int fs = reduced[static_cast<size_t>(gs)];
        if (fr >= 0 && fs >= 0) {
          free_triplets.emplace_back(fr, fs, ke(r, s));
        }
      }
    }
  }
  SparseMatrix k_full(n_dofs, n_dofs);
  k_full.setFromTriplets(full_triplets.begin(), full_triplets.end());
  SparseMatrix k_free(static_cast<Eigen::Index>(free_dofs.size()),
                      static_cast<Eigen::Index>(free_dofs.size()));
  k_free.setFromTriplets(free_triplets.begin(), free_triplets.end());

  MacroSolve out;
  auto fact = std::make_shared<MacroFactorization>(std::move(k_free), free_dofs, n_dofs);
  out.u = fact->solve(problem.loads);
  out.relative_residual = fact->relative_residual(out.u, problem.loads);
  if (!(out.relative_residual <= 1e-8)) {
    std::ostringstream msg;
    msg << "solve_macro: relative residual " << out.relative_residual << " exceeds 1e-8";
    throw FeError(msg.str());
  }
  out.compliance = 0.5 * out.u.dot(k_full * out.u);
  out.tensors = tensors;
  out.factorization = std::move(fact);
  return out;
}

namespace {

Eigen::VectorXd chain_to_micro(const Mat3& d_tensor, const SensitivityField& field) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(field.size()));
  for (size_t e = 0; e < field.size(); ++e) {
    out(static_cast<Eigen::Index>(e)) = (d_tensor.array() * field[e].array()).sum();
  }
  return out;
}

}  // namespace

ComplianceSensitivities compliance_sensitivities(const MacroProblem& problem,
                                                 const MacroSolve& solve,
                                                 const Eigen::VectorXd& rho_macro,
                                                 const std::vector<ElasticityTensor>& eh,
                                                 const CellSensitivities& deh_drho_micro,
                                                 const Material& material) {
  const int n_cells = problem.nx * problem.ny;
  if (rho_macro.size() != n_cells || eh.size() != static_cast<size_t>(n_cells)) {
    throw InvalidArgument("compliance_sensitivities: per-cell inputs have the wrong length");
  }
  ComplianceSensitivities out;
  out.d_rho_macro.resize(n_cells);
  out.d_rho_micro.resize(static_cast<size_t>(n_cells));
  out.d_tensor.resize(static_cast<size_t>(n_cells));
  for (int c = 0; c < n_cells; ++c) {
    const Vec8 ue = solve.element_u(problem, c);
    const Mat3 g = strain_moment(ue, ue);
    const double rho = rho_macro(c);
    out.d_rho_macro(c) =
        -0.5 * material.simp_derivative(rho) * (eh[static_cast<size_t>(c)].m.array() * g.array()).sum();
    out.d_tensor[static_cast<size_t>(c)] = -0.5 * material.simp(rho) * g;
    if (static_cast<size_t>(c) < deh_drho_micro.size() &&
        !deh_drho_micro[static_cast<size_t>(c)].empty()) {
      out.d_rho_micro[static_cast<size_t>(c)] =
          chain_to_micro(out.d_tensor[static_cast<size_t>(c)], deh_drho_micro[static_cast<size_t>(c)]);
    }
  }
  return out;
}

double displacement_objective(const MacroSolve& solve, const Eigen::VectorXd& gamma,
                              const Eigen::VectorXd& u_target) {
  if (gamma.size() != solve.u.size() || u_target.size() != solve.u.size()) {
    throw InvalidArgument("displacement_objective: mask/target length does not match u");
  }
  return (gamma.cwiseProduct(solve.u) - u_target).squaredNorm();
}

DisplacementSensitivities displacement_sensitivities(const MacroProblem& problem,
                                                     const MacroSolve& solve,
                                                     const Eigen::VectorXd& gamma,
                                                     const Eigen::VectorXd& u_target,
                                                     const CellSensitivities& deh_drho_micro,
                                                     const Eigen::VectorXd& macro_scale) {
  const int n_cells = problem.nx * problem.ny;
  if (gamma.size() != solve.u.size() || u_target.size() != solve.u.size()) {
    throw InvalidArgument("displacement_sensitivities: mask/target length does not match u");
  }
  if (macro_scale.size() != n_cells) {
    throw InvalidArgument("displacement_sensitivities: macro_scale needs one entry per cell");
  }
  const Eigen::VectorXd rhs = 2.0 * gamma.cwiseProduct(gamma.cwiseProduct(solve.u) - u_target);
  const Eigen::VectorXd lambda = solve.solve_again(rhs);

  DisplacementSensitivities out;
  out.d_tensor.resize(static_cast<size_t>(n_cells));
  out.d_rho_micro.resize(static_cast<size_t>(n_cells));
  for (int c = 0; c < n_cells; ++c) {
    const auto dofs = problem.element_dofs(c);
    Vec8 le;
    for (int k = 0; k < 8; ++k) {
      le(k) = lambda(dofs[static_cast<size_t>(k)]);
    }
    const Vec8 ue = solve.element_u(problem, c);
    out.d_tensor[static_cast<size_t>(c)] = -macro_scale(c) * strain_moment(le, ue);
    if (static_cast<size_t>(c) < deh_drho_micro.size() &&
        !deh_drho_micro[static_cast<size_t>(c)].empty()) {
      out.d_rho_micro[static_cast<size_t>(c)] =
          chain_to_micro(out.d_tensor[static_cast<size_t>(c)], deh_drho_micro[static_cast<size_t>(c)]);
    }
  }
  return out;
}

}  // namespace mstopo
