#include "mstopo/homogenize.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cmath>
#include <sstream>

#include "mstopo/errors.hpp"

namespace mstopo {

double Material::simp(double rho) const {
  return e_min + std::pow(rho, simp_p) * (1.0 - e_min);
}

double Material::simp_derivative(double rho) const {
  if (rho == 0.0) {
    return simp_p == 1.0 ? (1.0 - e_min) : 0.0;
  }
  return simp_p * std::pow(rho, simp_p - 1.0) * (1.0 - e_min);
}

ElasticityTensor Material::base_tensor() const {
  const double f = e0 / (1.0 - nu * nu);
  Mat3 d;
  d << f, f * nu, 0.0, f * nu, f, 0.0, 0.0, 0.0, f * (1.0 - nu) / 2.0;
  return ElasticityTensor(d);
}

DensityGrid::DensityGrid(int nx_, int ny_, Eigen::VectorXd v)
    : nx(nx_), ny(ny_), values(std::move(v)) {
  if (values.size() != static_cast<Eigen::Index>(nx) * ny) {
    throw InvalidArgument("DensityGrid: value count does not match nx * ny");
  }
}

DensityGrid DensityGrid::uniform(int nx, int ny, double value) {
  return DensityGrid(nx, ny, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(nx) * ny, value));
}

Mat8 base_element_stiffness(double nu) {
  // Closed-form bilinear square stiffness (the 88-line topology code's KE).
  Eigen::Matrix4d a11, a12, b11, b12;
  a11 << 12, 3, -6, -3, 3, 12, 3, 0, -6, 3, 12, -3, -3, 0, -3, 12;
  a12 << -6, -3, 0, 3, -3, -6, -3, -6, 0, -3, -6, 3, 3, -6, 3, -6;
  b11 << -4, 3, -2, 9, 3, -4, -9, 4, -2, -9, -4, -3, 9, 4, -3, -4;
  b12 << 2, -3, 4, -9, -3, 2, 9, -2, 4, 9, 2, 3, -9, -2, 3, 2;
  Mat8 a, b;
  a << a11, a12, a12.transpose(), a11;
  b << b11, b12, b12.transpose(), b11;
  return (a + nu * b) / (24.0 * (1.0 - nu * nu));
}

Vec8 unit_strain_displacement(int load) {
  Vec8 u;
  switch (load) {
    case 0:
      u << 0, 0, 1, 0, 1, 0, 0, 0;
      break;
    case 1:
      u << 0, 0, 0, 0, 0, 1, 0, 1;
      break;
    case 2:
      u << 0, 0, 0, 0.5, 0.5, 0.5, 0.5, 0;
      break;
    default:
      throw InvalidArgument("unit_strain_displacement: load must be 0, 1 or 2");
  }
  return u;
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;

std::array<int, 8> element_dofs(int a, int b, int nx, int ny) {
  const int a1 = (a + 1) % nx;
  const int b1 = (b + 1) % ny;
  const std::array<int, 4> nodes = {b * nx + a, b * nx + a1, b1 * nx + a1, b1 * nx + a};
  std::array<int, 8> dofs{};
  for (int k = 0; k < 4; ++k) {
    dofs[2 * k] = 2 * nodes[k];
    dofs[2 * k + 1] = 2 * nodes[k] + 1;
  }
  return dofs;
}

// Node 0 is pinned; its two DOFs are removed from the reduced system.
constexpr int kPinned = 2;

}  // namespace

Vec8 UnitCellSolve::element_displacement(int element, int load) const {
  const int a = element % density.nx;
  const int b = element / density.nx;
  const auto dofs = element_dofs(a, b, density.nx, density.ny);
  Vec8 d = unit_strain_displacement(load);
  const Eigen::VectorXd& chi = fluctuation[static_cast<size_t>(load)];
  for (int k = 0; k < 8; ++k) {
    d(k) -= chi(dofs[static_cast<size_t>(k)]);
  }
  return d;
}

UnitCellSolve solve_unit_cell(const DensityGrid& density, const Material& material) {
  const int nx = density.nx;
  const int ny = density.ny;
  if (nx < 2 || ny < 2) {
    throw InvalidArgument("solve_unit_cell: need at least 2 elements per edge");
  }
  if (density.values.size() != static_cast<Eigen::Index>(nx) * ny) {
    throw InvalidArgument("solve_unit_cell: density size does not match grid");
  }
  if ((density.values.array() < 0.0).any() || (density.values.array() > 1.0).any() ||
      !density.values.allFinite()) {
    throw InvalidArgument("solve_unit_cell: densities must lie in [0, 1]");
  }
  if (density.values.maxCoeff() <= 0.0) {
    throw FeError("solve_unit_cell: all-void cell has no load-bearing material");
  }

  const int n_dofs = 2 * nx * ny;
  const int n_free = n_dofs - kPinned;
  const Mat8 k0 = material.e0 * base_element_stiffness(material.nu);
  std::array<Vec8, 3> element_load;
  for (int l = 0; l < 3; ++l) {
    element_load[static_cast<size_t>(l)] = k0 * unit_strain_displacement(l);
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(nx) * ny * 64);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n_free, 3);
  Eigen::Vector3d scale = Eigen::Vector3d::Zero();
  for (int b = 0; b < ny; ++b) {
    for (int a = 0; a < nx; ++a) {
      const double s = material.simp(density.values(b * nx + a));
      const auto dofs = element_dofs(a, b, nx, ny);
      for (int r = 0; r < 8; ++r) {
        const int gr = dofs[static_cast<size_t>(r)] - kPinned;
        if (gr < 0) {
          continue;
        }
        for (int l = 0; l < 3; ++l) {
          rhs(gr, l) += s * element_load[static_cast<size_t>(l)](r);
        }
        for (int c = 0; c < 8; ++c) {
          const int gc = dofs[static_cast<size_t>(c)] - kPinned;
          if (gc >= 0) {
            triplets.emplace_back(gr, gc, s * k0(r, c));
          }
        }
      }
      for (int l = 0; l < 3; ++l) {
        scale(l) += s * s * element_load[static_cast<size_t>(l)].squaredNorm();
      }
    }
  }
  SparseMatrix k(n_free, n_free);
  k.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::MatrixXd chi(n_free, 3);
  if (nx * ny <= 64 * 64) {
    Eigen::SimplicialLLT<SparseMatrix> llt(k);
    if (llt.info() != Eigen::Success) {
      throw FeError("solve_unit_cell: stiffness matrix is singular");
    }
    chi = llt.solve(rhs);
  } else {
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg(k);
    cg.setTolerance(1e-10);
    cg.setMaxIterations(20 * n_free);
    chi = cg.solve(rhs);
    if (cg.info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "solve_unit_cell: conjugate gradient did not converge (error " << cg.error()
          << ")";
      throw FeError(msg.str());
    }
  }

  UnitCellSolve out;
  out.density = density;
  out.material = material;
  double worst = 0.0;
  for (int l = 0; l < 3; ++l) {
    const double res = (k * chi.col(l) - rhs.col(l)).norm();
    const double denom = std::max(rhs.col(l).norm(), std::sqrt(scale(l)));
    worst = std::max(worst, denom > 0.0 ? res / denom : res);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n_dofs);
    full.tail(n_free) = chi.col(l);
    out.fluctuation[static_cast<size_t>(l)] = std::move(full);
  }
  out.relative_residual = worst;
  if (!(worst <= 1e-8)) {
    std::ostringstream msg;
    msg << "solve_unit_cell: relative residual " << worst << " exceeds 1e-8";
    throw FeError(msg.str());
  }
  return out;
}

namespace {

// Mutual-energy matrix d_i^T k0 d_j of one element over the three load cases.
Mat3 element_energy(const UnitCellSolve& solve, const Mat8& k0, int e) {
  Eigen::Matrix<double, 8, 3> d;
  for (int l = 0; l < 3; ++l) {
    d.col(l) = solve.element_displacement(e, l);
  }
  return d.transpose() * k0 * d;
}

}  // namespace

ElasticityTensor homogenized_tensor(const UnitCellSolve& solve) {
  const Mat8 k0 = solve.material.e0 * base_element_stiffness(solve.material.nu);
  const Eigen::Index n = solve.density.size();
  Mat3 acc = Mat3::Zero();
  for (Eigen::Index e = 0; e < n; ++e) {
    acc += solve.material.simp(solve.density.values(e)) *
           element_energy(solve, k0, static_cast<int>(e));
  }
  acc /= static_cast<double>(n);
  return ElasticityTensor(0.5 * (acc + acc.transpose()));
}

SensitivityField tensor_sensitivity(const UnitCellSolve& solve) {
  const Mat8 k0 = solve.material.e0 * base_element_stiffness(solve.material.nu);
  const Eigen::Index n = solve.density.size();
  SensitivityField out(static_cast<size_t>(n));
  for (Eigen::Index e = 0; e < n; ++e) {
    const double ds = solve.material.simp_derivative(solve.density.values(e));
    if (ds == 0.0) {
      out[static_cast<size_t>(e)] = Mat3::Zero();
      continue;
    }
    const Mat3 m = element_energy(solve, k0, static_cast<int>(e));
    out[static_cast<size_t>(e)] = ds / static_cast<double>(n) * 0.5 * (m + m.transpose());
  }
  return out;
}

Homogenization homogenize(const DensityGrid& density, const Material& material) {
  const UnitCellSolve solve = solve_unit_cell(density, material);
  const Mat8 k0 = material.e0 * base_element_stiffness(material.nu);
  const Eigen::Index n = density.size();
  Homogenization out;
  out.sensitivity.resize(static_cast<size_t>(n));
  Mat3 acc = Mat3::Zero();
  for (Eigen::Index e = 0; e < n; ++e) {
    Mat3 m = element_energy(solve, k0, static_cast<int>(e));
    m = 0.5 * (m + m.transpose());
    const double rho = density.values(e);
    acc += material.simp(rho) * m;
    out.sensitivity[static_cast<size_t>(e)] =
        material.simp_derivative(rho) / static_cast<double>(n) * m;
  }
  out.tensor = ElasticityTensor(acc / static_cast<double>(n));
  return out;
}

double plane_bulk_modulus(double e0, double nu) { return e0 / (2.0 * (1.0 - nu)); }

double plane_shear_modulus(double e0, double nu) { return e0 / (2.0 * (1.0 + nu)); }

double hs_upper_bound(double vf, double e0, double nu) {
  if (vf < 0.0 || vf > 1.0) {
    throw InvalidArgument("hs_upper_bound: volume fraction must lie in [0, 1]");
  }
  const double kappa = plane_bulk_modulus(e0, nu);
  const double mu = plane_shear_modulus(e0, nu);
  return vf * kappa * mu / ((1.0 - vf) * kappa + mu);
}

}  // namespace mstopo
