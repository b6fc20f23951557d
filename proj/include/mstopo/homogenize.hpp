#pragma once

// Energy-based periodic homogenization on a grid of unit square bilinear
// elements. Three unit test strains (11, 22, 12) are imposed as affine
// fields; the periodic fluctuation solving K chi = F is subtracted, and the
// mutual energies of the resulting element displacements give E^H.

#include <Eigen/Dense>

#include <array>
#include <vector>

#include "mstopo/tensor.hpp"

namespace mstopo {

/// Element densities, element (a, b) stored at b * nx + a (b = 0 at the bottom).
struct DensityGrid {
  int nx = 0;
  int ny = 0;
  Eigen::VectorXd values;

  DensityGrid() = default;
  DensityGrid(int nx_, int ny_, Eigen::VectorXd v);
  static DensityGrid uniform(int nx, int ny, double value);
  Eigen::Index size() const { return values.size(); }
};

/// Stiffness of a unit bilinear square, E = 1, plane stress, unit thickness.
/// Node order: (0,0), (1,0), (1,1), (0,1); DOFs interleaved (ux, uy).
Mat8 base_element_stiffness(double nu);

/// Nodal displacements of an element under the affine unit strain `load`
/// (0: eps11, 1: eps22, 2: engineering shear gamma12).
Vec8 unit_strain_displacement(int load);

struct UnitCellSolve {
  DensityGrid density;
  Material material;
  /// Periodic fluctuation fields, 2 DOFs per unique node (nx * ny nodes).
  std::array<Eigen::VectorXd, 3> fluctuation;
  double relative_residual = 0.0;

  /// Element displacement u0 - chi for load case `load`.
  Vec8 element_displacement(int element, int load) const;
};

UnitCellSolve solve_unit_cell(const DensityGrid& density, const Material& material);

ElasticityTensor homogenized_tensor(const UnitCellSolve& solve);

/// dE^H / drho_e for each element.
using SensitivityField = std::vector<Mat3>;
SensitivityField tensor_sensitivity(const UnitCellSolve& solve);

struct Homogenization {
  ElasticityTensor tensor;
  SensitivityField sensitivity;
};

/// Solve, tensor and sensitivities in one pass.
Homogenization homogenize(const DensityGrid& density, const Material& material);

/// Plane bulk and shear moduli of the isotropic solid.
double plane_bulk_modulus(double e0, double nu);
double plane_shear_modulus(double e0, double nu);

/// Hashin-Shtrikman upper bound on the plane bulk modulus of a solid/void
/// composite at volume fraction vf.
double hs_upper_bound(double vf, double e0, double nu);

}  // namespace mstopo
