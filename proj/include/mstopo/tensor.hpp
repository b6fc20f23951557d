#pragma once

#include <Eigen/Dense>

namespace mstopo {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Vec8 = Eigen::Matrix<double, 8, 1>;

/// 2D elasticity tensor in Voigt order (11, 22, 12) with engineering shear.
struct ElasticityTensor {
  Mat3 m = Mat3::Zero();

  ElasticityTensor() = default;
  explicit ElasticityTensor(const Mat3& values) : m(values) {}

  double operator()(int i, int j) const { return m(i, j); }

  /// Plane bulk modulus (E11 + E22 + 2 E12) / 4.
  double bulk_modulus() const { return 0.25 * (m(0, 0) + m(1, 1) + 2.0 * m(0, 1)); }
};

/// Isotropic base material plus SIMP interpolation parameters.
struct Material {
  double e0 = 1.0;
  double nu = 0.3;
  double simp_p = 3.0;
  double e_min = 1e-9;

  /// Modified SIMP modulus factor e_min + rho^p (1 - e_min).
  double simp(double rho) const;
  /// Derivative of simp() with respect to rho.
  double simp_derivative(double rho) const;
  /// Plane-stress constitutive matrix of the solid phase.
  ElasticityTensor base_tensor() const;
};

}  // namespace mstopo
