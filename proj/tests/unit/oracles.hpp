#pragma once

// Independent reference computations shared by the unit tests.

#include <Eigen/Dense>

#include <cmath>
#include <functional>

namespace oracle {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Plane-stress constitutive matrix written out directly.
inline Eigen::Matrix3d plane_stress(double e, double nu) {
  Eigen::Matrix3d d;
  d << 1, nu, 0, nu, 1, 0, 0, 0, (1 - nu) / 2;
  return d * e / (1 - nu * nu);
}

// Bilinear unit square, nodes (0,0) (1,0) (1,1) (0,1): B at (x, y).
inline Eigen::Matrix<double, 3, 8> strain_displacement(double x, double y) {
  const double dnx[4] = {-(1 - y), (1 - y), y, -y};
  const double dny[4] = {-(1 - x), -x, x, (1 - x)};
  Eigen::Matrix<double, 3, 8> b = Eigen::Matrix<double, 3, 8>::Zero();
  for (int k = 0; k < 4; ++k) {
    b(0, 2 * k) = dnx[k];
    b(1, 2 * k + 1) = dny[k];
    b(2, 2 * k) = dny[k];
    b(2, 2 * k + 1) = dnx[k];
  }
  return b;
}

// 2x2 Gauss quadrature of B^T D B over the unit square.
inline Eigen::Matrix<double, 8, 8> gauss_stiffness(const Eigen::Matrix3d& d) {
  const double g = 0.5 / std::sqrt(3.0);
  Eigen::Matrix<double, 8, 8> k = Eigen::Matrix<double, 8, 8>::Zero();
  for (double x : {0.5 - g, 0.5 + g}) {
    for (double y : {0.5 - g, 0.5 + g}) {
      const auto b = strain_displacement(x, y);
      k += 0.25 * b.transpose() * d * b;
    }
  }
  return k;
}

// Voigt (engineering shear) -> full 4th-order tensor, rotate, back.
inline Eigen::Matrix3d rotate_fourth_order(const Eigen::Matrix3d& e, double theta) {
  auto voigt = [](int i, int j) { return i == j ? i : 2; };
  double c[2][2][2][2];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) c[i][j][k][l] = e(voigt(i, j), voigt(k, l));
  const double r[2][2] = {{std::cos(theta), -std::sin(theta)}, {std::sin(theta), std::cos(theta)}};
  double out[2][2][2][2] = {};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
          for (int p = 0; p < 2; ++p)
            for (int q = 0; q < 2; ++q)
              for (int s = 0; s < 2; ++s)
                for (int t = 0; t < 2; ++t)
                  out[i][j][k][l] += r[i][p] * r[j][q] * r[k][s] * r[l][t] * c[p][q][s][t];
  Eigen::Matrix3d v;
  const int idx[3][2] = {{0, 0}, {1, 1}, {0, 1}};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) v(a, b) = out[idx[a][0]][idx[a][1]][idx[b][0]][idx[b][1]];
  return v;
}

}  // namespace oracle
