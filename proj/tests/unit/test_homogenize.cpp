#include <doctest.h>

#include <random>

#include "mstopo/errors.hpp"
#include "mstopo/homogenize.hpp"
#include "oracles.hpp"

using namespace mstopo;

namespace {

DensityGrid random_grid(int n, unsigned seed, double lo = 0.05) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, 1.0);
  Eigen::VectorXd v(n * n);
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = u(rng);
  return DensityGrid(n, n, v);
}

}  // namespace

TEST_CASE("element stiffness matches Gauss quadrature") {
  for (double nu : {0.0, 0.3, 0.45}) {
    const Mat8 k = base_element_stiffness(nu);
    const Mat8 ref = oracle::gauss_stiffness(oracle::plane_stress(1.0, nu));
    CHECK((k - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    Vec8 tx, ty;
    tx << 1, 0, 1, 0, 1, 0, 1, 0;
    ty << 0, 1, 0, 1, 0, 1, 0, 1;
    CHECK((k * tx).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((k * ty).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("solid cell reproduces the plane-stress tensor") {
  const Material m;
  const UnitCellSolve s = solve_unit_cell(DensityGrid::uniform(6, 6, 1.0), m);
  for (const auto& f : s.fluctuation) CHECK(f.cwiseAbs().maxCoeff() < 1e-10);
  const ElasticityTensor e = homogenized_tensor(s);
  CHECK((e.m - oracle::plane_stress(1.0, 0.3)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(e(0, 0) == doctest::Approx(1.0989).epsilon(1e-4));
  CHECK(e(0, 1) == doctest::Approx(0.3297).epsilon(1e-3));
  CHECK(e(2, 2) == doctest::Approx(0.3846).epsilon(1e-4));
}

TEST_CASE("uniform density scales the base tensor by SIMP") {
  const Material m;
  for (double v : {0.25, 0.5, 1.0}) {
    const UnitCellSolve s = solve_unit_cell(DensityGrid::uniform(8, 8, v), m);
    for (const auto& f : s.fluctuation) CHECK(f.cwiseAbs().maxCoeff() < 1e-10);
    const Mat3 expected = (1e-9 + v * v * v * (1 - 1e-9)) * oracle::plane_stress(1.0, 0.3);
    CHECK((homogenized_tensor(s).m - expected).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("checkerboard: fluctuations, residual, symmetry") {
  // 2 x 2 checkerboard of 2 x 2-element blocks
  Eigen::VectorXd v(16);
  for (int b = 0; b < 4; ++b)
    for (int a = 0; a < 4; ++a) v(b * 4 + a) = ((a / 2 + b / 2) % 2 == 0) ? 1.0 : 0.01;
  const UnitCellSolve s = solve_unit_cell(DensityGrid(4, 4, v), Material{});
  CHECK(s.fluctuation[0].cwiseAbs().maxCoeff() > 1e-3);
  CHECK(s.relative_residual <= 1e-8);
  const ElasticityTensor e = homogenized_tensor(s);
  CHECK((e.m - e.m.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("random cells give symmetric positive semidefinite tensors") {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const ElasticityTensor e = homogenized_tensor(solve_unit_cell(random_grid(7, seed, 0.0), {}));
    CHECK((e.m - e.m.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat3> es(e.m);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
  }
}

TEST_CASE("sensitivities match finite differences") {
  const Material m;
  const DensityGrid g = random_grid(6, 17);
  const SensitivityField sens = tensor_sensitivity(solve_unit_cell(g, m));
  REQUIRE(sens.size() == 36);
  const double h = 1e-5;
  for (int e : {0, 7, 20, 35}) {
    DensityGrid up = g, dn = g;
    up.values(e) += h;
    dn.values(e) -= h;
    const Mat3 fd = (homogenized_tensor(solve_unit_cell(up, m)).m -
                     homogenized_tensor(solve_unit_cell(dn, m)).m) / (2 * h);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        if (std::abs(fd(a, b)) > 1e-6) CHECK(oracle::rel_err(fd(a, b), sens[e](a, b)) < 1e-3);
      }
  }
  const Homogenization both = homogenize(g, m);
  CHECK((both.sensitivity[7] - sens[7]).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("sensitivity structure") {
  const SensitivityField uni = tensor_sensitivity(solve_unit_cell(DensityGrid::uniform(5, 5, 0.6), {}));
  for (const Mat3& s : uni) CHECK((s - uni[0]).cwiseAbs().maxCoeff() < 1e-12);

  DensityGrid g = random_grid(5, 3);
  g.values(4) = 0.0;
  const SensitivityField s = tensor_sensitivity(solve_unit_cell(g, {}));
  CHECK(s[4].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Hashin-Shtrikman bound") {
  const double k0 = plane_bulk_modulus(1.0, 0.3);
  CHECK(k0 == doctest::Approx(1.0 / 1.4));
  CHECK(hs_upper_bound(1.0, 1.0, 0.3) == doctest::Approx(k0));
  CHECK(hs_upper_bound(0.0, 1.0, 0.3) == 0.0);
  CHECK(hs_upper_bound(0.5, 1.0, 0.3) == doctest::Approx(0.18519).epsilon(1e-4));
  double prev = 0.0;
  for (int k = 1; k <= 20; ++k) {
    const double v = hs_upper_bound(k / 20.0, 1.0, 0.3);
    CHECK(v > prev);
    prev = v;
  }
  // bulk of the solid tensor equals the plane bulk modulus
  CHECK(ElasticityTensor(oracle::plane_stress(1.0, 0.3)).bulk_modulus() == doctest::Approx(k0));
}

TEST_CASE("invalid unit cells") {
  CHECK_THROWS_AS(solve_unit_cell(DensityGrid::uniform(1, 4, 0.5), {}), InvalidArgument);
  CHECK_THROWS_AS(solve_unit_cell(DensityGrid::uniform(4, 4, 1.5), {}), InvalidArgument);
  CHECK_THROWS_AS(solve_unit_cell(DensityGrid::uniform(4, 4, 0.0), {}), FeError);
}
