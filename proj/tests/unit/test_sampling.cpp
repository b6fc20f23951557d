#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "mstopo/errors.hpp"
#include "mstopo/sampling.hpp"

using namespace mstopo;

TEST_CASE("unextended patch covers the cell at element centers") {
  MacroGrid grid(3, 3, 30);
  const CellPatch p = build_cell_patch(grid.cell(1, 1), grid, 1.0);
  REQUIRE(p.batch.size() == 900);
  CHECK(p.margin == 0);
  CHECK(p.unit_samples.size() == 900);
  for (int o : p.batch.owner) CHECK(o == grid.linear_index(1, 1));
  CHECK(p.batch.rows(0, 2) == doctest::Approx(-0.5 + 1.0 / 60));
  CHECK(p.batch.rows(0, 3) == doctest::Approx(-0.5 + 1.0 / 60));
  CHECK(p.batch.rows(899, 2) == doctest::Approx(0.5 - 1.0 / 60));
  CHECK(p.batch.rows(29, 2) == doctest::Approx(0.5 - 1.0 / 60));  // x varies fastest
  CHECK(p.batch.rows(29, 3) == doctest::Approx(-0.5 + 1.0 / 60));
}

TEST_CASE("1.2 extension folds into all eight neighbors") {
  MacroGrid grid(3, 3, 30);
  const CellPatch p = build_cell_patch(grid.cell(1, 1), grid, 1.2);
  CHECK(p.margin == 3);
  CHECK(p.batch.rows_x == 36);
  std::set<int> owners(p.batch.owner.begin(), p.batch.owner.end());
  CHECK(owners.size() == 9);
  const int right = grid.linear_index(2, 1);
  for (Eigen::Index r = 0; r < p.batch.size(); ++r) {
    if (p.batch.owner[static_cast<size_t>(r)] == right) {
      CHECK(p.batch.rows(r, 2) > -0.5);
      CHECK(p.batch.rows(r, 2) <= -0.4 + 1e-12);
      CHECK(p.batch.rows(r, 0) == doctest::Approx(grid.cell(2, 1).global_xy.x()));
    }
  }
}

TEST_CASE("extension margins") {
  CHECK(extension_margin(1.0, 30) == 0);
  CHECK(extension_margin(1.2, 30) == 3);
  CHECK(extension_margin(1.2, 20) == 2);
  CHECK(extension_margin(1.6, 30) == 9);
  CHECK(extension_margin(1.2, 12) == 2);  // 1.2 rounds up to whole elements
}

TEST_CASE("fold offset rounds to nearest with ties toward zero") {
  CHECK(fold_offset(0.5) == 0);
  CHECK(fold_offset(-0.5) == 0);
  CHECK(fold_offset(0.5000001) == 1);
  CHECK(fold_offset(-0.51) == -1);
  CHECK(fold_offset(1.49) == 1);
}

TEST_CASE("folding an in-range sample is the identity") {
  MacroGrid grid(2, 2, 10);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int k = 0; k < 200; ++k) {
    Eigen::Matrix<double, 1, 4> row;
    const Eigen::Vector2d p(u(rng), u(rng));
    const int owner = fold_sample(grid, {1, 0}, p, row);
    CHECK(owner == grid.linear_index(1, 0));
    CHECK(row(2) == p.x());
    CHECK(row(3) == p.y());
  }
}

TEST_CASE("rotated 1.6 patch matches a brute-force point-in-cell classifier") {
  MacroGrid grid(3, 3, 10);
  for (int c = 0; c < grid.n_cells(); ++c) grid.cell(c).rotation = std::numbers::pi / 4;
  const CellSpec& center = grid.cell(1, 1);
  const CellPatch p = build_cell_patch(center, grid, 1.6);
  CHECK(p.batch.rows_x == 16);
  const int n = p.batch.rows_x;
  const double res = grid.micro_res();
  for (int b = 0; b < n; ++b) {
    for (int a = 0; a < n; ++a) {
      const int row = b * n + a;
      // absolute position in the domain, cell (i, j) spans [i, i + 1) x [j, j + 1)
      const double ax = 1.5 + (a - p.margin + 0.5) / res - 0.5;
      const double ay = 1.5 + (b - p.margin + 0.5) / res - 0.5;
      int oi = -1, oj = -1;
      for (int i = 0; i < 3; ++i)
        if (ax >= i && ax < i + 1) oi = i;
      for (int j = 0; j < 3; ++j)
        if (ay >= j && ay < j + 1) oj = j;
      REQUIRE(oi >= 0);
      REQUIRE(oj >= 0);
      CHECK(p.batch.owner[static_cast<size_t>(row)] == grid.linear_index(oi, oj));
      const double qx = ax - (oi + 0.5);
      const double qy = ay - (oj + 0.5);
      const double s = std::sqrt(0.5);
      // material frame: rotate the physical offset by -45 degrees
      CHECK(p.batch.rows(row, 2) == doctest::Approx(s * qx + s * qy));
      CHECK(p.batch.rows(row, 3) == doctest::Approx(-s * qx + s * qy));
    }
  }
}

TEST_CASE("rotated cells need the 1.6 extension") {
  MacroGrid grid(2, 2, 10);
  grid.cell(0).rotation = 0.3;
  CHECK_THROWS_AS(build_cell_patch(grid.cell(0), grid, 1.2), InvalidArgument);
  CHECK_THROWS_AS(build_cell_patch(grid.cell(1), grid, 1.4), InvalidArgument);
}

TEST_CASE("boundary annulus sizes and corner folding") {
  MacroGrid grid(3, 3, 30);
  const BoundaryRegions b = build_boundary_regions(grid.cell(1, 1), grid);
  CHECK(b.center.size() == 396);
  CHECK(b.neighbor.size() == 396);
  bool found = false;
  for (Eigen::Index k = 0; k < b.center.size(); ++k) {
    if (std::abs(b.center.rows(k, 2) - 0.55) < 1e-9 && std::abs(b.center.rows(k, 3) - 0.55) < 1e-9) {
      found = true;
      CHECK(b.neighbor.owner[static_cast<size_t>(k)] == grid.linear_index(2, 2));
      CHECK(b.neighbor.rows(k, 2) == doctest::Approx(-0.45));
      CHECK(b.neighbor.rows(k, 3) == doctest::Approx(-0.45));
    }
    CHECK(b.center.owner[static_cast<size_t>(k)] == grid.linear_index(1, 1));
    const double m = std::max(std::abs(b.center.rows(k, 2)), std::abs(b.center.rows(k, 3)));
    CHECK(m > 0.5);
    CHECK(m < 0.6);
  }
  CHECK(found);
}

TEST_CASE("upsampled lattice") {
  MacroGrid grid(8, 8, 30);
  CHECK(upsample_grid(grid, 4).size() == 960 * 960);

  MacroGrid small(2, 1, 4);
  const CoordinateBatch up = upsample_grid(small, 1);
  CHECK(up.rows_x == 8);
  CHECK(up.rows_y == 4);
  // Top row first: the first row holds the top samples of cell (0, 0).
  CHECK(up.rows(0, 3) == doctest::Approx(0.5 - 1.0 / 8));
  CHECK(up.rows(3 * 8, 3) == doctest::Approx(-0.5 + 1.0 / 8));
  CHECK(up.owner[5] == 1);
  // factor 1 is the optimization lattice
  const CellPatch p = build_cell_patch(small.cell(1), small, 1.0);
  for (int b = 0; b < 4; ++b)
    for (int a = 0; a < 4; ++a)
      CHECK((up.rows.row((3 - b) * 8 + 4 + a) - p.batch.rows.row(b * 4 + a)).norm() == 0.0);
  CHECK_THROWS_AS(upsample_grid(small, 0), InvalidArgument);
}

TEST_CASE("global coordinates span the longest axis") {
  MacroGrid grid(4, 2, 5);
  CHECK(grid.cell(0, 0).global_xy.x() == doctest::Approx(-0.375));
  CHECK(grid.cell(3, 1).global_xy.x() == doctest::Approx(0.375));
  CHECK(grid.cell(0, 0).global_xy.y() == doctest::Approx(-0.125));
  CHECK(grid.cell(0, 1).global_xy.y() == doctest::Approx(0.125));
}
