#include "mstopo/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "mstopo/errors.hpp"

namespace mstopo {

MacroGrid::MacroGrid(int n_cells_x, int n_cells_y, int micro_res)
    : nx_(n_cells_x), ny_(n_cells_y), res_(micro_res) {
  if (nx_ < 1 || ny_ < 1 || res_ < 1) {
    throw InvalidArgument("MacroGrid: cell counts and micro resolution must be >= 1");
  }
  cells_.resize(static_cast<size_t>(nx_ * ny_));
  for (int j = 0; j < ny_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      CellSpec& c = cell(i, j);
      c.index = {i, j};
      c.global_xy = cell_center(i, j);
    }
  }
}

Eigen::Vector2d MacroGrid::cell_center(int i, int j) const {
  const double longest = std::max(nx_, ny_);
  return {((i + 0.5) - 0.5 * nx_) / longest, ((j + 0.5) - 0.5 * ny_) / longest};
}

bool MacroGrid::any_rotation() const {
  return std::any_of(cells_.begin(), cells_.end(),
                     [](const CellSpec& c) { return c.rotation != 0.0; });
}

Eigen::Matrix2d frame_rotation(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, s, -s, c;
  return r;
}

int extension_margin(double extension, int micro_res) {
  // Small slack so 1.2 * 20 / 2 - 10 does not round up to 3.
  return static_cast<int>(std::ceil((extension - 1.0) * micro_res / 2.0 - 1e-9));
}

int fold_offset(double p) {
  const double mag = std::ceil(std::abs(p) - 0.5);
  return static_cast<int>(p < 0.0 ? -mag : mag);
}

namespace {

Eigen::Vector2d to_material(const CellSpec& owner, const Eigen::Vector2d& q) {
  if (owner.rotation == 0.0) {
    return q;
  }
  return frame_rotation(owner.rotation) * q;
}

void write_row(const CellSpec& owner, const Eigen::Vector2d& local,
               Eigen::Ref<Eigen::RowVector4d, 0, Eigen::InnerStride<>> out) {
  out << owner.global_xy.x(), owner.global_xy.y(), local.x(), local.y();
}

bool allowed_extension(double e) {
  for (double v : {1.0, 1.2, 1.6}) {
    if (std::abs(e - v) < 1e-9) {
      return true;
    }
  }
  return false;
}

}  // namespace

int fold_sample(const MacroGrid& grid, CellIndex center, Eigen::Vector2d physical,
                Eigen::Ref<Eigen::RowVector4d, 0, Eigen::InnerStride<>> out) {
  const int dx = fold_offset(physical.x());
  const int dy = fold_offset(physical.y());
  // Missing neighbors at the domain edge: the edge cell stands in for them.
  const int oi = std::clamp(center.i + dx, 0, grid.n_cells_x() - 1);
  const int oj = std::clamp(center.j + dy, 0, grid.n_cells_y() - 1);
  const CellSpec& owner = grid.cell(oi, oj);
  const Eigen::Vector2d q(physical.x() - dx, physical.y() - dy);
  write_row(owner, to_material(owner, q), out);
  return grid.linear_index(oi, oj);
}

CellPatch build_cell_patch(const CellSpec& spec, const MacroGrid& grid, double extension) {
  if (!allowed_extension(extension)) {
    throw InvalidArgument("build_cell_patch: extension must be one of 1.0, 1.2, 1.6");
  }
  if (spec.rotation != 0.0 && extension < 1.6 - 1e-9) {
    throw InvalidArgument("build_cell_patch: rotated cells need extension 1.6");
  }
  const int res = grid.micro_res();
  const int margin = extension_margin(extension, res);
  const int n = res + 2 * margin;

  CellPatch patch;
  patch.margin = margin;
  patch.batch.rows.resize(static_cast<Eigen::Index>(n) * n, 4);
  patch.batch.owner.resize(static_cast<size_t>(n) * n);
  patch.batch.rows_x = n;
  patch.batch.rows_y = n;
  patch.unit_samples.reserve(static_cast<size_t>(res) * res);

  for (int b = 0; b < n; ++b) {
    for (int a = 0; a < n; ++a) {
      const int row = b * n + a;
      const Eigen::Vector2d p((a - margin + 0.5) / res - 0.5, (b - margin + 0.5) / res - 0.5);
      patch.batch.owner[static_cast<size_t>(row)] =
          fold_sample(grid, spec.index, p, patch.batch.rows.row(row));
      if (a >= margin && a < margin + res && b >= margin && b < margin + res) {
        patch.unit_samples.push_back(row);
      }
    }
  }
  return patch;
}

BoundaryRegions build_boundary_regions(const CellSpec& spec, const MacroGrid& grid,
                                       int sample_res) {
  const int res = sample_res > 0 ? sample_res : grid.micro_res();
  const int margin = extension_margin(1.2, res);
  const int n = res + 2 * margin;
  const int count = n * n - res * res;
  const int center_linear = grid.linear_index(spec.index);

  BoundaryRegions out;
  for (CoordinateBatch* b : {&out.center, &out.neighbor}) {
    b->rows.resize(count, 4);
    b->owner.resize(static_cast<size_t>(count));
    b->rows_y = 1;
    b->rows_x = count;
  }

  int k = 0;
  for (int b = 0; b < n; ++b) {
    for (int a = 0; a < n; ++a) {
      if (a >= margin && a < margin + res && b >= margin && b < margin + res) {
        continue;
      }
      const Eigen::Vector2d p((a - margin + 0.5) / res - 0.5, (b - margin + 0.5) / res - 0.5);
      write_row(spec, to_material(spec, p), out.center.rows.row(k));
      out.center.owner[static_cast<size_t>(k)] = center_linear;
      out.neighbor.owner[static_cast<size_t>(k)] =
          fold_sample(grid, spec.index, p, out.neighbor.rows.row(k));
      ++k;
    }
  }
  return out;
}

CoordinateBatch upsample_grid(const MacroGrid& grid, int factor) {
  if (factor < 1) {
    throw InvalidArgument("upsample_grid: factor must be >= 1");
  }
  const int res = grid.micro_res() * factor;
  const int cols = grid.n_cells_x() * res;
  const int rows = grid.n_cells_y() * res;

  CoordinateBatch batch;
  batch.rows.resize(static_cast<Eigen::Index>(rows) * cols, 4);
  batch.owner.resize(static_cast<size_t>(rows) * cols);
  batch.rows_y = rows;
  batch.rows_x = cols;
  for (int r = 0; r < rows; ++r) {
    const int y_from_bottom = rows - 1 - r;
    const int j = y_from_bottom / res;
    const int b = y_from_bottom % res;
    for (int c = 0; c < cols; ++c) {
      const int i = c / res;
      const int a = c % res;
      const CellSpec& cell = grid.cell(i, j);
      const Eigen::Vector2d q((a + 0.5) / res - 0.5, (b + 0.5) / res - 0.5);
      const int row = r * cols + c;
      write_row(cell, to_material(cell, q), batch.rows.row(row));
      batch.owner[static_cast<size_t>(row)] = grid.linear_index(i, j);
    }
  }
  return batch;
}

}  // namespace mstopo
