#pragma once

// Coordinate batches fed to the density network.
//
// Physical coordinates inside a patch are measured in cell units relative to
// the center of the patch's cell. A sample is folded into the cell that
// contains it: the integer offset is the nearest integer of its physical
// coordinate (ties go to the center cell), the local coordinate is the
// remainder, and the owner cell's rotation maps it into the material frame.

#include <Eigen/Dense>

#include <vector>

#include "mstopo/tensor.hpp"

namespace mstopo {

struct CellIndex {
  int i = 0;  // column, x direction
  int j = 0;  // row, y direction (j = 0 at the bottom)
  bool operator==(const CellIndex&) const = default;
};

struct CellSpec {
  CellIndex index;
  Eigen::Vector2d global_xy = Eigen::Vector2d::Zero();
  double vf_target = 0.5;
  Mat3 tensor_weights = Mat3::Zero();
  double rotation = 0.0;  // radians
  bool solid = false;     // enforced-solid cell
};

class MacroGrid {
 public:
  MacroGrid(int n_cells_x, int n_cells_y, int micro_res);

  int n_cells_x() const { return nx_; }
  int n_cells_y() const { return ny_; }
  int micro_res() const { return res_; }
  int n_cells() const { return nx_ * ny_; }

  int linear_index(int i, int j) const { return j * nx_ + i; }
  int linear_index(CellIndex c) const { return linear_index(c.i, c.j); }

  const CellSpec& cell(int linear) const { return cells_.at(static_cast<size_t>(linear)); }
  CellSpec& cell(int linear) { return cells_.at(static_cast<size_t>(linear)); }
  const CellSpec& cell(int i, int j) const { return cell(linear_index(i, j)); }
  CellSpec& cell(int i, int j) { return cell(linear_index(i, j)); }
  const std::vector<CellSpec>& cells() const { return cells_; }

  /// Normalized global coordinate of a cell center: the longest axis spans
  /// [-0.5, 0.5], the shorter one is scaled by the same factor.
  Eigen::Vector2d cell_center(int i, int j) const;

  bool any_rotation() const;

 private:
  int nx_;
  int ny_;
  int res_;
  std::vector<CellSpec> cells_;
};

/// Network inputs (x, y, u, w), one row per sample.
struct CoordinateBatch {
  Eigen::MatrixXd rows;    // n x 4
  std::vector<int> owner;  // linear cell index per row
  int rows_y = 0;          // lattice shape; rows_y * rows_x == rows.rows()
  int rows_x = 0;

  Eigen::Index size() const { return rows.rows(); }
};

/// Extended FE patch around a cell. Lattice rows run bottom to top with x
/// varying fastest, which is also the element order used by homogenize.
struct CellPatch {
  CoordinateBatch batch;
  int margin = 0;                 // extension elements per side
  std::vector<int> unit_samples;  // rows inside the unextended cell
};

/// Samples per side added by an extension factor.
int extension_margin(double extension, int micro_res);

/// Nearest-integer offset with ties broken toward zero.
int fold_offset(double p);

/// Folds a physical patch coordinate (relative to `center`) into its owner cell
/// and writes (x, y, u, w). Returns the owner's linear index.
int fold_sample(const MacroGrid& grid, CellIndex center, Eigen::Vector2d physical,
                Eigen::Ref<Eigen::RowVector4d, 0, Eigen::InnerStride<>> out);

CellPatch build_cell_patch(const CellSpec& spec, const MacroGrid& grid, double extension);

struct BoundaryRegions {
  CoordinateBatch center;    // center cell extrapolated past its edge
  CoordinateBatch neighbor;  // same physical points folded into neighbors
};

/// Annulus 0.5 < max(|p_u|, |p_w|) <= 0.6 around the cell at spacing
/// 1 / sample_res (defaults to the grid's micro resolution).
BoundaryRegions build_boundary_regions(const CellSpec& spec, const MacroGrid& grid,
                                       int sample_res = 0);

/// Whole-domain render lattice at factor * micro_res samples per cell edge.
/// Rows run top to bottom (image order), x fastest.
CoordinateBatch upsample_grid(const MacroGrid& grid, int factor);

/// 2D rotation taking physical-frame local coordinates to the material frame.
Eigen::Matrix2d frame_rotation(double theta);

}  // namespace mstopo
