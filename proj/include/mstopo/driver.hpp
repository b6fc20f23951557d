#pragma once

// Training loops for the three optimization modes.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mstopo/field_net.hpp"
#include "mstopo/homogenize.hpp"
#include "mstopo/macro_fe.hpp"
#include "mstopo/objectives.hpp"
#include "mstopo/sampling.hpp"

namespace mstopo {

enum class BatchScheme { full, minibatch, miniepoch };

struct BatchSpec {
  BatchScheme scheme = BatchScheme::full;
  int groups = 1;
};

/// geometry: local coordinates are rotated (the drawn pattern rotates);
/// tensor: geometry stays axis-aligned and only the objective is rotated.
enum class RotationMode { geometry, tensor };

struct NetworkSpec {
  int kernels = 5000;
  double frequency_scale = 25.0;
  double weight_scale = 0.1;
};

struct RunConfig {
  Mode mode = Mode::inverse_homog_field;
  std::uint64_t seed = 0;
  int epochs = 300;
  double lr = 0.002;
  double threshold = 0.4;
  MacroGrid grid{1, 1, 30};
  Material material;
  NetworkSpec network;
  NetworkSpec macro_network{1000, 10.0, 0.1};
  BatchSpec batch;
  Schedules schedules;
  RotationMode rotation_mode = RotationMode::geometry;
  double extension = 0.0;  // 0 selects 1.2, or 1.6 when any cell is rotated
  MacroProblem macro;      // concurrent / metamaterial only
  int checkpoint_every = 25;
  int render_factor = 4;
  std::string source_text;  // config echo kept in checkpoints

  /// Patch extension actually used for FE.
  double patch_extension() const;
  /// Throws ConfigError when fields are out of range or inconsistent.
  void validate() const;
};

/// Grid used for sampling: rotations are dropped in tensor rotation mode.
MacroGrid sampling_grid_for(const RunConfig& config);

/// Cell groups for minibatch / miniepoch: a k = s*s split tiles the grid in
/// s x s blocks (neighboring cells land in different groups); otherwise
/// cells are dealt round-robin.
std::vector<std::vector<int>> cell_groups(const MacroGrid& grid, int k);

/// Cell lists for each optimizer step of an epoch (1-based).
std::vector<std::vector<int>> batch_plan(const BatchSpec& batch, int epoch, const MacroGrid& grid);

/// All cells visited during an epoch, in step order.
std::vector<int> select_cells(const BatchSpec& batch, int epoch, const MacroGrid& grid);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown loss;
  std::vector<double> cell_objective;  // latest value per cell
  double seconds = 0.0;                // wall clock since start
};

struct ConvergenceLog {
  std::vector<EpochRecord> epochs;
};

struct StepResult {
  LossBreakdown breakdown;
  std::vector<int> cells;
  std::vector<double> cell_objective;  // aligned with cells
  std::vector<double> cell_vf;         // aligned with cells
  NetworkGrads micro_grad;
  std::optional<NetworkGrads> macro_grad;
  double compliance = 0.0;    // concurrent
  double displacement = 0.0;  // metamaterial, unnormalized F
};

struct RunResult {
  NetworkParams micro;
  std::optional<NetworkParams> macro;
  ConvergenceLog log;
  double seconds = 0.0;
};

using CheckpointFn =
    std::function<void(int epoch, const NetworkParams& micro, const NetworkParams* macro)>;

/// Holds the precomputed sampling and normalization data of one run.
class Trainer {
 public:
  explicit Trainer(RunConfig config);

  const RunConfig& config() const { return config_; }
  const MacroGrid& sampling_grid() const { return sampling_grid_; }
  const CellPatch& patch(int cell) const { return patches_.at(static_cast<size_t>(cell)); }
  double normalizer(int cell) const { return c0_.at(static_cast<size_t>(cell)); }
  double compliance_normalizer() const { return compliance_c0_; }
  double displacement_normalizer() const { return f0_; }

  NetworkParams initial_micro() const;
  std::optional<NetworkParams> initial_macro() const;

  /// Loss at `epoch` over `cells` and, optionally, its gradients. Cells not
  /// listed reuse their last homogenized tensor in the macro solve.
  StepResult evaluate(const NetworkParams& micro, const NetworkParams* macro,
                      const std::vector<int>& cells, int epoch, bool want_gradient);

  RunResult run(const CheckpointFn& checkpoint = {});

  /// Macro densities per cell (concurrent); ones otherwise.
  Eigen::VectorXd macro_densities(const NetworkParams* macro) const;

 private:
  struct CellForward;
  CellForward forward_cell(const NetworkParams& micro, int cell, bool with_boundary,
                           bool keep_cache) const;
  void pin_solid(const CoordinateBatch& batch, Eigen::VectorXd& values, bool gradient) const;

  RunConfig config_;
  MacroGrid sampling_grid_;
  std::vector<CellPatch> patches_;
  std::vector<BoundaryRegions> boundaries_;
  std::vector<double> c0_;
  std::vector<Mat3> physical_weights_;
  Eigen::MatrixXd macro_inputs_;
  std::vector<ElasticityTensor> eh_cache_;
  std::vector<char> eh_valid_;
  double compliance_c0_ = 1.0;
  double f0_ = 1.0;
};

RunResult run_inverse_homog_field(const RunConfig& config, const CheckpointFn& checkpoint = {});
RunResult run_concurrent_multiscale(const RunConfig& config, const CheckpointFn& checkpoint = {});
RunResult run_metamaterial(const RunConfig& config, const CheckpointFn& checkpoint = {});
/// Dispatches on config.mode.
RunResult run(const RunConfig& config, const CheckpointFn& checkpoint = {});

struct CellEvaluation {
  CellIndex index;
  DensityGrid binary;
  double vf_target = 0.0;
  double vf = 0.0;
  ElasticityTensor tensor;
  double bulk = 0.0;
  double hs_bound = 0.0;
  double ratio = 0.0;  // NaN when the cell is all void
  bool all_void = false;
};

/// Thresholds each cell's unit-cell densities, homogenizes the binary field
/// and compares its bulk modulus with the HS bound at the measured vf.
std::vector<CellEvaluation> threshold_and_evaluate(const NetworkParams& params,
                                                   const MacroGrid& grid, double threshold,
                                                   const Material& material);

/// Densities over the whole domain at factor * micro_res per cell edge, rows
/// top to bottom. With a macro network the micro field is cut where the macro
/// density falls below `macro_threshold`.
Eigen::VectorXd render_densities(const NetworkParams& micro, const NetworkParams* macro,
                                 const MacroGrid& grid, int factor, double macro_threshold);

/// Mean boundary-band mismatch over all cells at factor * micro_res sampling.
double boundary_mismatch(const NetworkParams& params, const MacroGrid& grid, int factor);

}  // namespace mstopo
