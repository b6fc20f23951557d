#pragma once

// Configuration parsing, checkpoints and result export.

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mstopo/driver.hpp"

namespace mstopo {

/// Parses a YAML run configuration. Unknown keys are rejected; parse errors
/// carry the line number, validation errors name the field.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");

/// Writes an 8-bit binary PGM: density 1 is black, 0 is white, pixel =
/// 255 - floor(255 rho + 0.5). Densities are row-major, top row first.
void export_density_image(const Eigen::VectorXd& densities, int width, int height,
                          const std::filesystem::path& path);

struct ConvergenceRow {
  int epoch = 0;
  double objective = 0.0;
  double volume = 0.0;
  double boundary = 0.0;
  double displacement = 0.0;
  double total = 0.0;
  double seconds = 0.0;
};

struct CellRow {
  int i = 0;
  int j = 0;
  double vf_target = 0.0;
  double vf_measured = 0.0;
  double e11 = 0.0, e12 = 0.0, e13 = 0.0, e22 = 0.0, e23 = 0.0, e33 = 0.0;
  double bulk = 0.0;
  double hs_bound = 0.0;
  double ratio = 0.0;
};

std::vector<ConvergenceRow> convergence_rows(const ConvergenceLog& log);
std::vector<CellRow> cell_rows(const std::vector<CellEvaluation>& cells);

void write_convergence_csv(const std::vector<ConvergenceRow>& rows,
                           const std::filesystem::path& path);
std::vector<ConvergenceRow> read_convergence_csv(const std::filesystem::path& path);

void write_cell_csv(const std::vector<CellRow>& rows, const std::filesystem::path& path);
std::vector<CellRow> read_cell_csv(const std::filesystem::path& path);

/// Convergence and per-cell CSVs at <prefix>convergence.csv / <prefix>cells.csv.
void export_reports(const ConvergenceLog& log, const std::vector<CellEvaluation>& cells,
                    const std::string& path_prefix);

struct Checkpoint {
  RunConfig config;
  int epoch = 0;
  NetworkParams micro;
  std::optional<NetworkParams> macro;
};

/// Text checkpoint: the configuration source, the seed and the parameters as
/// hexadecimal floats, so a reload reproduces every bit.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct RunMetadata {
  std::string mode;
  std::uint64_t seed = 0;
  long parameter_count = 0;
  double wall_seconds = 0.0;
  int epochs = 0;
  std::string config_text;
};

void write_metadata(const RunMetadata& meta, const std::filesystem::path& path);

}  // namespace mstopo
