#include "mstopo/driver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "mstopo/errors.hpp"
#include "parallel.hpp"

namespace mstopo {

namespace {

bool near(double a, double b) { return std::abs(a - b) < 1e-9; }

void require(bool ok, const std::string& what) {
  if (!ok) {
    throw ConfigError(what);
  }
}

}  // namespace

double RunConfig::patch_extension() const {
  if (extension > 0.0) {
    return extension;
  }
  if (rotation_mode == RotationMode::geometry && grid.any_rotation()) {
    return 1.6;
  }
  return 1.2;
}

void RunConfig::validate() const {
  require(epochs >= 1, "epochs must be >= 1");
  require(lr > 0.0 && std::isfinite(lr), "lr must be positive");
  require(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0, 1)");
  require(network.kernels >= 1, "network.kernels must be >= 1");
  require(macro_network.kernels >= 1, "macro_network.kernels must be >= 1");
  require(material.nu >= 0.0 && material.nu < 0.5, "material.nu must lie in [0, 0.5)");
  require(material.simp_p >= 1.0, "material.simp_p must be >= 1");
  require(material.e_min > 0.0 && material.e_min < 1.0, "material.e_min must lie in (0, 1)");
  require(material.e0 > 0.0, "material.e0 must be positive");
  require(schedules.total_epochs == epochs, "schedules.total_epochs must equal epochs");
  require(extension == 0.0 || near(extension, 1.0) || near(extension, 1.2) ||
              near(extension, 1.6),
          "extension must be 1.0, 1.2 or 1.6");
  if (rotation_mode == RotationMode::geometry && grid.any_rotation()) {
    require(near(patch_extension(), 1.6), "rotated cells need extension 1.6");
  }
  require(grid.micro_res() >= 2, "grid.micro_res must be >= 2");
  if (batch.scheme != BatchScheme::full) {
    require(batch.groups >= 1 && batch.groups <= grid.n_cells(),
            "batch.groups must lie in [1, number of cells]");
  }
  for (const CellSpec& c : grid.cells()) {
    require(c.vf_target > 0.0 && c.vf_target < 1.0, "cells.vf_target must lie in (0, 1)");
    require((c.tensor_weights - c.tensor_weights.transpose()).cwiseAbs().maxCoeff() < 1e-12,
            "cells.weights must be symmetric");
  }
  if (mode == Mode::concurrent || mode == Mode::metamaterial) {
    require(macro.nx == grid.n_cells_x() && macro.ny == grid.n_cells_y(),
            "macro mesh must match the cell grid");
    try {
      macro.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("macro: ") + e.what());
    }
  }
  if (mode == Mode::concurrent) {
    require(macro.loads.cwiseAbs().maxCoeff() > 0.0, "concurrent mode needs nonzero loads");
    require(macro.vf_macro > 0.0 && macro.vf_macro <= 1.0, "macro.vf_macro must lie in (0, 1]");
    require(macro.vf_micro > 0.0 && macro.vf_micro < 1.0, "macro.vf_micro must lie in (0, 1)");
  }
  if (mode == Mode::metamaterial) {
    require(macro.gamma.size() == macro.n_dofs() && macro.gamma.sum() > 0.0,
            "metamaterial mode needs displacement targets");
  }
}

MacroGrid sampling_grid_for(const RunConfig& config) {
  MacroGrid g = config.grid;
  if (config.rotation_mode == RotationMode::tensor) {
    for (int c = 0; c < g.n_cells(); ++c) {
      g.cell(c).rotation = 0.0;
    }
  }
  return g;
}

std::vector<std::vector<int>> cell_groups(const MacroGrid& grid, int k) {
  const int n = grid.n_cells();
  if (k < 1 || k > n) {
    throw InvalidArgument("cell_groups: group count must lie in [1, number of cells]");
  }
  std::vector<std::vector<int>> groups(static_cast<size_t>(k));
  const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
  const bool tiled = s * s == k && s <= grid.n_cells_x() && s <= grid.n_cells_y();
  for (int c = 0; c < n; ++c) {
    const int i = c % grid.n_cells_x();
    const int j = c / grid.n_cells_x();
    const int g = tiled ? (i % s) + s * (j % s) : c % k;
    groups[static_cast<size_t>(g)].push_back(c);
  }
  return groups;
}

std::vector<std::vector<int>> batch_plan(const BatchSpec& batch, int epoch, const MacroGrid& grid) {
  switch (batch.scheme) {
    case BatchScheme::full: {
      std::vector<int> all(static_cast<size_t>(grid.n_cells()));
      for (int c = 0; c < grid.n_cells(); ++c) {
        all[static_cast<size_t>(c)] = c;
      }
      return {all};
    }
    case BatchScheme::minibatch:
      return cell_groups(grid, batch.groups);
    case BatchScheme::miniepoch: {
      auto groups = cell_groups(grid, batch.groups);
      const int g = ((epoch - 1) % batch.groups + batch.groups) % batch.groups;
      return {groups[static_cast<size_t>(g)]};
    }
  }
  return {};
}

std::vector<int> select_cells(const BatchSpec& batch, int epoch, const MacroGrid& grid) {
  std::vector<int> out;
  for (const auto& step : batch_plan(batch, epoch, grid)) {
    out.insert(out.end(), step.begin(), step.end());
  }
  return out;
}

struct Trainer::CellForward {
  Eigen::VectorXd patch_density;
  std::optional<ForwardCache> patch_cache;
  Eigen::VectorXd center_density;
  Eigen::VectorXd neighbor_density;
  std::optional<ForwardCache> center_cache;
  std::optional<ForwardCache> neighbor_cache;
  Homogenization homog;
  double vf = 0.0;
};

Trainer::Trainer(RunConfig config)
    : config_(std::move(config)), sampling_grid_(sampling_grid_for(config_)) {
  config_.validate();
  const int n = config_.grid.n_cells();
  const double ext = config_.patch_extension();
  patches_.reserve(static_cast<size_t>(n));
  boundaries_.reserve(static_cast<size_t>(n));
  c0_.assign(static_cast<size_t>(n), 1.0);
  physical_weights_.resize(static_cast<size_t>(n));
  macro_inputs_.resize(n, 2);
  for (int c = 0; c < n; ++c) {
    const CellSpec& spec = sampling_grid_.cell(c);
    patches_.push_back(build_cell_patch(spec, sampling_grid_, ext));
    boundaries_.push_back(build_boundary_regions(spec, sampling_grid_));
    macro_inputs_.row(c) = spec.global_xy.transpose();
    const CellSpec& target = config_.grid.cell(c);
    physical_weights_[static_cast<size_t>(c)] =
        weights_to_physical(target.tensor_weights, target.rotation);
    if (config_.mode != Mode::concurrent) {
      try {
        c0_[static_cast<size_t>(c)] =
            normalization_constant(target.vf_target, target.tensor_weights, config_.material);
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("cell weights: ") + e.what());
      }
    }
  }
  eh_cache_.resize(static_cast<size_t>(n));
  eh_valid_.assign(static_cast<size_t>(n), 0);

  if (config_.mode == Mode::concurrent) {
    const Material& m = config_.material;
    const ElasticityTensor uniform(m.simp(config_.macro.vf_macro) *
                                   m.simp(config_.macro.vf_micro) * m.base_tensor().m);
    const MacroSolve s =
        solve_macro(config_.macro, std::vector<ElasticityTensor>(static_cast<size_t>(n), uniform));
    require(s.compliance > 0.0, "concurrent mode: loads produce zero compliance");
    compliance_c0_ = s.compliance;
  }
  if (config_.mode == Mode::metamaterial) {
    const double f = config_.macro.u_target.squaredNorm();
    f0_ = f > 0.0 ? f : 1.0;
  }
}

NetworkParams Trainer::initial_micro() const {
  return init_params(config_.network.kernels, 4, config_.seed,
                     {config_.network.frequency_scale, config_.network.weight_scale});
}

std::optional<NetworkParams> Trainer::initial_macro() const {
  if (config_.mode != Mode::concurrent) {
    return std::nullopt;
  }
  return init_params(config_.macro_network.kernels, 2, config_.seed + 1,
                     {config_.macro_network.frequency_scale, config_.macro_network.weight_scale});
}

Eigen::VectorXd Trainer::macro_densities(const NetworkParams* macro) const {
  if (config_.mode == Mode::concurrent && macro != nullptr) {
    return forward(*macro, macro_inputs_);
  }
  return Eigen::VectorXd::Ones(config_.grid.n_cells());
}

void Trainer::pin_solid(const CoordinateBatch& batch, Eigen::VectorXd& values,
                        bool gradient) const {
  for (Eigen::Index r = 0; r < values.size(); ++r) {
    if (sampling_grid_.cell(batch.owner[static_cast<size_t>(r)]).solid) {
      values(r) = gradient ? 0.0 : 1.0;
    }
  }
}

Trainer::CellForward Trainer::forward_cell(const NetworkParams& micro, int cell,
                                           bool with_boundary, bool keep_cache) const {
  CellForward f;
  const CellPatch& patch = patches_[static_cast<size_t>(cell)];
  if (keep_cache) {
    f.patch_cache = forward_cached(micro, patch.batch.rows);
    f.patch_density = f.patch_cache->density;
  } else {
    f.patch_density = forward(micro, patch.batch.rows);
  }
  pin_solid(patch.batch, f.patch_density, false);

  const int n = patch.batch.rows_x;
  f.homog = homogenize(DensityGrid(n, n, f.patch_density), config_.material);
  double sum = 0.0;
  for (int row : patch.unit_samples) {
    sum += f.patch_density(row);
  }
  f.vf = sum / static_cast<double>(patch.unit_samples.size());

  if (with_boundary) {
    const BoundaryRegions& b = boundaries_[static_cast<size_t>(cell)];
    if (keep_cache) {
      f.center_cache = forward_cached(micro, b.center.rows);
      f.neighbor_cache = forward_cached(micro, b.neighbor.rows);
      f.center_density = f.center_cache->density;
      f.neighbor_density = f.neighbor_cache->density;
    } else {
      f.center_density = forward(micro, b.center.rows);
      f.neighbor_density = forward(micro, b.neighbor.rows);
    }
    pin_solid(b.center, f.center_density, false);
    pin_solid(b.neighbor, f.neighbor_density, false);
  }
  return f;
}

namespace {

Eigen::VectorXd chain(const Mat3& d_tensor, const SensitivityField& field) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(field.size()));
  for (size_t e = 0; e < field.size(); ++e) {
    out(static_cast<Eigen::Index>(e)) = (d_tensor.array() * field[e].array()).sum();
  }
  return out;
}

std::string cell_context(const MacroGrid& grid, int cell, int epoch) {
  const CellSpec& s = grid.cell(cell);
  std::ostringstream msg;
  msg << "epoch " << epoch << ", cell (" << s.index.i << ", " << s.index.j << "): ";
  return msg.str();
}

}  // namespace

StepResult Trainer::evaluate(const NetworkParams& micro, const NetworkParams* macro,
                             const std::vector<int>& cells, int epoch, bool want_gradient) {
  const Mode mode = config_.mode;
  const Schedules& sched = config_.schedules;
  const double alpha = sched.alpha(epoch);
  const double beta = sched.beta(epoch);
  const bool with_boundary = beta > 0.0;
  const int n_sel = static_cast<int>(cells.size());
  const double inv_n = n_sel > 0 ? 1.0 / n_sel : 0.0;

  StepResult result;
  result.cells = cells;
  result.cell_objective.assign(cells.size(), 0.0);
  result.cell_vf.assign(cells.size(), 0.0);
  if (want_gradient) {
    result.micro_grad = zero_like(micro);
  }

  LossInputs inputs;
  inputs.mode = mode;
  inputs.cells.resize(cells.size());
  std::vector<NetworkGrads> cell_grads(want_gradient ? cells.size() : 0);

  auto build_terms = [&](int k, const CellForward& f) {
    const int c = cells[static_cast<size_t>(k)];
    const CellPatch& patch = patches_[static_cast<size_t>(c)];
    CellTerms& t = inputs.cells[static_cast<size_t>(k)];
    t.patch_size = patch.batch.size();
    t.vf = f.vf;
    t.vf_target = config_.grid.cell(c).vf_target;
    t.unit_samples = patch.unit_samples;
    if (with_boundary) {
      t.boundary = boundary_loss(f.center_density, f.neighbor_density);
    }
    if (mode != Mode::concurrent) {
      const Mat3& w = physical_weights_[static_cast<size_t>(c)];
      const double scale = 1.0 / std::abs(c0_[static_cast<size_t>(c)]);
      t.objective = weighted_tensor_objective(f.homog.tensor, w).value * scale;
      if (want_gradient) {
        t.d_objective = chain(-w * scale, f.homog.sensitivity);
      }
    }
    result.cell_objective[static_cast<size_t>(k)] = t.objective;
    result.cell_vf[static_cast<size_t>(k)] = f.vf;
  };

  auto backprop = [&](int k, const CellGradient& g, const CellForward* f) {
    const int c = cells[static_cast<size_t>(k)];
    const CellPatch& patch = patches_[static_cast<size_t>(c)];
    const BoundaryRegions& b = boundaries_[static_cast<size_t>(c)];
    Eigen::VectorXd gp = g.patch;
    pin_solid(patch.batch, gp, true);
    NetworkGrads grad = f && f->patch_cache ? backward(micro, *f->patch_cache, patch.batch.rows, gp)
                                            : backward(micro, patch.batch.rows, gp);
    if (with_boundary && g.center_boundary.size() > 0) {
      Eigen::VectorXd gc = g.center_boundary;
      Eigen::VectorXd gn = g.neighbor_boundary;
      pin_solid(b.center, gc, true);
      pin_solid(b.neighbor, gn, true);
      accumulate(grad, f && f->center_cache ? backward(micro, *f->center_cache, b.center.rows, gc)
                                            : backward(micro, b.center.rows, gc));
      accumulate(grad, f && f->neighbor_cache
                           ? backward(micro, *f->neighbor_cache, b.neighbor.rows, gn)
                           : backward(micro, b.neighbor.rows, gn));
    }
    cell_grads[static_cast<size_t>(k)] = std::move(grad);
  };

  if (mode == Mode::inverse_homog_field) {
    // Each cell's gradient depends only on its own terms: forward, solve and
    // backpropagate one cell at a time.
    detail::parallel_for(n_sel, [&](int k) {
      const int c = cells[static_cast<size_t>(k)];
      try {
        const CellForward f = forward_cell(micro, c, with_boundary, want_gradient);
        build_terms(k, f);
        if (want_gradient) {
          backprop(k, cell_gradient(inputs.cells[static_cast<size_t>(k)], mode, inv_n, alpha, beta),
                   &f);
        }
      } catch (const FeError& e) {
        throw FeError(cell_context(config_.grid, c, epoch) + e.what());
      }
    });
  } else {
    const int n_cells = config_.grid.n_cells();
    std::vector<SensitivityField> sens(static_cast<size_t>(n_cells));
    detail::parallel_for(n_sel, [&](int k) {
      const int c = cells[static_cast<size_t>(k)];
      try {
        CellForward f = forward_cell(micro, c, with_boundary, false);
        build_terms(k, f);
        eh_cache_[static_cast<size_t>(c)] = f.homog.tensor;
        eh_valid_[static_cast<size_t>(c)] = 1;
        if (want_gradient) {
          sens[static_cast<size_t>(c)] = std::move(f.homog.sensitivity);
        }
      } catch (const FeError& e) {
        throw FeError(cell_context(config_.grid, c, epoch) + e.what());
      }
    });
    std::vector<int> stale;
    for (int c = 0; c < n_cells; ++c) {
      if (!eh_valid_[static_cast<size_t>(c)]) {
        stale.push_back(c);
      }
    }
    detail::parallel_for(static_cast<int>(stale.size()), [&](int k) {
      const int c = stale[static_cast<size_t>(k)];
      const CellForward f = forward_cell(micro, c, false, false);
      eh_cache_[static_cast<size_t>(c)] = f.homog.tensor;
      eh_valid_[static_cast<size_t>(c)] = 1;
    });

    const Eigen::VectorXd rho_macro = macro_densities(macro);
    const std::vector<ElasticityTensor> tensors =
        mode == Mode::concurrent ? simp_interpolate_macro(rho_macro, eh_cache_, config_.material)
                                 : eh_cache_;
    MacroSolve solve;
    try {
      solve = solve_macro(config_.macro, tensors);
    } catch (const FeError& e) {
      throw FeError("epoch " + std::to_string(epoch) + ", macro solve: " + e.what());
    }

    if (mode == Mode::concurrent) {
      result.compliance = solve.compliance;
      inputs.global_objective = solve.compliance / compliance_c0_;
      inputs.rho_macro = rho_macro;
      inputs.vf_macro_target = config_.macro.vf_macro;
      if (want_gradient) {
        const ComplianceSensitivities cs = compliance_sensitivities(
            config_.macro, solve, rho_macro, eh_cache_, sens, config_.material);
        inputs.d_global_objective_macro = cs.d_rho_macro / compliance_c0_;
        for (int k = 0; k < n_sel; ++k) {
          const int c = cells[static_cast<size_t>(k)];
          inputs.cells[static_cast<size_t>(k)].d_objective =
              cs.d_rho_micro[static_cast<size_t>(c)] / compliance_c0_;
        }
      }
    } else {
      const double f = displacement_objective(solve, config_.macro.gamma, config_.macro.u_target);
      result.displacement = f;
      inputs.displacement = f / f0_;
      if (want_gradient) {
        const DisplacementSensitivities ds =
            displacement_sensitivities(config_.macro, solve, config_.macro.gamma,
                                       config_.macro.u_target, sens, Eigen::VectorXd::Ones(n_cells));
        for (int k = 0; k < n_sel; ++k) {
          const int c = cells[static_cast<size_t>(k)];
          inputs.cells[static_cast<size_t>(k)].d_displacement =
              ds.d_rho_micro[static_cast<size_t>(c)] / f0_;
        }
      }
    }
  }

  const LossEvaluation loss = combined_loss(inputs, sched, epoch);
  result.breakdown = loss.breakdown;
  if (!want_gradient) {
    return result;
  }

  if (mode != Mode::inverse_homog_field) {
    detail::parallel_for(n_sel, [&](int k) { backprop(k, loss.cells[static_cast<size_t>(k)], nullptr); });
    if (mode == Mode::concurrent && macro != nullptr) {
      result.macro_grad = backward(*macro, macro_inputs_, loss.d_rho_macro);
    }
  }
  // Fixed-order reduction keeps runs reproducible.
  for (const NetworkGrads& g : cell_grads) {
    accumulate(result.micro_grad, g);
  }
  return result;
}

RunResult Trainer::run(const CheckpointFn& checkpoint) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  RunResult out;
  out.micro = initial_micro();
  out.macro = initial_macro();
  AdamState micro_state = AdamState::for_params(out.micro, config_.lr);
  std::optional<AdamState> macro_state;
  if (out.macro) {
    macro_state = AdamState::for_params(*out.macro, config_.lr);
  }
  const int n_cells = config_.grid.n_cells();
  std::vector<double> latest(static_cast<size_t>(n_cells), std::numeric_limits<double>::quiet_NaN());

  for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
    LossBreakdown acc;
    int counted = 0;
    for (const std::vector<int>& step : batch_plan(config_.batch, epoch, config_.grid)) {
      StepResult r = evaluate(out.micro, out.macro ? &*out.macro : nullptr, step, epoch, true);
      adam_step(micro_state, out.micro, r.micro_grad);
      if (out.macro && r.macro_grad) {
        adam_step(*macro_state, *out.macro, *r.macro_grad);
      }
      const auto w = static_cast<double>(step.size());
      acc.objective += w * r.breakdown.objective;
      acc.volume += w * r.breakdown.volume;
      acc.boundary += w * r.breakdown.boundary;
      acc.displacement += w * r.breakdown.displacement;
      acc.total += w * r.breakdown.total;
      acc.alpha = r.breakdown.alpha;
      acc.beta = r.breakdown.beta;
      counted += static_cast<int>(step.size());
      for (size_t k = 0; k < step.size(); ++k) {
        latest[static_cast<size_t>(step[k])] = r.cell_objective[k];
      }
    }
    const double inv = 1.0 / static_cast<double>(counted);
    acc.objective *= inv;
    acc.volume *= inv;
    acc.boundary *= inv;
    acc.displacement *= inv;
    acc.total *= inv;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = acc;
    rec.cell_objective = latest;
    rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    out.log.epochs.push_back(std::move(rec));

    if (checkpoint && (epoch % std::max(1, config_.checkpoint_every) == 0 || epoch == config_.epochs)) {
      checkpoint(epoch, out.micro, out.macro ? &*out.macro : nullptr);
    }
  }
  out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

RunResult run_inverse_homog_field(const RunConfig& config, const CheckpointFn& checkpoint) {
  if (config.mode != Mode::inverse_homog_field) {
    throw ConfigError("run_inverse_homog_field: config mode is not inverse_homog_field");
  }
  return Trainer(config).run(checkpoint);
}

RunResult run_concurrent_multiscale(const RunConfig& config, const CheckpointFn& checkpoint) {
  if (config.mode != Mode::concurrent) {
    throw ConfigError("run_concurrent_multiscale: config mode is not concurrent");
  }
  return Trainer(config).run(checkpoint);
}

RunResult run_metamaterial(const RunConfig& config, const CheckpointFn& checkpoint) {
  if (config.mode != Mode::metamaterial) {
    throw ConfigError("run_metamaterial: config mode is not metamaterial");
  }
  return Trainer(config).run(checkpoint);
}

RunResult run(const RunConfig& config, const CheckpointFn& checkpoint) {
  return Trainer(config).run(checkpoint);
}

namespace {

CoordinateBatch unit_cell_samples(const CellSpec& spec, const MacroGrid& grid) {
  const CellPatch patch = build_cell_patch(spec, grid, spec.rotation != 0.0 ? 1.6 : 1.0);
  CoordinateBatch out;
  const auto n = static_cast<Eigen::Index>(patch.unit_samples.size());
  out.rows.resize(n, 4);
  out.owner.resize(static_cast<size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const int row = patch.unit_samples[static_cast<size_t>(k)];
    out.rows.row(k) = patch.batch.rows.row(row);
    out.owner[static_cast<size_t>(k)] = patch.batch.owner[static_cast<size_t>(row)];
  }
  out.rows_x = grid.micro_res();
  out.rows_y = grid.micro_res();
  return out;
}

}  // namespace

std::vector<CellEvaluation> threshold_and_evaluate(const NetworkParams& params,
                                                   const MacroGrid& grid, double threshold,
                                                   const Material& material) {
  const int n = grid.n_cells();
  std::vector<CellEvaluation> out(static_cast<size_t>(n));
  detail::parallel_for(n, [&](int c) {
    const CellSpec& spec = grid.cell(c);
    CellEvaluation& ev = out[static_cast<size_t>(c)];
    ev.index = spec.index;
    ev.vf_target = spec.vf_target;
    const int res = grid.micro_res();
    Eigen::VectorXd rho = spec.solid ? Eigen::VectorXd::Ones(res * res)
                                     : forward(params, unit_cell_samples(spec, grid).rows);
    Eigen::VectorXd binary = (rho.array() >= threshold).cast<double>();
    ev.binary = DensityGrid(res, res, binary);
    ev.vf = binary.mean();
    ev.hs_bound = hs_upper_bound(ev.vf, material.e0, material.nu);
    if (ev.vf == 0.0) {
      ev.all_void = true;
      ev.ratio = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    ev.tensor = homogenized_tensor(solve_unit_cell(ev.binary, material));
    ev.bulk = ev.tensor.bulk_modulus();
    ev.ratio = ev.bulk / ev.hs_bound;
  });
  return out;
}

Eigen::VectorXd render_densities(const NetworkParams& micro, const NetworkParams* macro,
                                 const MacroGrid& grid, int factor, double macro_threshold) {
  const CoordinateBatch batch = upsample_grid(grid, factor);
  Eigen::VectorXd rho = forward(micro, batch.rows);
  for (Eigen::Index r = 0; r < rho.size(); ++r) {
    if (grid.cell(batch.owner[static_cast<size_t>(r)]).solid) {
      rho(r) = 1.0;
    }
  }
  if (macro != nullptr) {
    const int res = grid.micro_res() * factor;
    const double longest = std::max(grid.n_cells_x(), grid.n_cells_y());
    Eigen::MatrixXd xy(batch.size(), 2);
    for (int r = 0; r < batch.rows_y; ++r) {
      for (int c = 0; c < batch.rows_x; ++c) {
        const int row = r * batch.rows_x + c;
        xy(row, 0) = ((c + 0.5) / res - 0.5 * grid.n_cells_x()) / longest;
        xy(row, 1) = ((batch.rows_y - 1 - r + 0.5) / res - 0.5 * grid.n_cells_y()) / longest;
      }
    }
    const Eigen::VectorXd rho_macro = forward(*macro, xy);
    for (Eigen::Index r = 0; r < rho.size(); ++r) {
      if (rho_macro(r) < macro_threshold) {
        rho(r) = 0.0;
      }
    }
  }
  return rho;
}

double boundary_mismatch(const NetworkParams& params, const MacroGrid& grid, int factor) {
  const int n = grid.n_cells();
  std::vector<double> values(static_cast<size_t>(n));
  detail::parallel_for(n, [&](int c) {
    const BoundaryRegions b = build_boundary_regions(grid.cell(c), grid, grid.micro_res() * factor);
    Eigen::VectorXd center = forward(params, b.center.rows);
    Eigen::VectorXd neighbor = forward(params, b.neighbor.rows);
    for (Eigen::Index r = 0; r < center.size(); ++r) {
      if (grid.cell(b.center.owner[static_cast<size_t>(r)]).solid) center(r) = 1.0;
      if (grid.cell(b.neighbor.owner[static_cast<size_t>(r)]).solid) neighbor(r) = 1.0;
    }
    values[static_cast<size_t>(c)] = boundary_loss(center, neighbor).value;
  });
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  return sum / static_cast<double>(n);
}

}  // namespace mstopo
