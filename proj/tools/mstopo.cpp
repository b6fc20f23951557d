// Command-line entry point: optimize, evaluate, render.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mstopo/cli_io.hpp"
#include "mstopo/errors.hpp"

namespace fs = std::filesystem;
using namespace mstopo;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kConfig = 3, kFe = 4, kIo = 5 };

void apply_thread_override() {
  const char* env = std::getenv("MSTOPO_THREADS");
  if (env == nullptr || *env == '\0') {
    return;
  }
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) {
    throw ConfigError("MSTOPO_THREADS must be a positive integer");
  }
#ifdef _OPENMP
  omp_set_num_threads(static_cast<int>(n));
#endif
}

void write_images(const NetworkParams& micro, const NetworkParams* macro, const RunConfig& config,
                  int factor, const fs::path& path, double macro_threshold) {
  const int w = config.grid.n_cells_x() * config.grid.micro_res() * factor;
  const int h = config.grid.n_cells_y() * config.grid.micro_res() * factor;
  export_density_image(render_densities(micro, macro, config.grid, factor, macro_threshold), w, h,
                       path);
}

double macro_cut(const RunConfig& config) { return config.threshold; }

int optimize(const fs::path& config_path, std::optional<std::uint64_t> seed, const fs::path& out) {
  RunConfig config = parse_config(config_path);
  if (seed) {
    config.seed = *seed;
  }
  fs::create_directories(out);
  std::cout << "mode " << mode_name(config.mode) << ", " << config.grid.n_cells_x() << "x"
            << config.grid.n_cells_y() << " cells, " << config.grid.micro_res() << "^2 elements, "
            << config.epochs << " epochs, seed " << config.seed << std::endl;

  auto checkpoint = [&](int epoch, const NetworkParams& micro, const NetworkParams* macro) {
    Checkpoint ck{config, epoch, micro, macro ? std::optional<NetworkParams>(*macro) : std::nullopt};
    std::ostringstream name;
    name << "checkpoint_" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
    save_checkpoint(ck, out / name.str());
    std::cout << "epoch " << epoch << " checkpoint " << name.str() << std::endl;
  };
  const RunResult result = run(config, checkpoint);
  const NetworkParams* macro = result.macro ? &*result.macro : nullptr;

  save_checkpoint({config, config.epochs, result.micro, result.macro}, out / "final.ckpt");
  const auto cells = threshold_and_evaluate(result.micro, config.grid, config.threshold,
                                            config.material);
  export_reports(result.log, cells, (out / "").string());
  write_images(result.micro, macro, config, 1, out / "density.pgm", macro_cut(config));
  write_images(result.micro, macro, config, config.render_factor,
               out / ("density_x" + std::to_string(config.render_factor) + ".pgm"),
               macro_cut(config));

  long params = static_cast<long>(result.micro.parameter_count());
  if (macro) params += static_cast<long>(macro->parameter_count());
  write_metadata({std::string(mode_name(config.mode)), config.seed, params, result.seconds,
                  config.epochs, config.source_text},
                 out / "metadata.json");

  const LossBreakdown& last = result.log.epochs.back().loss;
  std::cout << "final loss " << last.total << " (objective " << last.objective << ", volume "
            << last.volume << ", boundary " << last.boundary << ") in " << result.seconds
            << " s; results in " << out.string() << std::endl;
  return kOk;
}

int evaluate(const fs::path& checkpoint, double threshold, const std::optional<fs::path>& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const auto cells =
      threshold_and_evaluate(ck.micro, ck.config.grid, threshold, ck.config.material);
  double sum = 0.0;
  int counted = 0;
  std::cout << "cell  vf_target  vf  bulk  hs_bound  ratio\n";
  for (const CellEvaluation& c : cells) {
    std::cout << "(" << c.index.i << "," << c.index.j << ")  " << c.vf_target << "  " << c.vf
              << "  " << c.bulk << "  " << c.hs_bound << "  "
              << (c.all_void ? std::string("void") : std::to_string(c.ratio)) << '\n';
    if (!c.all_void && !ck.config.grid.cell(c.index.i, c.index.j).solid) {
      sum += c.ratio;
      ++counted;
    }
  }
  if (counted > 0) {
    std::cout << "mean HS ratio " << sum / counted << " over " << counted << " cells\n";
  }
  if (out) {
    write_cell_csv(cell_rows(cells), *out);
  }
  return kOk;
}

int render(const fs::path& checkpoint, int factor, const std::optional<fs::path>& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const fs::path path = out ? *out : fs::path(checkpoint).replace_extension(
                                         ".x" + std::to_string(factor) + ".pgm");
  write_images(ck.micro, ck.macro ? &*ck.macro : nullptr, ck.config, factor, path,
               macro_cut(ck.config));
  std::cout << "wrote " << path.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-field multiscale topology optimization"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  auto* opt = app.add_subcommand("optimize", "train a design from a YAML config");
  opt->add_option("--config", config_path, "run configuration")->required();
  opt->add_option("--seed", seed, "override the configured seed");
  opt->add_option("--out", out_dir, "output directory");

  std::string ckpt;
  double threshold = 0.4;
  std::optional<std::string> eval_out;
  auto* ev = app.add_subcommand("evaluate", "threshold a checkpoint and report HS ratios");
  ev->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  ev->add_option("--threshold", threshold, "density threshold");
  ev->add_option("--out", eval_out, "write the per-cell CSV here");

  int factor = 4;
  std::optional<std::string> render_out;
  auto* rd = app.add_subcommand("render", "write an upsampled density image");
  rd->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  rd->add_option("--factor", factor, "samples per element edge")->check(CLI::PositiveNumber);
  rd->add_option("--out", render_out, "image path (PGM)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    apply_thread_override();
    if (*opt) return optimize(config_path, seed, out_dir);
    if (*ev) {
      return evaluate(ckpt, threshold,
                      eval_out ? std::optional<fs::path>(*eval_out) : std::nullopt);
    }
    if (*rd) {
      return render(ckpt, factor, render_out ? std::optional<fs::path>(*render_out) : std::nullopt);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const FeError& e) {
    std::cerr << "finite-element error: " << e.what() << '\n';
    return kFe;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
