#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mstopo/cli_io.hpp"
#include "mstopo/errors.hpp"

using namespace mstopo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("MSTOPO_TEST_DATA");
  const fs::path dir = fs::path(env ? env : fs::temp_directory_path().string()) / "unit_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config gets defaults") {
  const RunConfig c = parse_config_text("mode: inverse_homog_field\ngrid: {nx: 2, ny: 3, micro_res: 10}\n");
  CHECK(c.epochs == 300);
  CHECK(c.lr == 0.002);
  CHECK(c.threshold == 0.4);
  CHECK(c.material.simp_p == 3.0);
  CHECK(c.material.e_min == 1e-9);
  CHECK(c.network.kernels == 5000);
  CHECK(c.grid.n_cells() == 6);
  CHECK(c.grid.cell(4).tensor_weights == bulk_weights());
  CHECK(c.schedules.total_epochs == 300);
}

TEST_CASE("config errors name the field and line") {
  CHECK(error_of("mode: inverse_homog_field\ngrid: {nx: 2, ny: 2}\ncells:\n  vf_target: 1.5\n")
            .find("vf_target") != std::string::npos);
  const std::string unknown = error_of("mode: inverse_homog_field\ngrid: {nx: 2}\nepohcs: 3\n");
  CHECK(unknown.find("epohcs") != std::string::npos);
  CHECK(unknown.find("line 3") != std::string::npos);
  CHECK(error_of("mode: inverse_homog_field\ngrid: {nx: 2, bogus: 1}\n").find("grid.bogus") !=
        std::string::npos);
  CHECK(error_of("mode: [unclosed\n").find("line") != std::string::npos);
  CHECK(error_of("mode: sideways\ngrid: {nx: 1}\n").find("mode") != std::string::npos);
  CHECK(error_of("mode: inverse_homog_field\ngrid: {nx: 1}\nlr: abc\n").find("lr") != std::string::npos);
  CHECK_THROWS_AS(parse_config("/nonexistent/config.yaml"), IoError);
}

TEST_CASE("ramps expand by linear interpolation") {
  const RunConfig c = parse_config_text(
      "mode: inverse_homog_field\n"
      "grid: {nx: 4, ny: 2, micro_res: 6}\n"
      "cells:\n"
      "  vf_target: {ramp: {from: 0.4, to: 0.56, along: x}}\n"
      "  weights:\n"
      "    E11: 0.3 -> 1.0 along x\n"
      "    E22: {ramp: {from: 1.0, to: 0.5, along: y}}\n");
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 4; ++i) {
      const CellSpec& s = c.grid.cell(i, j);
      CHECK(s.vf_target == doctest::Approx(0.4 + 0.16 * i / 3.0));
      CHECK(s.tensor_weights(0, 0) == doctest::Approx(0.3 + 0.7 * i / 3.0));
      CHECK(s.tensor_weights(1, 1) == doctest::Approx(1.0 - 0.5 * j));
      CHECK(s.tensor_weights(0, 1) == 0.0);
    }
  const RunConfig u = parse_config_text(
      "mode: inverse_homog_field\ngrid: {nx: 2, ny: 1, micro_res: 6}\n"
      "cells:\n  weights: {E11: \"0.3→1.0 along x\"}\n");
  CHECK(u.grid.cell(1).tensor_weights(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("tables list the top row first") {
  const RunConfig c = parse_config_text(
      "mode: inverse_homog_field\ngrid: {nx: 2, ny: 2, micro_res: 6}\n"
      "cells:\n  vf_target: {table: [[0.1, 0.2], [0.3, 0.4]]}\n  rotation_deg: 90\n"
      "  solid: [[1, 0]]\n");
  CHECK(c.grid.cell(0, 1).vf_target == doctest::Approx(0.1));
  CHECK(c.grid.cell(1, 0).vf_target == doctest::Approx(0.4));
  CHECK(c.grid.cell(0, 0).rotation == doctest::Approx(M_PI / 2));
  CHECK(c.grid.cell(1, 0).solid);
  CHECK(c.patch_extension() == doctest::Approx(1.6));
}

TEST_CASE("macro section") {
  const RunConfig c = parse_config_text(
      "mode: concurrent\ngrid: {nx: 3, ny: 1, micro_res: 6}\n"
      "macro:\n  vf_macro: 0.6\n  fixed: [{edge: left, dofs: xy}]\n"
      "  loads: [{node: [3, 1], fy: -1}]\n");
  CHECK(c.macro.vf_macro == 0.6);
  CHECK(c.macro.fixed_dofs.size() == 4);
  CHECK(c.macro.loads(2 * c.macro.node(3, 1) + 1) == -1.0);
  CHECK(error_of("mode: concurrent\ngrid: {nx: 3, ny: 1, micro_res: 6}\n").find("macro") !=
        std::string::npos);
}

TEST_CASE("PGM export") {
  const fs::path p = scratch("half.pgm");
  export_density_image(Eigen::VectorXd::Constant(6, 0.5), 3, 2, p);
  const std::string bytes = slurp(p);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 6);
  CHECK(bytes.substr(0, header.size()) == header);
  for (size_t k = header.size(); k < bytes.size(); ++k) CHECK(static_cast<unsigned char>(bytes[k]) == 127);

  Eigen::VectorXd checker(4);
  checker << 0, 1, 1, 0;
  export_density_image(checker, 2, 2, p);
  const std::string cb = slurp(p);
  const std::string h2 = "P5\n2 2\n255\n";
  CHECK(static_cast<unsigned char>(cb[h2.size()]) == 255);
  CHECK(static_cast<unsigned char>(cb[h2.size() + 1]) == 0);
  CHECK(static_cast<unsigned char>(cb[h2.size() + 2]) == 0);
  CHECK(static_cast<unsigned char>(cb[h2.size() + 3]) == 255);
  CHECK_THROWS_AS(export_density_image(checker, 3, 2, p), InvalidArgument);
  CHECK_THROWS_AS(export_density_image(checker, 2, 2, "/nonexistent/dir/x.pgm"), IoError);
}

TEST_CASE("reports round-trip and checkpoints reload bit for bit") {
  RunConfig c = parse_config_text(
      "mode: inverse_homog_field\nseed: 4\nepochs: 6\ngrid: {nx: 2, ny: 2, micro_res: 6}\n"
      "network: {kernels: 40}\ncells:\n  vf_target: 0.5\n");
  c.seed = 11;  // command-line override survives the checkpoint
  const RunResult r = run(c);
  const auto cells = threshold_and_evaluate(r.micro, c.grid, c.threshold, c.material);
  const std::string prefix = scratch("run_").string();
  export_reports(r.log, cells, prefix);

  const auto conv = read_convergence_csv(prefix + "convergence.csv");
  const auto expected = convergence_rows(r.log);
  REQUIRE(conv.size() == 6);
  for (size_t k = 0; k < 6; ++k) {
    CHECK(conv[k].epoch == expected[k].epoch);
    CHECK(conv[k].total == expected[k].total);
    CHECK(conv[k].volume == expected[k].volume);
    CHECK(conv[k].seconds == expected[k].seconds);
  }
  const auto rows = read_cell_csv(prefix + "cells.csv");
  REQUIRE(rows.size() == 4);
  for (size_t k = 0; k < rows.size(); ++k) {
    const CellRow& a = rows[k];
    const CellRow b = cell_rows(cells)[k];
    CHECK(a.i == b.i);
    CHECK(a.e12 == b.e12);
    if (!std::isnan(a.ratio)) CHECK(std::abs(a.ratio - a.bulk / a.hs_bound) <= 1e-12);
  }

  const fs::path ck = scratch("run.ckpt");
  save_checkpoint({c, 6, r.micro, std::nullopt}, ck);
  const Checkpoint back = load_checkpoint(ck);
  CHECK(back.epoch == 6);
  CHECK(back.config.seed == 11);
  CHECK(back.micro.kernels == r.micro.kernels);
  CHECK(back.micro.weights == r.micro.weights);

  // re-export from the reloaded checkpoint is byte-identical
  const auto again = threshold_and_evaluate(back.micro, back.config.grid, 0.4, back.config.material);
  write_cell_csv(cell_rows(again), scratch("again_cells.csv"));
  CHECK(slurp(scratch("again_cells.csv")) == slurp(prefix + "cells.csv"));
  CHECK_THROWS_AS(load_checkpoint(scratch("half.pgm")), IoError);
}
