#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "mstopo/driver.hpp"
#include "mstopo/errors.hpp"
#include "oracles.hpp"

using namespace mstopo;

namespace {

RunConfig small_inverse(int nx, int ny, int res, int epochs) {
  RunConfig c;
  c.mode = Mode::inverse_homog_field;
  c.seed = 5;
  c.epochs = epochs;
  c.schedules.total_epochs = epochs;
  c.grid = MacroGrid(nx, ny, res);
  c.network.kernels = 60;
  for (int k = 0; k < c.grid.n_cells(); ++k) {
    c.grid.cell(k).vf_target = 0.4 + 0.05 * (k % 3);
    c.grid.cell(k).tensor_weights = bulk_weights();
  }
  return c;
}

}  // namespace

TEST_CASE("cell selection schemes") {
  MacroGrid grid(4, 4, 4);
  const auto full = select_cells({BatchScheme::full, 1}, 3, grid);
  CHECK(full.size() == 16);
  for (int c = 0; c < 16; ++c) CHECK(full[static_cast<size_t>(c)] == c);
  CHECK(batch_plan({BatchScheme::full, 1}, 1, grid).size() == 1);

  const auto plan = batch_plan({BatchScheme::minibatch, 2}, 1, grid);
  CHECK(plan.size() == 2);
  auto all = select_cells({BatchScheme::minibatch, 2}, 1, grid);
  std::sort(all.begin(), all.end());
  for (int c = 0; c < 16; ++c) CHECK(all[static_cast<size_t>(c)] == c);

  for (int start = 1; start <= 9; ++start) {
    std::map<int, int> seen;
    for (int e = start; e < start + 4; ++e)
      for (int c : select_cells({BatchScheme::miniepoch, 4}, e, grid)) ++seen[c];
    CHECK(seen.size() == 16);
    for (auto [c, n] : seen) CHECK(n == 1);
  }
  int hits = 0;
  for (int e = 1; e <= 12; ++e) {
    const auto s = select_cells({BatchScheme::miniepoch, 4}, e, grid);
    if (std::find(s.begin(), s.end(), 7) != s.end()) {
      ++hits;
      CHECK((e - 1) % 4 == 3);
    }
  }
  CHECK(hits == 3);
}

TEST_CASE("square group counts keep neighbors apart") {
  MacroGrid grid(4, 4, 4);
  const auto groups = cell_groups(grid, 4);
  for (const auto& g : groups) {
    CHECK(g.size() == 4);
    for (int a : g)
      for (int b : g)
        if (a != b) {
          const int di = std::abs(a % 4 - b % 4), dj = std::abs(a / 4 - b / 4);
          CHECK(std::max(di, dj) >= 2);
        }
  }
  CHECK(cell_groups(grid, 3)[0].size() == 6);
  CHECK_THROWS_AS(cell_groups(grid, 17), InvalidArgument);
}

TEST_CASE("config validation") {
  RunConfig c = small_inverse(2, 2, 6, 10);
  CHECK_NOTHROW(c.validate());
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_inverse(2, 2, 6, 10);
  c.grid.cell(1).vf_target = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_inverse(2, 2, 6, 10);
  c.batch = {BatchScheme::miniepoch, 5};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_inverse(2, 2, 6, 10);
  c.grid.cell(0).rotation = 0.2;
  CHECK(c.patch_extension() == doctest::Approx(1.6));
  c.rotation_mode = RotationMode::tensor;
  CHECK(c.patch_extension() == doctest::Approx(1.2));
}

TEST_CASE("end-to-end gradient matches finite differences") {
  RunConfig c = small_inverse(1, 1, 8, 300);
  c.network.kernels = 40;
  c.network.frequency_scale = 4.0;
  Trainer t(c);
  const NetworkParams p = t.initial_micro();
  const int epoch = 120;  // alpha and beta both active
  const StepResult r = t.evaluate(p, nullptr, {0}, epoch, true);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<Eigen::Index> pick(0, p.n_kernels() - 1);
  auto total = [&](const NetworkParams& q) { return t.evaluate(q, nullptr, {0}, epoch, false).breakdown.total; };
  for (int k = 0; k < 10; ++k) {
    const Eigen::Index i = pick(rng);
    NetworkParams up = p, dn = p;
    up.weights(i) += 1e-6;
    dn.weights(i) -= 1e-6;
    const double fd = (total(up) - total(dn)) / 2e-6;
    CHECK(oracle::rel_err(fd, r.micro_grad.weights(i)) < 1e-2);
  }
}

TEST_CASE("identical seeds give identical runs") {
  const RunConfig c = small_inverse(2, 2, 6, 8);
  const RunResult a = run(c);
  const RunResult b = run(c);
  REQUIRE(a.log.epochs.size() == 8);
  for (size_t e = 0; e < 8; ++e) CHECK(a.log.epochs[e].loss.total == b.log.epochs[e].loss.total);
  CHECK(a.micro.kernels == b.micro.kernels);
  CHECK(a.micro.weights == b.micro.weights);
}

TEST_CASE("logged totals match a recomputation from checkpointed parameters") {
  RunConfig c = small_inverse(2, 1, 6, 60);
  c.checkpoint_every = 1;
  std::map<int, NetworkParams> saved;
  Trainer t(c);
  saved[0] = t.initial_micro();
  const RunResult r = t.run([&](int e, const NetworkParams& m, const NetworkParams*) { saved[e] = m; });
  Trainer fresh(c);
  for (int e : {1, 30, 55, 60}) {
    const double again = fresh.evaluate(saved[e - 1], nullptr, {0, 1}, e, false).breakdown.total;
    CHECK(std::abs(again - r.log.epochs[static_cast<size_t>(e - 1)].loss.total) < 1e-6);
  }
}

TEST_CASE("thresholded solid cell reaches the bound") {
  MacroGrid grid(1, 1, 6);
  NetworkParams p;
  p.kernels = Eigen::MatrixXd::Zero(1, 4);
  p.weights = Eigen::VectorXd::Constant(1, 50.0);
  const auto ev = threshold_and_evaluate(p, grid, 0.4, Material{});
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].vf == 1.0);
  CHECK(ev[0].ratio == doctest::Approx(1.0).epsilon(1e-9));

  p.weights(0) = -50.0;
  const auto v = threshold_and_evaluate(p, grid, 0.4, Material{});
  CHECK(v[0].all_void);
  CHECK(std::isnan(v[0].ratio));
}

TEST_CASE("short inverse run improves and stays under the bound") {
  RunConfig c = small_inverse(2, 2, 10, 40);
  c.network.kernels = 300;
  Trainer t(c);
  const NetworkParams start = t.initial_micro();
  const RunResult r = t.run();
  // compare at frozen schedule weights
  const std::vector<int> all = {0, 1, 2, 3};
  CHECK(t.evaluate(r.micro, nullptr, all, 40, false).breakdown.total <
        t.evaluate(start, nullptr, all, 40, false).breakdown.total);
  for (const auto& e : threshold_and_evaluate(r.micro, c.grid, 0.4, c.material)) {
    if (!e.all_void) {
      CHECK(e.ratio >= 0.0);
      CHECK(e.ratio <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("enforced-solid cells stay solid") {
  RunConfig c = small_inverse(2, 1, 6, 5);
  c.grid.cell(1).solid = true;
  const RunResult r = run(c);
  const Eigen::VectorXd rho = render_densities(r.micro, nullptr, c.grid, 1, 0.4);
  // right half of the 12 x 6 image
  for (int row = 0; row < 6; ++row)
    for (int col = 6; col < 12; ++col) CHECK(rho(row * 12 + col) == 1.0);
}

TEST_CASE("render at factor 2 averages back to factor 1") {
  MacroGrid grid(2, 2, 8);
  for (int k = 0; k < 4; ++k) grid.cell(k).tensor_weights = bulk_weights();
  const NetworkParams p = init_params(200, 4, 3, {6.0, 0.5});
  const Eigen::VectorXd r1 = render_densities(p, nullptr, grid, 1, 0.4);
  const Eigen::VectorXd r2 = render_densities(p, nullptr, grid, 2, 0.4);
  const int w = 16;
  double err = 0.0;
  for (int y = 0; y < w; ++y)
    for (int x = 0; x < w; ++x) {
      const double avg = 0.25 * (r2((2 * y) * 2 * w + 2 * x) + r2((2 * y) * 2 * w + 2 * x + 1) +
                                 r2((2 * y + 1) * 2 * w + 2 * x) + r2((2 * y + 1) * 2 * w + 2 * x + 1));
      err += std::abs(avg - r1(y * w + x));
    }
  CHECK(err / (w * w) < 0.1);
}
