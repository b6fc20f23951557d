#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mstopo/cli_io.hpp"
#include "mstopo/errors.hpp"

namespace py = pybind11;
using namespace mstopo;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

py::dict breakdown_dict(const LossBreakdown& b) {
  py::dict d;
  d["objective"] = b.objective;
  d["volume"] = b.volume;
  d["boundary"] = b.boundary;
  d["displacement"] = b.displacement;
  d["alpha"] = b.alpha;
  d["beta"] = b.beta;
  d["total"] = b.total;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Neural-field multiscale topology optimization";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FeError>(m, "FeError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<NetworkParams>(m, "NetworkParams")
      .def(py::init<>())
      .def_readwrite("kernels", &NetworkParams::kernels)
      .def_readwrite("weights", &NetworkParams::weights)
      .def_property_readonly("n_kernels", &NetworkParams::n_kernels)
      .def_property_readonly("input_dim", &NetworkParams::input_dim)
      .def_property_readonly("parameter_count", &NetworkParams::parameter_count);

  py::class_<Material>(m, "Material")
      .def(py::init<>())
      .def(py::init([](double e0, double nu, double p, double e_min) { return Material{e0, nu, p, e_min}; }),
           py::arg("e0") = 1.0, py::arg("nu") = 0.3, py::arg("simp_p") = 3.0, py::arg("e_min") = 1e-9)
      .def_readwrite("e0", &Material::e0)
      .def_readwrite("nu", &Material::nu)
      .def_readwrite("simp_p", &Material::simp_p)
      .def_readwrite("e_min", &Material::e_min)
      .def("base_tensor", [](const Material& mat) { return Mat3(mat.base_tensor().m); });

  py::class_<RunConfig>(m, "RunConfig")
      .def_property_readonly("mode", [](const RunConfig& c) { return std::string(mode_name(c.mode)); })
      .def_readwrite("seed", &RunConfig::seed)
      .def_property(
          "epochs", [](const RunConfig& c) { return c.epochs; },
          [](RunConfig& c, int n) {
            c.epochs = n;
            c.schedules.total_epochs = n;
          })
      .def_readwrite("threshold", &RunConfig::threshold)
      .def_readwrite("material", &RunConfig::material)
      .def_property_readonly("n_cells_x", [](const RunConfig& c) { return c.grid.n_cells_x(); })
      .def_property_readonly("n_cells_y", [](const RunConfig& c) { return c.grid.n_cells_y(); })
      .def_property_readonly("micro_res", [](const RunConfig& c) { return c.grid.micro_res(); })
      .def("validate", &RunConfig::validate);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("micro", &RunResult::micro)
      .def_readonly("macro", &RunResult::macro)
      .def_readonly("seconds", &RunResult::seconds)
      .def_property_readonly("log", [](const RunResult& r) {
        py::list out;
        for (const auto& e : r.log.epochs) {
          py::dict d = breakdown_dict(e.loss);
          d["epoch"] = e.epoch;
          d["seconds"] = e.seconds;
          out.append(d);
        }
        return out;
      });

  m.def(
      "init_params",
      [](int n_kernels, int input_dim, std::uint64_t seed, double frequency_scale, double weight_scale) {
        return init_params(n_kernels, input_dim, seed, {frequency_scale, weight_scale});
      },
      py::arg("n_kernels"), py::arg("input_dim"), py::arg("seed"), py::arg("frequency_scale") = 25.0,
      py::arg("weight_scale") = 0.1);
  m.def(
      "forward", [](const NetworkParams& p, const Eigen::MatrixXd& x) { return forward(p, x); },
      py::arg("params"), py::arg("inputs"), "Densities for each input row.");
  m.def(
      "backward",
      [](const NetworkParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& g) { return backward(p, x, g); },
      py::arg("params"), py::arg("inputs"), py::arg("d_rho"),
      "Gradients of sum(d_rho * forward(params, inputs)).");

  m.def(
      "homogenize",
      [](const RowMatrix& density, const Material& material) {
        // rows are element rows from the bottom of the cell
        const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(density.data(), density.size());
        const DensityGrid grid(static_cast<int>(density.cols()), static_cast<int>(density.rows()), v);
        py::gil_scoped_release release;
        return Mat3(homogenized_tensor(solve_unit_cell(grid, material)).m);
      },
      py::arg("density"), py::arg("material") = Material{},
      "Homogenized 3x3 Voigt tensor of a periodic unit cell; row 0 of `density` is the bottom.");
  m.def("hs_upper_bound", &hs_upper_bound, py::arg("vf"), py::arg("e0") = 1.0, py::arg("nu") = 0.3);

  m.def(
      "parse_config", [](const std::filesystem::path& p) { return parse_config(p); }, py::arg("path"));
  m.def("parse_config_text", &parse_config_text, py::arg("text"), py::arg("origin") = "<config>");

  m.def(
      "run",
      [](const RunConfig& c) {
        c.validate();
        py::gil_scoped_release release;
        return run(c);
      },
      py::arg("config"));

  m.def(
      "threshold_and_evaluate",
      [](const NetworkParams& p, const RunConfig& c) {
        std::vector<CellEvaluation> cells;
        {
          py::gil_scoped_release release;
          cells = threshold_and_evaluate(p, c.grid, c.threshold, c.material);
        }
        py::list out;
        for (const auto& e : cells) {
          py::dict d;
          d["i"] = e.index.i;
          d["j"] = e.index.j;
          d["vf_target"] = e.vf_target;
          d["vf"] = e.vf;
          d["tensor"] = Mat3(e.tensor.m);
          d["bulk"] = e.bulk;
          d["hs_bound"] = e.hs_bound;
          d["ratio"] = e.ratio;
          d["all_void"] = e.all_void;
          out.append(d);
        }
        return out;
      },
      py::arg("params"), py::arg("config"));

  m.def(
      "render_densities",
      [](const NetworkParams& micro, std::optional<NetworkParams> macro, const RunConfig& c, int factor) {
        const int w = c.grid.n_cells_x() * c.grid.micro_res() * factor;
        const int h = c.grid.n_cells_y() * c.grid.micro_res() * factor;
        Eigen::VectorXd v;
        {
          py::gil_scoped_release release;
          v = render_densities(micro, macro ? &*macro : nullptr, c.grid, factor, c.threshold);
        }
        return RowMatrix(Eigen::Map<const RowMatrix>(v.data(), h, w));
      },
      py::arg("micro"), py::arg("macro") = py::none(), py::arg("config"), py::arg("factor") = 1,
      "Density image of the whole domain, top row first.");

  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& p) {
        Checkpoint ck = load_checkpoint(p);
        py::dict d;
        d["config"] = ck.config;
        d["epoch"] = ck.epoch;
        d["micro"] = ck.micro;
        d["macro"] = ck.macro;
        return d;
      },
      py::arg("path"));
}
