#include "mstopo/cli_io.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mstopo/errors.hpp"

namespace mstopo {

namespace {

std::string where(const YAML::Node& node) {
  const YAML::Mark m = node.Mark();
  if (m.line < 0) {
    return "";
  }
  return " (line " + std::to_string(m.line + 1) + ")";
}

void check_keys(const YAML::Node& node, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!node.IsMap()) {
    throw ConfigError(section + ": expected a mapping" + where(node));
  }
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + (section.empty() ? key : section + "." + key) + "'" +
                        where(kv.first));
    }
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(field + ": invalid value" + where(node));
  }
}

template <typename T>
void read_opt(const YAML::Node& parent, const char* key, const std::string& field, T& out) {
  if (const YAML::Node n = parent[key]) {
    out = scalar<T>(n, field);
  }
}

std::string join(const std::string& section, const char* key) {
  return section.empty() ? key : section + "." + key;
}

// A per-cell scalar: constant, linear ramp or explicit table (top row first).
std::vector<double> cell_field(const YAML::Node& node, const MacroGrid& grid,
                               const std::string& field) {
  const int nx = grid.n_cells_x();
  const int ny = grid.n_cells_y();
  std::vector<double> out(static_cast<size_t>(grid.n_cells()));
  auto ramp = [&](double from, double to, const std::string& along, const YAML::Node& at) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        double t = 0.0;
        if (along == "x") {
          t = nx > 1 ? static_cast<double>(i) / (nx - 1) : 0.0;
        } else if (along == "y") {
          t = ny > 1 ? static_cast<double>(j) / (ny - 1) : 0.0;
        } else if (along == "radial") {
          const double cx = 0.5 * (nx - 1);
          const double cy = 0.5 * (ny - 1);
          const double rmax = std::hypot(cx, cy);
          t = rmax > 0.0 ? std::hypot(i - cx, j - cy) / rmax : 0.0;
        } else {
          throw ConfigError(field + ": ramp direction must be x, y or radial" + where(at));
        }
        out[static_cast<size_t>(grid.linear_index(i, j))] = from + (to - from) * t;
      }
    }
  };

  if (node.IsScalar()) {
    // "0.3 -> 1.0 along x" is accepted as a ramp shorthand.
    const std::string text = node.Scalar();
    std::string normalized = text;
    for (const std::string arrow : {"→", "->"}) {
      const auto p = normalized.find(arrow);
      if (p != std::string::npos) {
        normalized.replace(p, arrow.size(), " ");
      }
    }
    if (normalized != text) {
      std::istringstream in(normalized);
      double from = 0.0;
      double to = 0.0;
      std::string along_word;
      std::string along;
      if (!(in >> from >> to >> along_word >> along) || along_word != "along") {
        throw ConfigError(field + ": ramp must read '<from> -> <to> along <x|y|radial>'" +
                          where(node));
      }
      ramp(from, to, along, node);
      return out;
    }
    const double v = scalar<double>(node, field);
    std::fill(out.begin(), out.end(), v);
    return out;
  }
  if (node.IsMap() && node["ramp"]) {
    check_keys(node, field, {"ramp"});
    const YAML::Node r = node["ramp"];
    check_keys(r, field + ".ramp", {"from", "to", "along"});
    if (!r["from"] || !r["to"]) {
      throw ConfigError(field + ".ramp: 'from' and 'to' are required" + where(r));
    }
    ramp(scalar<double>(r["from"], field + ".ramp.from"), scalar<double>(r["to"], field + ".ramp.to"),
         r["along"] ? scalar<std::string>(r["along"], field + ".ramp.along") : "x", r);
    return out;
  }
  if (node.IsMap() && node["table"]) {
    check_keys(node, field, {"table"});
    const YAML::Node t = node["table"];
    if (!t.IsSequence() || static_cast<int>(t.size()) != ny) {
      throw ConfigError(field + ".table: expected " + std::to_string(ny) + " rows" + where(t));
    }
    for (int r = 0; r < ny; ++r) {
      const YAML::Node row = t[static_cast<size_t>(r)];
      if (!row.IsSequence() || static_cast<int>(row.size()) != nx) {
        throw ConfigError(field + ".table: expected " + std::to_string(nx) + " columns per row" +
                          where(row));
      }
      const int j = ny - 1 - r;
      for (int i = 0; i < nx; ++i) {
        out[static_cast<size_t>(grid.linear_index(i, j))] =
            scalar<double>(row[static_cast<size_t>(i)], field + ".table");
      }
    }
    return out;
  }
  throw ConfigError(field + ": expected a number, a ramp or a table" + where(node));
}

CellIndex read_node_index(const YAML::Node& n, const std::string& field) {
  if (!n || !n.IsSequence() || n.size() != 2) {
    throw ConfigError(field + ": expected [i, j]" + where(n));
  }
  return {scalar<int>(n[0], field), scalar<int>(n[1], field)};
}

void read_cells(const YAML::Node& cells, RunConfig& config) {
  MacroGrid& grid = config.grid;
  const int n = grid.n_cells();
  std::vector<double> vf(static_cast<size_t>(n), 0.5);
  std::vector<Mat3> weights(static_cast<size_t>(n), bulk_weights());
  std::vector<double> rotation(static_cast<size_t>(n), 0.0);

  if (cells) {
    check_keys(cells, "cells", {"vf_target", "weights", "rotation_deg", "solid"});
    if (const YAML::Node v = cells["vf_target"]) {
      vf = cell_field(v, grid, "cells.vf_target");
    }
    if (const YAML::Node w = cells["weights"]) {
      if (w.IsScalar()) {
        const std::string preset = w.Scalar();
        if (preset != "bulk") {
          throw ConfigError("cells.weights: unknown preset '" + preset + "'" + where(w));
        }
      } else {
        check_keys(w, "cells.weights", {"E11", "E12", "E13", "E22", "E23", "E33"});
        std::fill(weights.begin(), weights.end(), Mat3::Zero());
        const std::pair<const char*, std::pair<int, int>> entries[] = {
            {"E11", {0, 0}}, {"E12", {0, 1}}, {"E13", {0, 2}},
            {"E22", {1, 1}}, {"E23", {1, 2}}, {"E33", {2, 2}}};
        for (const auto& [key, rc] : entries) {
          if (const YAML::Node e = w[key]) {
            const auto values = cell_field(e, grid, std::string("cells.weights.") + key);
            for (int c = 0; c < n; ++c) {
              weights[static_cast<size_t>(c)](rc.first, rc.second) = values[static_cast<size_t>(c)];
              weights[static_cast<size_t>(c)](rc.second, rc.first) = values[static_cast<size_t>(c)];
            }
          }
        }
      }
    }
    if (const YAML::Node r = cells["rotation_deg"]) {
      rotation = cell_field(r, grid, "cells.rotation_deg");
      for (double& a : rotation) {
        a *= std::numbers::pi / 180.0;
      }
    }
    if (const YAML::Node s = cells["solid"]) {
      if (!s.IsSequence()) {
        throw ConfigError("cells.solid: expected a list of [i, j]" + where(s));
      }
      for (const auto& item : s) {
        const CellIndex idx = read_node_index(item, "cells.solid");
        if (idx.i < 0 || idx.i >= grid.n_cells_x() || idx.j < 0 || idx.j >= grid.n_cells_y()) {
          throw ConfigError("cells.solid: cell out of range" + where(item));
        }
        grid.cell(idx.i, idx.j).solid = true;
      }
    }
  }
  for (int c = 0; c < n; ++c) {
    CellSpec& spec = grid.cell(c);
    spec.vf_target = vf[static_cast<size_t>(c)];
    spec.tensor_weights = weights[static_cast<size_t>(c)];
    spec.rotation = rotation[static_cast<size_t>(c)];
  }
}

std::vector<int> node_list(const YAML::Node& item, const MacroProblem& p, const std::string& field) {
  std::vector<int> nodes;
  if (item["node"]) {
    const CellIndex n = read_node_index(item["node"], field + ".node");
    if (n.i < 0 || n.i > p.nx || n.j < 0 || n.j > p.ny) {
      throw ConfigError(field + ".node: node out of range" + where(item["node"]));
    }
    nodes.push_back(p.node(n.i, n.j));
  } else if (item["edge"]) {
    const std::string edge = scalar<std::string>(item["edge"], field + ".edge");
    if (edge == "left" || edge == "right") {
      const int i = edge == "left" ? 0 : p.nx;
      for (int j = 0; j <= p.ny; ++j) nodes.push_back(p.node(i, j));
    } else if (edge == "bottom" || edge == "top") {
      const int j = edge == "bottom" ? 0 : p.ny;
      for (int i = 0; i <= p.nx; ++i) nodes.push_back(p.node(i, j));
    } else {
      throw ConfigError(field + ".edge: expected left, right, bottom or top" + where(item["edge"]));
    }
  } else {
    throw ConfigError(field + ": entry needs 'node' or 'edge'" + where(item));
  }
  return nodes;
}

void read_macro(const YAML::Node& m, RunConfig& config) {
  MacroProblem p(config.grid.n_cells_x(), config.grid.n_cells_y());
  p.solid_mask.resize(static_cast<size_t>(config.grid.n_cells()));
  for (int c = 0; c < config.grid.n_cells(); ++c) {
    p.solid_mask[static_cast<size_t>(c)] = config.grid.cell(c).solid;
  }
  if (!m) {
    config.macro = p;
    return;
  }
  check_keys(m, "macro", {"vf_macro", "vf_micro", "fixed", "loads", "targets"});
  read_opt(m, "vf_macro", "macro.vf_macro", p.vf_macro);
  read_opt(m, "vf_micro", "macro.vf_micro", p.vf_micro);
  if (const YAML::Node f = m["fixed"]) {
    for (const auto& item : f) {
      check_keys(item, "macro.fixed[]", {"node", "edge", "dofs"});
      const std::string dofs = item["dofs"] ? scalar<std::string>(item["dofs"], "macro.fixed.dofs") : "xy";
      if (dofs != "x" && dofs != "y" && dofs != "xy") {
        throw ConfigError("macro.fixed.dofs: expected x, y or xy" + where(item["dofs"]));
      }
      for (int n : node_list(item, p, "macro.fixed")) {
        if (dofs.find('x') != std::string::npos) p.fixed_dofs.push_back(2 * n);
        if (dofs.find('y') != std::string::npos) p.fixed_dofs.push_back(2 * n + 1);
      }
    }
  }
  if (const YAML::Node l = m["loads"]) {
    for (const auto& item : l) {
      check_keys(item, "macro.loads[]", {"node", "edge", "fx", "fy"});
      double fx = 0.0;
      double fy = 0.0;
      read_opt(item, "fx", "macro.loads.fx", fx);
      read_opt(item, "fy", "macro.loads.fy", fy);
      for (int n : node_list(item, p, "macro.loads")) {
        p.loads(2 * n) += fx;
        p.loads(2 * n + 1) += fy;
      }
    }
  }
  if (const YAML::Node t = m["targets"]) {
    p.gamma = Eigen::VectorXd::Zero(p.n_dofs());
    p.u_target = Eigen::VectorXd::Zero(p.n_dofs());
    for (const auto& item : t) {
      check_keys(item, "macro.targets[]", {"node", "edge", "ux", "uy"});
      for (int n : node_list(item, p, "macro.targets")) {
        if (item["ux"]) {
          p.gamma(2 * n) = 1.0;
          p.u_target(2 * n) = scalar<double>(item["ux"], "macro.targets.ux");
        }
        if (item["uy"]) {
          p.gamma(2 * n + 1) = 1.0;
          p.u_target(2 * n + 1) = scalar<double>(item["uy"], "macro.targets.uy");
        }
      }
    }
  }
  config.macro = p;
}

void read_network(const YAML::Node& n, const std::string& section, NetworkSpec& spec) {
  if (!n) return;
  check_keys(n, section, {"kernels", "frequency_scale", "weight_scale"});
  read_opt(n, "kernels", join(section, "kernels"), spec.kernels);
  read_opt(n, "frequency_scale", join(section, "frequency_scale"), spec.frequency_scale);
  read_opt(n, "weight_scale", join(section, "weight_scale"), spec.weight_scale);
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(origin + ": parse error at line " + std::to_string(e.mark.line + 1) + ": " +
                      e.msg);
  }
  if (!root.IsMap()) {
    throw ConfigError(origin + ": top level must be a mapping");
  }
  check_keys(root, "", {"mode", "seed", "epochs", "lr", "threshold", "grid", "material", "network",
                        "macro_network", "batch", "schedules", "extension", "rotation_mode",
                        "checkpoint_every", "export", "cells", "macro"});

  RunConfig config;
  if (!root["mode"]) throw ConfigError("mode: required");
  try {
    config.mode = parse_mode(scalar<std::string>(root["mode"], "mode"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("mode: ") + e.what() + where(root["mode"]));
  }
  read_opt(root, "seed", "seed", config.seed);
  read_opt(root, "epochs", "epochs", config.epochs);
  read_opt(root, "lr", "lr", config.lr);
  read_opt(root, "threshold", "threshold", config.threshold);
  read_opt(root, "extension", "extension", config.extension);
  read_opt(root, "checkpoint_every", "checkpoint_every", config.checkpoint_every);

  const YAML::Node g = root["grid"];
  if (!g) throw ConfigError("grid: required");
  check_keys(g, "grid", {"nx", "ny", "micro_res"});
  int nx = 1;
  int ny = 1;
  int res = 30;
  read_opt(g, "nx", "grid.nx", nx);
  read_opt(g, "ny", "grid.ny", ny);
  read_opt(g, "micro_res", "grid.micro_res", res);
  if (nx < 1 || ny < 1) throw ConfigError("grid.nx/grid.ny: must be >= 1" + where(g));
  if (res < 2) throw ConfigError("grid.micro_res: must be >= 2" + where(g));
  config.grid = MacroGrid(nx, ny, res);

  if (const YAML::Node m = root["material"]) {
    check_keys(m, "material", {"e0", "nu", "simp_p", "e_min"});
    read_opt(m, "e0", "material.e0", config.material.e0);
    read_opt(m, "nu", "material.nu", config.material.nu);
    read_opt(m, "simp_p", "material.simp_p", config.material.simp_p);
    read_opt(m, "e_min", "material.e_min", config.material.e_min);
  }
  read_network(root["network"], "network", config.network);
  read_network(root["macro_network"], "macro_network", config.macro_network);

  if (const YAML::Node b = root["batch"]) {
    check_keys(b, "batch", {"scheme", "groups"});
    const std::string scheme = b["scheme"] ? scalar<std::string>(b["scheme"], "batch.scheme") : "full";
    if (scheme == "full") {
      config.batch.scheme = BatchScheme::full;
    } else if (scheme == "minibatch") {
      config.batch.scheme = BatchScheme::minibatch;
    } else if (scheme == "miniepoch") {
      config.batch.scheme = BatchScheme::miniepoch;
    } else {
      throw ConfigError("batch.scheme: expected full, minibatch or miniepoch" + where(b["scheme"]));
    }
    read_opt(b, "groups", "batch.groups", config.batch.groups);
  }

  config.schedules.total_epochs = config.epochs;
  if (const YAML::Node s = root["schedules"]) {
    check_keys(s, "schedules", {"alpha_start", "alpha_end", "beta_start_epoch", "beta_end", "boundary"});
    read_opt(s, "alpha_start", "schedules.alpha_start", config.schedules.alpha_start);
    read_opt(s, "alpha_end", "schedules.alpha_end", config.schedules.alpha_end);
    read_opt(s, "beta_start_epoch", "schedules.beta_start_epoch", config.schedules.beta_start_epoch);
    read_opt(s, "beta_end", "schedules.beta_end", config.schedules.beta_end);
    read_opt(s, "boundary", "schedules.boundary", config.schedules.boundary_enabled);
  }

  if (const YAML::Node r = root["rotation_mode"]) {
    const std::string v = scalar<std::string>(r, "rotation_mode");
    if (v == "geometry") {
      config.rotation_mode = RotationMode::geometry;
    } else if (v == "tensor") {
      config.rotation_mode = RotationMode::tensor;
    } else {
      throw ConfigError("rotation_mode: expected geometry or tensor" + where(r));
    }
  }
  if (const YAML::Node e = root["export"]) {
    check_keys(e, "export", {"render_factor"});
    read_opt(e, "render_factor", "export.render_factor", config.render_factor);
    if (config.render_factor < 1) throw ConfigError("export.render_factor: must be >= 1");
  }

  read_cells(root["cells"], config);
  read_macro(root["macro"], config);
  config.source_text = text;
  config.validate();
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config '" + path.string() + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.string());
}

void export_density_image(const Eigen::VectorXd& densities, int width, int height,
                          const std::filesystem::path& path) {
  if (width < 1 || height < 1 || densities.size() != static_cast<Eigen::Index>(width) * height) {
    throw InvalidArgument("export_density_image: density count does not match the image shape");
  }
  std::string pixels(static_cast<size_t>(densities.size()), '\0');
  for (Eigen::Index k = 0; k < densities.size(); ++k) {
    const double rho = std::clamp(densities(k), 0.0, 1.0);
    const int level = static_cast<int>(std::floor(255.0 * rho + 0.5));
    pixels[static_cast<size_t>(k)] = static_cast<char>(255 - level);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write image '" + path.string() + "'");
  }
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  if (!out) {
    throw IoError("failed writing image '" + path.string() + "'");
  }
}

std::vector<ConvergenceRow> convergence_rows(const ConvergenceLog& log) {
  std::vector<ConvergenceRow> rows;
  rows.reserve(log.epochs.size());
  for (const EpochRecord& r : log.epochs) {
    rows.push_back({r.epoch, r.loss.objective, r.loss.volume, r.loss.boundary,
                    r.loss.displacement, r.loss.total, r.seconds});
  }
  return rows;
}

std::vector<CellRow> cell_rows(const std::vector<CellEvaluation>& cells) {
  std::vector<CellRow> rows;
  rows.reserve(cells.size());
  for (const CellEvaluation& c : cells) {
    const Mat3& m = c.tensor.m;
    rows.push_back({c.index.i, c.index.j, c.vf_target, c.vf, m(0, 0), m(0, 1), m(0, 2), m(1, 1),
                    m(1, 2), m(2, 2), c.bulk, c.hs_bound, c.ratio});
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write '" + path.string() + "'");
  }
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, size_t columns) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != columns) {
      throw IoError("'" + path.string() + "': expected " + std::to_string(columns) + " columns");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

double num(const std::string& s) {
  // strtod (unlike stod) reads "nan" and "inf" without throwing on range.
  return std::strtod(s.c_str(), nullptr);
}

}  // namespace

void write_convergence_csv(const std::vector<ConvergenceRow>& rows,
                           const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "epoch,objective,volume,boundary,displacement,total,seconds\n";
  for (const ConvergenceRow& r : rows) {
    out << r.epoch << ',' << fmt(r.objective) << ',' << fmt(r.volume) << ',' << fmt(r.boundary)
        << ',' << fmt(r.displacement) << ',' << fmt(r.total) << ',' << fmt(r.seconds) << '\n';
  }
}

std::vector<ConvergenceRow> read_convergence_csv(const std::filesystem::path& path) {
  std::vector<ConvergenceRow> rows;
  for (const auto& f : read_csv(path, 7)) {
    rows.push_back({std::stoi(f[0]), num(f[1]), num(f[2]), num(f[3]), num(f[4]), num(f[5]),
                    num(f[6])});
  }
  return rows;
}

void write_cell_csv(const std::vector<CellRow>& rows, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "i,j,vf_target,vf_measured,E11,E12,E13,E22,E23,E33,bulk,hs_bound,ratio\n";
  for (const CellRow& r : rows) {
    out << r.i << ',' << r.j;
    for (double v : {r.vf_target, r.vf_measured, r.e11, r.e12, r.e13, r.e22, r.e23, r.e33, r.bulk,
                     r.hs_bound, r.ratio}) {
      out << ',' << fmt(v);
    }
    out << '\n';
  }
}

std::vector<CellRow> read_cell_csv(const std::filesystem::path& path) {
  std::vector<CellRow> rows;
  for (const auto& f : read_csv(path, 13)) {
    rows.push_back({std::stoi(f[0]), std::stoi(f[1]), num(f[2]), num(f[3]), num(f[4]), num(f[5]),
                    num(f[6]), num(f[7]), num(f[8]), num(f[9]), num(f[10]), num(f[11]),
                    num(f[12])});
  }
  return rows;
}

void export_reports(const ConvergenceLog& log, const std::vector<CellEvaluation>& cells,
                    const std::string& path_prefix) {
  write_convergence_csv(convergence_rows(log), path_prefix + "convergence.csv");
  write_cell_csv(cell_rows(cells), path_prefix + "cells.csv");
}

namespace {

void write_params(std::ostream& out, const char* name, const NetworkParams& p) {
  out << name << ' ' << p.n_kernels() << ' ' << p.input_dim() << '\n' << std::hexfloat;
  for (Eigen::Index k = 0; k < p.n_kernels(); ++k) {
    for (Eigen::Index d = 0; d < p.input_dim(); ++d) {
      out << p.kernels(k, d) << ' ';
    }
    out << p.weights(k) << '\n';
  }
  out << std::defaultfloat;
}

double read_hex(std::istream& in) {
  std::string token;
  if (!(in >> token)) {
    throw IoError("checkpoint: truncated parameter block");
  }
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str()) {
    throw IoError("checkpoint: bad number '" + token + "'");
  }
  return v;
}

NetworkParams read_params(std::istream& in, const std::string& expected) {
  std::string name;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  if (!(in >> name >> n >> d) || name != expected || n < 1 || d < 1) {
    throw IoError("checkpoint: missing '" + expected + "' block");
  }
  NetworkParams p;
  p.kernels.resize(n, d);
  p.weights.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) {
      p.kernels(k, j) = read_hex(in);
    }
    p.weights(k) = read_hex(in);
  }
  return p;
}

constexpr const char* kMagic = "mstopo-checkpoint 1";

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write checkpoint '" + path.string() + "'");
  }
  out << kMagic << '\n';
  out << "epoch " << ck.epoch << '\n';
  out << "seed " << ck.config.seed << '\n';
  out << "config " << ck.config.source_text.size() << '\n' << ck.config.source_text << '\n';
  write_params(out, "micro", ck.micro);
  if (ck.macro) {
    write_params(out, "macro", *ck.macro);
  }
  if (!out) {
    throw IoError("failed writing checkpoint '" + path.string() + "'");
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open checkpoint '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw IoError("'" + path.string() + "' is not a checkpoint");
  }
  Checkpoint ck;
  std::string key;
  std::uint64_t seed = 0;
  size_t length = 0;
  if (!(in >> key >> ck.epoch) || key != "epoch" || !(in >> key >> seed) || key != "seed" ||
      !(in >> key >> length) || key != "config") {
    throw IoError("checkpoint '" + path.string() + "': bad header");
  }
  in.get();
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) {
    throw IoError("checkpoint '" + path.string() + "': truncated config");
  }
  ck.config = parse_config_text(text, path.string() + " (embedded config)");
  ck.config.seed = seed;
  ck.micro = read_params(in, "micro");
  if (ck.config.mode == Mode::concurrent) {
    ck.macro = read_params(in, "macro");
  }
  return ck;
}

void write_metadata(const RunMetadata& meta, const std::filesystem::path& path) {
  nlohmann::json j;
  j["mode"] = meta.mode;
  j["seed"] = meta.seed;
  j["parameter_count"] = meta.parameter_count;
  j["wall_seconds"] = meta.wall_seconds;
  j["epochs"] = meta.epochs;
  j["config"] = meta.config_text;
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace mstopo
