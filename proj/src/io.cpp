#include "ppflow/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ppflow {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& s, long row, const std::string& column) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw DataError("non-numeric value '" + s + "' in column '" + column + "' at data row " +
                    std::to_string(row));
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json vector_to_json(Eigen::Ref<const Eigen::VectorXd> v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
  return rows;
}

const json& require(const json& j, const std::string& key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end())
    throw DataError("model archive: missing field '" + where + key + "'");
  return *it;
}

Eigen::VectorXd json_to_vector(const json& j, const std::string& where, long expected = -1) {
  if (!j.is_array())
    throw DataError("model archive: field '" + where + "' is not an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw DataError("model archive: non-numeric entry in '" + where + "'");
    v[static_cast<long>(i)] = j[i].get<double>();
  }
  if (expected >= 0 && v.size() != expected)
    throw DataError("model archive: field '" + where + "' has length " +
                    std::to_string(v.size()) + ", expected " + std::to_string(expected));
  return v;
}

Eigen::MatrixXd json_to_matrix(const json& j, const std::string& where, long rows, long cols) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(rows))
    throw DataError("model archive: field '" + where + "' must have " + std::to_string(rows) +
                    " rows");
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    m.row(r) = json_to_vector(j[static_cast<std::size_t>(r)],
                              where + "[" + std::to_string(r) + "]", cols)
                   .transpose();
  return m;
}

}  // namespace

PointPattern parse_points(const std::string& path, const std::vector<std::string>& columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  const std::vector<std::string> header = split_csv_line(line);

  std::vector<int> use;
  std::vector<std::string> names = columns;
  if (names.empty()) names = header;
  for (const std::string& name : names) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw DataError("column '" + name + "' not found in " + path);
    use.push_back(static_cast<int>(it - header.begin()));
  }
  const int d = static_cast<int>(use.size());
  if (d == 0) throw DataError("no columns selected from " + path);

  std::vector<double> data;
  long rows = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    ++rows;
    for (int k = 0; k < d; ++k) {
      if (static_cast<std::size_t>(use[k]) >= fields.size())
        throw DataError("row " + std::to_string(rows) + " in " + path + " has too few fields");
      data.push_back(parse_double(fields[static_cast<std::size_t>(use[k])], rows,
                                  names[static_cast<std::size_t>(k)]));
    }
  }
  if (rows == 0) throw DataError("empty pattern: no data rows in " + path);

  Eigen::MatrixXd points(rows, d);
  for (long i = 0; i < rows; ++i)
    for (int k = 0; k < d; ++k) points(i, k) = data[static_cast<std::size_t>(i * d + k)];
  return pattern_from_points(std::move(points));
}

void atomic_write_text(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + tmp);
    out << content;
    if (!out.good()) throw DataError("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

void write_pattern_csv(const std::string& path, const PointPattern& pattern) {
  std::string text;
  const int d = pattern.dim();
  for (int k = 0; k < d; ++k) text += (k ? ",x" : "x") + std::to_string(k + 1);
  text += "\n";
  for (int i = 0; i < pattern.n(); ++i) {
    for (int k = 0; k < d; ++k) {
      if (k) text += ",";
      text += format_double(pattern.points(i, k));
    }
    text += "\n";
  }
  atomic_write_text(path, text);
}

void write_surface_csv(const std::string& path, const GridSurface& surface) {
  std::string text;
  for (int k = 0; k < surface.grid.dim(); ++k) text += "x" + std::to_string(k + 1) + ",";
  text += "value\n";
  for (long i = 0; i < surface.grid.size(); ++i) {
    const Eigen::VectorXd x = surface.grid.node(i);
    for (int k = 0; k < x.size(); ++k) text += format_double(x[k]) + ",";
    text += format_double(surface.values[i]) + "\n";
  }
  atomic_write_text(path, text);
}

GridSurface read_surface_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  const std::size_t d = split_csv_line(line).size() - 1;
  if (d < 1 || d > 2) throw DataError("surface csv must have 1 or 2 coordinate columns");

  std::vector<Eigen::VectorXd> coords;
  std::vector<double> values;
  long rows = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != d + 1)
      throw DataError("surface row " + std::to_string(rows + 1) + " has wrong field count");
    ++rows;
    Eigen::VectorXd x(static_cast<long>(d));
    for (std::size_t k = 0; k < d; ++k)
      x[static_cast<long>(k)] = parse_double(fields[k], rows, "x" + std::to_string(k + 1));
    coords.push_back(std::move(x));
    values.push_back(parse_double(fields[d], rows, "value"));
  }
  if (rows < 2) throw DataError("surface csv needs at least 2 rows");

  GridSurface surf;
  surf.values = Eigen::Map<Eigen::VectorXd>(values.data(), rows);
  if (d == 1) {
    const double step = coords[1][0] - coords[0][0];
    surf.grid.lo = Eigen::VectorXd::Constant(1, coords.front()[0] - 0.5 * step);
    surf.grid.hi = Eigen::VectorXd::Constant(1, coords.back()[0] + 0.5 * step);
    surf.grid.shape = {static_cast<int>(rows)};
  } else {
    long inner = 1;
    while (inner < rows && coords[static_cast<std::size_t>(inner)][0] == coords[0][0]) ++inner;
    if (inner < 2 || rows % inner != 0)
      throw DataError("surface csv is not a regular row-major grid");
    const long outer = rows / inner;
    const double step2 = coords[1][1] - coords[0][1];
    const double step1 = outer > 1 ? coords[static_cast<std::size_t>(inner)][0] - coords[0][0]
                                   : step2;
    surf.grid.lo.resize(2);
    surf.grid.hi.resize(2);
    surf.grid.lo << coords.front()[0] - 0.5 * step1, coords.front()[1] - 0.5 * step2;
    surf.grid.hi << coords.back()[0] + 0.5 * step1, coords.back()[1] + 0.5 * step2;
    surf.grid.shape = {static_cast<int>(outer), static_cast<int>(inner)};
  }
  return surf;
}

void save_model(const std::string& path, const FittedIntensity& model) {
  json j;
  j["format"] = "ppflow-model";
  j["format_version"] = 1;
  j["dim"] = model.spec.dim;
  j["n_layers"] = model.spec.n_layers;
  switch (model.spec.kind.family) {
    case SublayerKind::Family::Naf: j["sublayer_family"] = "naf"; break;
    case SublayerKind::Family::AffineAutoregressive: j["sublayer_family"] = "affine"; break;
    case SublayerKind::Family::InverseAutoregressive: j["sublayer_family"] = "iaf"; break;
  }
  j["naf_width"] = model.spec.kind.naf_width;
  j["cond_hidden"] = model.spec.cond_hidden;
  j["bounds"] = {{"lo", vector_to_json(model.bounds.lo)},
                 {"hi", vector_to_json(model.bounds.hi)},
                 {"padding", model.bounds.padding}};
  j["mu_hat"] = model.mu_hat;
  j["fit"] = {{"seed", model.meta.seed},
              {"iterations", model.meta.iterations},
              {"final_objective", model.meta.final_objective}};
  json layers = json::array();
  for (const TriangularLayer& layer : model.stack.layers) {
    json jl;
    jl["first_dim_params"] = vector_to_json(layer.first_dim_params);
    json nets = json::array();
    for (const ConditionalNet& net : layer.cond_nets) {
      nets.push_back({{"weights_in", matrix_to_json(net.weights_in)},
                      {"bias_in", vector_to_json(net.bias_in)},
                      {"weights_out", matrix_to_json(net.weights_out)},
                      {"bias_out", vector_to_json(net.bias_out)}});
    }
    jl["cond_nets"] = std::move(nets);
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  atomic_write_text(path, j.dump(1));
}

FittedIntensity load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError("model archive: not valid JSON (" + std::string(e.what()) + ")");
  }

  if (require(j, "format", "").get<std::string>() != "ppflow-model")
    throw DataError("model archive: field 'format' is not 'ppflow-model'");
  if (require(j, "format_version", "").get<int>() != 1)
    throw DataError("model archive: unsupported 'format_version'");

  FittedIntensity model;
  model.spec.dim = require(j, "dim", "").get<int>();
  model.spec.n_layers = require(j, "n_layers", "").get<int>();
  model.spec.cond_hidden = require(j, "cond_hidden", "").get<int>();
  const std::string family = require(j, "sublayer_family", "").get<std::string>();
  if (family == "naf")
    model.spec.kind = SublayerKind::naf(require(j, "naf_width", "").get<int>());
  else if (family == "affine")
    model.spec.kind = SublayerKind::affine();
  else if (family == "iaf")
    model.spec.kind = SublayerKind::iaf();
  else
    throw DataError("model archive: unknown 'sublayer_family' value '" + family + "'");
  if (model.spec.dim < 1) throw DataError("model archive: field 'dim' must be >= 1");
  if (model.spec.n_layers < 1)
    throw DataError("model archive: field 'n_layers' must be >= 1");
  if (model.spec.cond_hidden < 1)
    throw DataError("model archive: field 'cond_hidden' must be >= 1");

  const json& jb = require(j, "bounds", "");
  model.bounds.lo = json_to_vector(require(jb, "lo", "bounds."), "bounds.lo", model.spec.dim);
  model.bounds.hi = json_to_vector(require(jb, "hi", "bounds."), "bounds.hi", model.spec.dim);
  model.bounds.padding = require(jb, "padding", "bounds.").get<double>();
  for (int k = 0; k < model.spec.dim; ++k)
    if (!(model.bounds.lo[k] < model.bounds.hi[k]))
      throw DataError("model archive: 'bounds' rectangle is degenerate");

  model.mu_hat = require(j, "mu_hat", "").get<double>();
  const json& jf = require(j, "fit", "");
  model.meta.seed = require(jf, "seed", "fit.").get<std::uint64_t>();
  model.meta.iterations = require(jf, "iterations", "fit.").get<int>();
  model.meta.final_objective = require(jf, "final_objective", "fit.").get<double>();

  const json& jl = require(j, "layers", "");
  if (!jl.is_array() || jl.size() != static_cast<std::size_t>(model.spec.n_layers))
    throw DataError("model archive: 'layers' must list n_layers entries");

  const int m = model.spec.kind.param_count();
  model.stack = make_stack(model.spec);
  for (int l = 0; l < model.spec.n_layers; ++l) {
    const std::string where = "layers[" + std::to_string(l) + "].";
    const json& one = jl[static_cast<std::size_t>(l)];
    TriangularLayer& layer = model.stack.layers[static_cast<std::size_t>(l)];
    layer.first_dim_params = json_to_vector(require(one, "first_dim_params", where),
                                            where + "first_dim_params", m);
    const json& nets = require(one, "cond_nets", where);
    if (!nets.is_array() || nets.size() != static_cast<std::size_t>(model.spec.dim - 1))
      throw DataError("model archive: '" + where + "cond_nets' must list dim-1 entries");
    for (int k = 1; k < model.spec.dim; ++k) {
      const std::string wn = where + "cond_nets[" + std::to_string(k - 1) + "].";
      const json& jn = nets[static_cast<std::size_t>(k - 1)];
      ConditionalNet& net = layer.cond_nets[static_cast<std::size_t>(k - 1)];
      net.weights_in = json_to_matrix(require(jn, "weights_in", wn), wn + "weights_in",
                                      model.spec.cond_hidden, k);
      net.bias_in = json_to_vector(require(jn, "bias_in", wn), wn + "bias_in",
                                   model.spec.cond_hidden);
      net.weights_out = json_to_matrix(require(jn, "weights_out", wn), wn + "weights_out", m,
                                       model.spec.cond_hidden);
      net.bias_out = json_to_vector(require(jn, "bias_out", wn), wn + "bias_out", m);
    }
  }
  return model;
}

}  // namespace ppflow
