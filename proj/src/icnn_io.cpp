#include "v2g/icnn_io.hpp"

#include <fstream>

#include <fmt/format.h>

#include "v2g/error.hpp"

namespace v2g {
namespace {

using nlohmann::json;

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

void read_matrix(const json& j, Matrix& m, std::string_view name, std::size_t layer) {
  if (!j.is_array() || j.size() != m.rows())
    throw DimensionError(fmt::format("layer {}: {} must have {} rows", layer, name, m.rows()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != m.cols())
      throw DimensionError(
          fmt::format("layer {}: {} row {} must have {} entries", layer, name, r, m.cols()));
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = row[c].get<double>();
  }
}

void read_vector(const json& j, Vector& v, std::string_view name, std::size_t layer) {
  if (!j.is_array() || j.size() != v.size())
    throw DimensionError(
        fmt::format("layer {}: {} must have {} entries", layer, name, v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
}

const json& field(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(fmt::format("weights JSON: missing '{}'", key));
  return j.at(key);
}

}  // namespace

json to_json(const PicnnArch& a) {
  return json{{"n_x", a.n_x},
              {"n_y", a.n_y},
              {"convex_widths", a.convex_widths},
              {"nonconvex_widths", a.nonconvex_widths},
              {"convex_activation", to_string(a.convex_activation)},
              {"output_activation", to_string(a.output_activation)},
              {"nonconvex_activation", to_string(a.nonconvex_activation)}};
}

PicnnArch picnn_arch_from_json(const json& j) {
  PicnnArch a;
  try {
    a.n_x = j.value("n_x", a.n_x);
    a.n_y = j.value("n_y", a.n_y);
    if (j.contains("convex_widths"))
      a.convex_widths = j.at("convex_widths").get<std::vector<std::size_t>>();
    if (j.contains("nonconvex_widths"))
      a.nonconvex_widths = j.at("nonconvex_widths").get<std::vector<std::size_t>>();
    if (j.contains("convex_activation"))
      a.convex_activation = parse_activation(j.at("convex_activation").get<std::string>());
    if (j.contains("output_activation"))
      a.output_activation = parse_activation(j.at("output_activation").get<std::string>());
    if (j.contains("nonconvex_activation"))
      a.nonconvex_activation =
          parse_activation(j.at("nonconvex_activation").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("arch: {}", e.what()));
  }
  a.validate();
  return a;
}

json to_json(const PicnnWeights& w) {
  json layers = json::array();
  for (const auto& L : w.layers) {
    layers.push_back(json{{"activation", to_string(L.activation)},
                          {"nonconvex_activation", to_string(L.nonconvex_activation)},
                          {"Wt", matrix_json(L.Wt)},
                          {"bt", L.bt},
                          {"W_zu", matrix_json(L.W_zu)},
                          {"b_z", L.b_z},
                          {"W_yu", matrix_json(L.W_yu)},
                          {"b_y", L.b_y},
                          {"W_u", matrix_json(L.W_u)},
                          {"b", L.b},
                          {"W_z", matrix_json(L.W_z)},
                          {"W_y", matrix_json(L.W_y)}});
  }
  const auto& s = w.scaling;
  return json{{"kind", "picnn"},
              {"arch", to_json(w.arch())},
              {"scaling",
               {{"x_shift", s.x_shift},
                {"x_scale", s.x_scale},
                {"y_shift", s.y_shift},
                {"y_scale", s.y_scale},
                {"out_shift", s.out_shift},
                {"out_scale", s.out_scale}}},
              {"layers", std::move(layers)}};
}

PicnnWeights picnn_from_json(const json& j) {
  if (j.value("kind", std::string("picnn")) != "picnn")
    throw ConfigError("weights JSON: kind is not 'picnn'");
  const PicnnArch arch = picnn_arch_from_json(field(j, "arch"));
  PicnnWeights w = make_picnn(arch);
  const auto& layers = field(j, "layers");
  if (!layers.is_array() || layers.size() != w.layers.size())
    throw DimensionError(fmt::format("weights JSON: expected {} layers", w.layers.size()));
  try {
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
      auto& L = w.layers[i];
      const auto& jl = layers[i];
      if (jl.contains("activation"))
        L.activation = parse_activation(jl.at("activation").get<std::string>());
      if (jl.contains("nonconvex_activation"))
        L.nonconvex_activation =
            parse_activation(jl.at("nonconvex_activation").get<std::string>());
      read_matrix(field(jl, "Wt"), L.Wt, "Wt", i);
      read_vector(field(jl, "bt"), L.bt, "bt", i);
      read_matrix(field(jl, "W_zu"), L.W_zu, "W_zu", i);
      read_vector(field(jl, "b_z"), L.b_z, "b_z", i);
      read_matrix(field(jl, "W_yu"), L.W_yu, "W_yu", i);
      read_vector(field(jl, "b_y"), L.b_y, "b_y", i);
      read_matrix(field(jl, "W_u"), L.W_u, "W_u", i);
      read_vector(field(jl, "b"), L.b, "b", i);
      read_matrix(field(jl, "W_z"), L.W_z, "W_z", i);
      read_matrix(field(jl, "W_y"), L.W_y, "W_y", i);
    }
    if (j.contains("scaling")) {
      const auto& js = j.at("scaling");
      auto& s = w.scaling;
      read_vector(field(js, "x_shift"), s.x_shift, "x_shift", 0);
      read_vector(field(js, "x_scale"), s.x_scale, "x_scale", 0);
      read_vector(field(js, "y_shift"), s.y_shift, "y_shift", 0);
      read_vector(field(js, "y_scale"), s.y_scale, "y_scale", 0);
      s.out_shift = field(js, "out_shift").get<double>();
      s.out_scale = field(js, "out_scale").get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("weights JSON: {}", e.what()));
  }
  w.validate_shapes();
  return w;
}

json to_json(const FicnnWeights& w) {
  json layers = json::array();
  std::vector<std::size_t> widths;
  for (const auto& L : w.layers) {
    widths.push_back(L.b.size());
    layers.push_back(json{{"activation", to_string(L.activation)},
                          {"W_y", matrix_json(L.W_y)},
                          {"W_z", matrix_json(L.W_z)},
                          {"b", L.b}});
  }
  return json{{"kind", "ficnn"},
              {"arch", {{"n_y", w.n_y}, {"widths", widths}}},
              {"layers", std::move(layers)}};
}

FicnnWeights ficnn_from_json(const json& j) {
  if (j.value("kind", std::string()) != "ficnn")
    throw ConfigError("weights JSON: kind is not 'ficnn'");
  FicnnArch arch;
  const auto& ja = field(j, "arch");
  arch.n_y = field(ja, "n_y").get<std::size_t>();
  arch.widths = field(ja, "widths").get<std::vector<std::size_t>>();
  FicnnWeights w = make_ficnn(arch);
  const auto& layers = field(j, "layers");
  if (!layers.is_array() || layers.size() != w.layers.size())
    throw DimensionError(fmt::format("weights JSON: expected {} layers", w.layers.size()));
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    auto& L = w.layers[i];
    const auto& jl = layers[i];
    L.activation = parse_activation(field(jl, "activation").get<std::string>());
    read_matrix(field(jl, "W_y"), L.W_y, "W_y", i);
    read_matrix(field(jl, "W_z"), L.W_z, "W_z", i);
    read_vector(field(jl, "b"), L.b, "b", i);
  }
  w.validate_shapes();
  return w;
}

void save_weights(const PicnnWeights& w, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << to_json(w).dump(1) << '\n';
}

PicnnWeights load_picnn(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read weights file '{}'", path.string()));
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("'{}': {}", path.string(), e.what()));
  }
  return picnn_from_json(j);
}

}  // namespace v2g
