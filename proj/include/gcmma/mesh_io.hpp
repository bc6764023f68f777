#pragma once

// Mesh documents:
//   { "dim": 1|2,
//     "nodes":    [[x], ...] or [[x, y], ...],
//     "elements": [[i, j], ...] or [[i, j, k], ...],
//     "tags":     { "name": [[node] | [node, node], ...], ... } }

#include <fstream>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "gcmma/errors.hpp"
#include "gcmma/mesh.hpp"

namespace gcmma {

using AnyMesh = std::variant<Mesh1D, Mesh2D>;

inline nlohmann::json mesh_to_json(const Mesh1D& m) {
  nlohmann::json j;
  j["dim"] = 1;
  j["nodes"] = nlohmann::json::array();
  for (double x : m.nodes())
    j["nodes"].push_back({x});
  j["elements"] = nlohmann::json::array();
  for (std::size_t e = 0; e < m.num_elements(); ++e)
    j["elements"].push_back({e, e + 1});
  j["tags"] = nlohmann::json::object();
  return j;
}

inline nlohmann::json mesh_to_json(const Mesh2D& m) {
  nlohmann::json j;
  j["dim"] = 2;
  j["nodes"] = nlohmann::json::array();
  for (const auto& p : m.nodes())
    j["nodes"].push_back({p.x, p.y});
  j["elements"] = nlohmann::json::array();
  for (const auto& t : m.triangles())
    j["elements"].push_back({t[0], t[1], t[2]});
  j["tags"] = nlohmann::json::object();
  for (const auto& [name, ents] : m.tags())
    j["tags"][name] = ents;
  return j;
}

inline nlohmann::json mesh_to_json(const AnyMesh& m) {
  return std::visit([](const auto& mm) { return mesh_to_json(mm); }, m);
}

inline AnyMesh mesh_from_json(const nlohmann::json& j) {
  try {
    const int dim = j.at("dim").get<int>();
    const auto& nodes = j.at("nodes");
    const auto& elems = j.at("elements");
    if (dim == 1) {
      std::vector<double> xs;
      xs.reserve(nodes.size());
      for (const auto& p : nodes)
        xs.push_back(p.at(0).get<double>());
      for (std::size_t e = 0; e < elems.size(); ++e)
        if (elems[e].at(0).get<std::size_t>() != e || elems[e].at(1).get<std::size_t>() != e + 1)
          throw ContractViolation("mesh: 1-D elements must connect consecutive nodes");
      if (elems.size() + 1 != xs.size())
        throw ContractViolation("mesh: 1-D element count does not match node count");
      return Mesh1D(std::move(xs));
    }
    if (dim == 2) {
      std::vector<Point2> pts;
      pts.reserve(nodes.size());
      for (const auto& p : nodes)
        pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      std::vector<Triangle> tris;
      tris.reserve(elems.size());
      for (const auto& t : elems) {
        if (t.size() != 3)
          throw ContractViolation("mesh: 2-D elements must be triangles");
        tris.push_back({t[0].get<std::size_t>(), t[1].get<std::size_t>(), t[2].get<std::size_t>()});
      }
      TagMap tags;
      if (j.contains("tags"))
        for (const auto& [name, ents] : j.at("tags").items())
          tags[name] = ents.get<std::vector<std::vector<std::size_t>>>();
      return Mesh2D(std::move(pts), std::move(tris), std::move(tags));
    }
    throw ContractViolation("mesh: unsupported dim " + std::to_string(dim));
  } catch (const nlohmann::json::exception& ex) {
    throw ContractViolation(std::string("mesh: malformed document: ") + ex.what());
  }
}

inline AnyMesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ContractViolation("cannot open mesh file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ContractViolation("mesh file '" + path + "' is not valid JSON: " + ex.what());
  }
  return mesh_from_json(j);
}

inline void write_mesh(const std::string& path, const AnyMesh& m) {
  std::ofstream out(path);
  if (!out)
    throw ContractViolation("cannot write mesh file '" + path + "'");
  out << mesh_to_json(m).dump(1) << '\n';
}

inline const Measures& element_measures(const AnyMesh& m) {
  return std::visit([](const auto& mm) -> const Measures& { return mm.measures(); }, m);
}

} // namespace gcmma
