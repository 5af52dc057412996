#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tracshape/errors.hpp"
#include "tracshape/format.hpp"
#include "tracshape/mesh.hpp"

namespace tracshape {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& item : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; }))
      throw ParseError("unknown key '" + item.key() + "' in " + where);
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing key '") + key + "' in " + where);
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError("expected a number in " + where);
  return v.get<double>();
}

Index integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ParseError("expected an integer in " + where);
  const auto x = v.get<std::int64_t>();
  if (x < std::numeric_limits<Index>::min() || x > std::numeric_limits<Index>::max())
    throw ParseError("integer out of range in " + where);
  return static_cast<Index>(x);
}

RegionTag parse_region(const std::string& name, const json& obj) {
  const std::string where = "region '" + name + "'";
  if (!obj.is_object()) throw ParseError(where + " must be an object");
  reject_unknown_keys(obj, {"kind", "members"}, where);
  const json& kind = require(obj, "kind", where);
  const json& members = require(obj, "members", where);
  if (!members.is_array()) throw ParseError(where + " members must be an array");
  RegionTag tag;
  tag.name = name;
  if (kind == "nodes") {
    tag.kind = RegionKind::nodes;
    for (const auto& m : members) tag.nodes.push_back(integer(m, where));
  } else if (kind == "facets") {
    tag.kind = RegionKind::facets;
    for (const auto& m : members) {
      if (!m.is_array() || m.size() != 2) throw ParseError(where + " facet member must be [element, local_facet]");
      tag.facets.push_back({integer(m[0], where), integer(m[1], where)});
    }
  } else {
    throw ParseError(where + " kind must be \"nodes\" or \"facets\"");
  }
  return tag;
}

}  // namespace

Mesh load_mesh(std::istream& in, std::vector<std::string>* warnings) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed mesh document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("mesh document must be a JSON object");
  reject_unknown_keys(doc, {"dimension", "thickness", "nodes", "elements", "regions"}, "mesh document");

  const int dim = integer(require(doc, "dimension", "mesh document"), "dimension");
  if (dim != 2 && dim != 3) throw ParseError("dimension must be 2 or 3");
  double thickness = 1.0;
  if (dim == 2) {
    thickness = number(require(doc, "thickness", "mesh document"), "thickness");
  } else if (doc.contains("thickness")) {
    throw ParseError("thickness is only allowed for dimension 2");
  }

  const json& jn = require(doc, "nodes", "mesh document");
  if (!jn.is_array()) throw ParseError("nodes must be an array");
  std::vector<Vec3> nodes;
  nodes.reserve(jn.size());
  for (std::size_t i = 0; i < jn.size(); ++i) {
    const std::string where = "node " + std::to_string(i);
    if (!jn[i].is_array() || jn[i].size() != 3) throw ParseError(where + " must be [x, y, z]");
    nodes.emplace_back(number(jn[i][0], where), number(jn[i][1], where), number(jn[i][2], where));
    if (dim == 2 && nodes.back().z() != 0.0) throw ValidationError(where + " has nonzero z in a 2D mesh");
  }

  const json& je = require(doc, "elements", "mesh document");
  if (!je.is_array()) throw ParseError("elements must be an array");
  const std::size_t arity = static_cast<std::size_t>(dim + 1);
  std::vector<Element> elements;
  elements.reserve(je.size());
  for (std::size_t e = 0; e < je.size(); ++e) {
    const std::string where = "element " + std::to_string(e);
    if (!je[e].is_array() || je[e].size() != arity)
      throw ParseError(where + " must list " + std::to_string(arity) + " node indices");
    Element conn{-1, -1, -1, -1};
    for (std::size_t a = 0; a < arity; ++a) {
      conn[a] = integer(je[e][a], where);
      if (conn[a] < 0 || conn[a] >= static_cast<Index>(nodes.size())) {
        throw ValidationError(where + " references node " + std::to_string(conn[a]) + " outside [0, " +
                              std::to_string(nodes.size()) + ")");
      }
    }
    elements.push_back(conn);
  }

  std::map<std::string, RegionTag> regions;
  if (auto it = doc.find("regions"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("regions must be an object");
    for (const auto& item : it->items()) regions.emplace(item.key(), parse_region(item.key(), item.value()));
  }

  // Orientation repair: swap the last two local nodes, which exchanges the last two local facets.
  const Mesh raw(dim, thickness, nodes, elements, {});
  std::vector<char> flipped(elements.size(), 0);
  for (Index e = 0; e < static_cast<Index>(elements.size()); ++e) {
    if (signed_measure(raw, e) < 0.0) {
      std::swap(elements[static_cast<std::size_t>(e)][arity - 2], elements[static_cast<std::size_t>(e)][arity - 1]);
      flipped[static_cast<std::size_t>(e)] = 1;
      if (warnings) warnings->push_back("element " + std::to_string(e) + " was inverted; orientation repaired");
    }
  }
  for (auto& [name, tag] : regions) {
    for (auto& f : tag.facets) {
      if (f.element < 0 || f.element >= static_cast<Index>(elements.size())) continue;
      if (!flipped[static_cast<std::size_t>(f.element)]) continue;
      const auto hi = static_cast<Index>(arity - 1);
      if (f.local == hi) f.local = hi - 1;
      else if (f.local == hi - 1) f.local = hi;
    }
    std::sort(tag.facets.begin(), tag.facets.end());
  }

  Mesh mesh(dim, thickness, std::move(nodes), std::move(elements), std::move(regions));
  const MeshReport report = validate(mesh);
  if (!report.is_valid) {
    std::string text = "invalid mesh:";
    for (const auto& m : report.messages) text += "\n  " + m;
    throw ValidationError(text);
  }
  return mesh;
}

Mesh load_mesh_file(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file '" + path + "'");
  return load_mesh(in, warnings);
}

void save_mesh(std::ostream& out, const Mesh& mesh) {
  out << "{\n  \"dimension\": " << mesh.dimension() << ",\n";
  if (mesh.dimension() == 2) out << "  \"thickness\": " << format_double(mesh.thickness()) << ",\n";
  out << "  \"nodes\": [";
  for (std::size_t i = 0; i < mesh.node_count(); ++i) {
    const Vec3& p = mesh.nodes()[i];
    out << (i ? ",\n    " : "\n    ") << '[' << format_double(p.x()) << ", " << format_double(p.y()) << ", "
        << format_double(p.z()) << ']';
  }
  out << "\n  ],\n  \"elements\": [";
  for (Index e = 0; e < static_cast<Index>(mesh.element_count()); ++e) {
    out << (e ? ",\n    " : "\n    ") << '[';
    const auto conn = mesh.element_nodes(e);
    for (std::size_t a = 0; a < conn.size(); ++a) out << (a ? ", " : "") << conn[a];
    out << ']';
  }
  out << "\n  ],\n  \"regions\": {";
  bool first = true;
  for (const auto& [name, tag] : mesh.regions()) {
    out << (first ? "\n    " : ",\n    ") << json(name).dump() << ": {\"kind\": \""
        << (tag.kind == RegionKind::nodes ? "nodes" : "facets") << "\", \"members\": [";
    if (tag.kind == RegionKind::nodes) {
      for (std::size_t i = 0; i < tag.nodes.size(); ++i) out << (i ? ", " : "") << tag.nodes[i];
    } else {
      for (std::size_t i = 0; i < tag.facets.size(); ++i)
        out << (i ? ", " : "") << '[' << tag.facets[i].element << ", " << tag.facets[i].local << ']';
    }
    out << "]}";
    first = false;
  }
  out << (first ? "}\n}\n" : "\n  }\n}\n");
}

std::string mesh_to_json(const Mesh& mesh) {
  std::ostringstream os;
  save_mesh(os, mesh);
  return os.str();
}

}  // namespace tracshape
