#include "tracshape/stl.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "tracshape/errors.hpp"
#include "tracshape/format.hpp"

namespace tracshape {

namespace {

constexpr std::size_t kHeaderBytes = 80;
constexpr std::size_t kRecordBytes = 50;

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T get_le(std::string_view in, std::size_t offset) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

void put_vec(std::string& out, const Vec3& v, double scale) {
  for (int k = 0; k < 3; ++k) put_le(out, static_cast<float>(scale * v[k]));
}

Vec3 get_vec(std::string_view in, std::size_t offset) {
  return {get_le<float>(in, offset), get_le<float>(in, offset + 4), get_le<float>(in, offset + 8)};
}

std::string ascii_triple(const Vec3& v, double scale) {
  return format_significant(scale * v.x(), 9) + " " + format_significant(scale * v.y(), 9) + " " +
         format_significant(scale * v.z(), 9);
}

SurfaceModel read_binary(std::string_view bytes) {
  const auto count = get_le<std::uint32_t>(bytes, kHeaderBytes);
  SurfaceModel out;
  out.scale = 1.0;
  out.triangles.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t at = kHeaderBytes + 4 + t * kRecordBytes;
    SurfaceTriangle tri;
    tri.normal = get_vec(bytes, at);
    for (int a = 0; a < 3; ++a) tri.vertices[static_cast<std::size_t>(a)] = get_vec(bytes, at + 12 + 12 * a);
    out.triangles.push_back(tri);
  }
  return out;
}

SurfaceModel read_ascii(std::string_view bytes) {
  std::istringstream in{std::string(bytes)};
  SurfaceModel out;
  out.scale = 1.0;
  std::string word;
  in >> word;
  if (word != "solid") throw ParseError("STL: expected 'solid'");
  std::string rest;
  std::getline(in, rest);
  auto expect = [&](const char* token) {
    if (!(in >> word) || word != token) throw ParseError(std::string("STL: expected '") + token + "'");
  };
  auto read_vec = [&]() {
    Vec3 v;
    if (!(in >> v.x() >> v.y() >> v.z())) throw ParseError("STL: malformed number");
    return v;
  };
  while (in >> word) {
    if (word == "endsolid") return out;
    if (word != "facet") throw ParseError("STL: expected 'facet' or 'endsolid', got '" + word + "'");
    expect("normal");
    SurfaceTriangle tri;
    tri.normal = read_vec();
    expect("outer");
    expect("loop");
    for (auto& v : tri.vertices) {
      expect("vertex");
      v = read_vec();
    }
    expect("endloop");
    expect("endfacet");
    out.triangles.push_back(tri);
  }
  throw ParseError("STL: missing 'endsolid'");
}

}  // namespace

SurfaceModel surface_mesh(const Mesh& mesh, double scale) {
  if (mesh.dimension() != 3) throw ValidationError("surface export needs a 3D mesh");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("export scale must be positive");
  SurfaceModel out;
  out.scale = scale;
  for (const BoundaryFacet& f : extract_boundary(mesh)) {
    SurfaceTriangle tri;
    for (int a = 0; a < 3; ++a) tri.vertices[static_cast<std::size_t>(a)] = mesh.node(f.nodes[static_cast<std::size_t>(a)]);
    tri.normal = f.normal;
    out.triangles.push_back(tri);
  }
  return out;
}

std::string write_stl(const SurfaceModel& surface, StlFormat format, const std::string& name) {
  std::string out;
  if (format == StlFormat::binary) {
    if (surface.triangles.size() > std::numeric_limits<std::uint32_t>::max())
      throw ValidationError("too many triangles for binary STL");
    out.reserve(kHeaderBytes + 4 + kRecordBytes * surface.triangles.size());
    std::string header = "tracshape";
    header.resize(kHeaderBytes, ' ');
    out += header;
    put_le(out, static_cast<std::uint32_t>(surface.triangles.size()));
    for (const auto& tri : surface.triangles) {
      put_vec(out, tri.normal, 1.0);
      for (const auto& v : tri.vertices) put_vec(out, v, surface.scale);
      put_le(out, std::uint16_t{0});
    }
    return out;
  }
  out += "solid " + name + "\n";
  for (const auto& tri : surface.triangles) {
    out += "  facet normal " + ascii_triple(tri.normal, 1.0) + "\n";
    out += "    outer loop\n";
    for (const auto& v : tri.vertices) out += "      vertex " + ascii_triple(v, surface.scale) + "\n";
    out += "    endloop\n";
    out += "  endfacet\n";
  }
  out += "endsolid " + name + "\n";
  return out;
}

void write_stl_file(const std::string& path, const SurfaceModel& surface, StlFormat format) {
  write_file_atomic(path, write_stl(surface, format));
}

SurfaceModel read_stl(std::string_view bytes) {
  if (bytes.size() >= kHeaderBytes + 4) {
    const auto count = get_le<std::uint32_t>(bytes, kHeaderBytes);
    if (bytes.size() == kHeaderBytes + 4 + kRecordBytes * static_cast<std::size_t>(count)) return read_binary(bytes);
  }
  const auto first = bytes.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && bytes.substr(first, 5) == "solid") return read_ascii(bytes.substr(first));
  throw ParseError("STL: neither a binary file of consistent length nor ASCII");
}

ManifoldReport check_manifold(const SurfaceModel& surface, double weld_tolerance) {
  std::vector<Vec3> points;
  points.reserve(3 * surface.triangles.size());
  for (const auto& tri : surface.triangles)
    for (const auto& v : tri.vertices) points.push_back(v);
  const std::vector<Index> id = weld_points(points, weld_tolerance);

  // Undirected edge -> (uses, uses in the a < b direction).
  std::map<std::array<Index, 2>, std::array<int, 2>> edges;
  for (std::size_t t = 0; t < surface.triangles.size(); ++t) {
    for (int a = 0; a < 3; ++a) {
      const Index p = id[3 * t + static_cast<std::size_t>(a)];
      const Index q = id[3 * t + static_cast<std::size_t>((a + 1) % 3)];
      if (p == q) continue;
      auto& e = edges[{std::min(p, q), std::max(p, q)}];
      ++e[0];
      if (p < q) ++e[1];
    }
  }
  ManifoldReport out;
  out.winding_consistent = true;
  for (const auto& [key, use] : edges) {
    if (use[0] != 2) {
      out.edge_defects.push_back({key, use[0]});
    } else if (use[1] != 1) {
      out.winding_consistent = false;
    }
  }
  out.watertight = out.edge_defects.empty();
  return out;
}

DraftReport draft_check(const SurfaceModel& surface, const Vec3& pull, double min_angle) {
  if (!(std::abs(pull.norm() - 1.0) <= 1e-9)) throw ValidationError("pull direction must be a unit vector");
  if (!(min_angle >= 0.0 && min_angle < 90.0)) throw ValidationError("min_angle must lie in [0, 90) degrees");
  DraftReport out{pull, min_angle, {}};
  const double threshold = std::sin(min_angle * std::numbers::pi / 180.0);
  for (std::size_t t = 0; t < surface.triangles.size(); ++t) {
    const double c = std::min(1.0, std::abs(surface.triangles[t].normal.dot(pull)));
    if (c < threshold) out.violations.push_back({t, std::asin(c) * 180.0 / std::numbers::pi});
  }
  return out;
}

double signed_volume(const SurfaceModel& surface) {
  if (surface.triangles.empty()) return 0.0;
  const Vec3 o = surface.triangles.front().vertices[0];  // any origin works for a closed surface
  double sum = 0.0;
  for (const auto& tri : surface.triangles) {
    const auto& v = tri.vertices;
    sum += (v[0] - o).dot((v[1] - o).cross(v[2] - o));
  }
  return sum / 6.0;
}

double surface_area(const SurfaceModel& surface) {
  double sum = 0.0;
  for (const auto& tri : surface.triangles) {
    const auto& v = tri.vertices;
    sum += 0.5 * (v[1] - v[0]).cross(v[2] - v[0]).norm();
  }
  return sum;
}

Vec3 area_weighted_normal_sum(const SurfaceModel& surface) {
  Vec3 sum = Vec3::Zero();
  for (const auto& tri : surface.triangles) {
    const auto& v = tri.vertices;
    sum += 0.5 * (v[1] - v[0]).cross(v[2] - v[0]).norm() * tri.normal;
  }
  return sum;
}

}  // namespace tracshape
