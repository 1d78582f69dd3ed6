#pragma once

#include <algorithm>
#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mnbv/common.hpp"

namespace mnbv {

class TriangleMesh {
 public:
  using Triangle = std::array<int, 3>;

  TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
      : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
    if (vertices_.empty() || triangles_.empty()) throw InvalidArgument("mesh: empty mesh");
    const int n = static_cast<int>(vertices_.size());
    for (const auto& t : triangles_)
      for (int idx : t)
        if (idx < 0 || idx >= n) throw InvalidArgument("mesh: triangle index out of range");
    for (const auto& v : vertices_)
      if (!v.allFinite()) throw InvalidArgument("mesh: non-finite vertex");
    lo_ = hi_ = vertices_.front();
    for (const auto& v : vertices_) {
      lo_ = lo_.cwiseMin(v);
      hi_ = hi_.cwiseMax(v);
    }
  }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Vec3& bounds_min() const { return lo_; }
  const Vec3& bounds_max() const { return hi_; }

  const Vec3& corner(std::size_t tri, int c) const { return vertices_[triangles_[tri][c]]; }

 private:
  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  Vec3 lo_, hi_;
};

namespace detail {

inline void append_box(std::vector<Vec3>& verts, std::vector<TriangleMesh::Triangle>& tris,
                       const Vec3& lo, const Vec3& hi) {
  const int base = static_cast<int>(verts.size());
  for (int i = 0; i < 8; ++i)
    verts.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z());
  // Outward-facing quads, split into two triangles each.
  static constexpr int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                                      {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    tris.push_back({base + q[0], base + q[1], base + q[2]});
    tris.push_back({base + q[0], base + q[2], base + q[3]});
  }
}

}  // namespace detail

inline TriangleMesh make_box_mesh(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> v;
  std::vector<TriangleMesh::Triangle> t;
  detail::append_box(v, t, lo, hi);
  return TriangleMesh(std::move(v), std::move(t));
}

/// Asymmetric multi-box test object, about 0.6 m long, resting on z = 0.05.
inline TriangleMesh make_default_object() {
  std::vector<Vec3> v;
  std::vector<TriangleMesh::Triangle> t;
  detail::append_box(v, t, {-0.30, -0.14, 0.05}, {0.30, 0.14, 0.30});   // hull
  detail::append_box(v, t, {-0.26, -0.10, 0.30}, {-0.06, 0.10, 0.62});  // tower at the rear
  detail::append_box(v, t, {0.06, 0.14, 0.10}, {0.24, 0.26, 0.24});     // side pod, left only
  detail::append_box(v, t, {0.30, -0.06, 0.12}, {0.40, 0.06, 0.22});    // nose
  detail::append_box(v, t, {-0.02, -0.22, 0.22}, {0.06, -0.14, 0.44});  // fin, right only
  return TriangleMesh(std::move(v), std::move(t));
}

inline TriangleMesh read_off(std::istream& in) {
  std::string header;
  if (!(in >> header) || header != "OFF") throw InvalidArgument("OFF: missing header");
  long nv = 0, nf = 0, ne = 0;
  if (!(in >> nv >> nf >> ne) || nv <= 0 || nf <= 0) throw InvalidArgument("OFF: bad counts");
  std::vector<Vec3> verts(static_cast<std::size_t>(nv));
  for (auto& p : verts)
    if (!(in >> p.x() >> p.y() >> p.z())) throw InvalidArgument("OFF: truncated vertex list");
  std::vector<TriangleMesh::Triangle> tris;
  for (long f = 0; f < nf; ++f) {
    int k = 0;
    if (!(in >> k) || k < 3) throw InvalidArgument("OFF: bad face");
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (auto& i : idx)
      if (!(in >> i)) throw InvalidArgument("OFF: truncated face");
    std::string rest;
    std::getline(in, rest);  // optional per-face colour
    for (int i = 1; i + 1 < k; ++i) tris.push_back({idx[0], idx[i], idx[i + 1]});
  }
  return TriangleMesh(std::move(verts), std::move(tris));
}

inline TriangleMesh read_stl(std::istream& in) {
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<Vec3> verts;
  std::vector<TriangleMesh::Triangle> tris;
  auto add = [&](const Vec3& a, const Vec3& b, const Vec3& c) {
    const int base = static_cast<int>(verts.size());
    verts.push_back(a);
    verts.push_back(b);
    verts.push_back(c);
    tris.push_back({base, base + 1, base + 2});
  };

  bool binary = data.size() >= 84;
  if (binary) {
    std::uint32_t count = 0;
    std::memcpy(&count, data.data() + 80, 4);
    binary = data.size() == 84 + static_cast<std::size_t>(count) * 50;
    if (binary) {
      for (std::uint32_t f = 0; f < count; ++f) {
        const char* rec = data.data() + 84 + static_cast<std::size_t>(f) * 50 + 12;
        Vec3 p[3];
        for (int c = 0; c < 3; ++c) {
          float xyz[3];
          std::memcpy(xyz, rec + 12 * c, 12);
          p[c] = Vec3(xyz[0], xyz[1], xyz[2]);
        }
        add(p[0], p[1], p[2]);
      }
    }
  }
  if (!binary) {
    std::istringstream ss(data);
    std::string tok;
    if (!(ss >> tok) || tok != "solid") throw InvalidArgument("STL: unrecognised format");
    std::vector<Vec3> pending;
    while (ss >> tok) {
      if (tok == "vertex") {
        Vec3 p;
        if (!(ss >> p.x() >> p.y() >> p.z())) throw InvalidArgument("STL: bad vertex");
        pending.push_back(p);
      } else if (tok == "endloop") {
        if (pending.size() != 3) throw InvalidArgument("STL: facet is not a triangle");
        add(pending[0], pending[1], pending[2]);
        pending.clear();
      }
    }
  }
  return TriangleMesh(std::move(verts), std::move(tris));
}

/// Loads an .off or .stl file; an empty path or "builtin" gives the default object.
inline TriangleMesh load_mesh(const std::string& path) {
  if (path.empty() || path == "builtin") return make_default_object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("mesh: cannot open " + path);
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".off") return read_off(in);
  if (ext == ".stl") return read_stl(in);
  throw InvalidArgument("mesh: unsupported extension '" + ext + "'");
}

inline void write_off(std::ostream& out, const TriangleMesh& mesh) {
  out << "OFF\n" << mesh.vertices().size() << ' ' << mesh.triangles().size() << " 0\n";
  out << std::setprecision(9);
  for (const auto& v : mesh.vertices()) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline void write_ply(std::ostream& out, std::span<const Vec3> cloud) {
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  out << std::setprecision(7);
  for (const auto& p : cloud)
    out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
        << static_cast<float>(p.z()) << '\n';
}

inline std::vector<Vec3> read_ply(std::istream& in) {
  std::string line;
  std::size_t count = 0;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string a, b;
    ls >> a;
    if (a == "format") {
      ls >> b;
      ascii = b == "ascii";
    } else if (a == "element") {
      ls >> b >> count;
    } else if (a == "end_header") {
      break;
    }
  }
  if (!ascii) throw InvalidArgument("PLY: only ascii is supported");
  std::vector<Vec3> cloud(count);
  for (auto& p : cloud)
    if (!(in >> p.x() >> p.y() >> p.z())) throw InvalidArgument("PLY: truncated");
  return cloud;
}

}  // namespace mnbv
