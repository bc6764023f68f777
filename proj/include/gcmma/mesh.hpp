#pragma once

// 1-D interval meshes and 2-D linear triangle meshes, element measures,
// nested uniform refinement and injection of element-wise uniform fields.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gcmma/errors.hpp"
#include "gcmma/fspace.hpp"

namespace gcmma {

class Mesh1D {
public:
  explicit Mesh1D(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2)
      throw ContractViolation("Mesh1D: need at least two nodes");
    std::vector<double> lengths(nodes_.size() - 1);
    for (std::size_t e = 0; e + 1 < nodes_.size(); ++e) {
      if (!(nodes_[e + 1] > nodes_[e]))
        throw ContractViolation("Mesh1D: nodes not strictly increasing at " + std::to_string(e));
      lengths[e] = nodes_[e + 1] - nodes_[e];
    }
    measures_ = make_measures(std::move(lengths));
  }

  [[nodiscard]] std::size_t num_nodes() const noexcept { return nodes_.size(); }
  [[nodiscard]] std::size_t num_elements() const noexcept { return nodes_.size() - 1; }
  [[nodiscard]] const std::vector<double>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] double left(std::size_t e) const noexcept { return nodes_[e]; }
  [[nodiscard]] double right(std::size_t e) const noexcept { return nodes_[e + 1]; }
  [[nodiscard]] double midpoint(std::size_t e) const noexcept {
    return 0.5 * (nodes_[e] + nodes_[e + 1]);
  }
  [[nodiscard]] const Measures& measures() const noexcept { return measures_; }

  /// Element containing x (closed on the left), or nullopt outside the mesh.
  [[nodiscard]] std::optional<std::size_t> locate(double x) const {
    if (x < nodes_.front() || x > nodes_.back())
      return std::nullopt;
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    auto e = static_cast<std::size_t>(std::distance(nodes_.begin(), it));
    return std::min(e == 0 ? 0 : e - 1, num_elements() - 1);
  }

private:
  std::vector<double> nodes_;
  Measures measures_;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

using Triangle = std::array<std::size_t, 3>;

/// Named sets of mesh entities. An entity is a list of node indices:
/// one index for a node, two for a boundary edge.
using TagMap = std::map<std::string, std::vector<std::vector<std::size_t>>>;

inline double signed_area(const Point2& a, const Point2& b, const Point2& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

class Mesh2D {
public:
  Mesh2D(std::vector<Point2> nodes, std::vector<Triangle> triangles, TagMap tags = {})
      : nodes_(std::move(nodes)), triangles_(std::move(triangles)), tags_(std::move(tags)) {
    if (triangles_.empty())
      throw ContractViolation("Mesh2D: no triangles");
    std::vector<double> areas(triangles_.size());
    for (std::size_t e = 0; e < triangles_.size(); ++e) {
      for (auto v : triangles_[e])
        if (v >= nodes_.size())
          throw ContractViolation("Mesh2D: triangle " + std::to_string(e) +
                                  " references missing node");
      const auto& t = triangles_[e];
      areas[e] = signed_area(nodes_[t[0]], nodes_[t[1]], nodes_[t[2]]);
      if (!(areas[e] > 0.0))
        throw ContractViolation("Mesh2D: triangle " + std::to_string(e) +
                                " is not positively oriented");
    }
    for (const auto& [name, entities] : tags_)
      for (const auto& ent : entities) {
        if (ent.empty() || ent.size() > 2)
          throw ContractViolation("Mesh2D: tag '" + name + "' has an entity of arity " +
                                  std::to_string(ent.size()));
        for (auto v : ent)
          if (v >= nodes_.size())
            throw ContractViolation("Mesh2D: tag '" + name + "' references missing node");
      }
    measures_ = make_measures(std::move(areas));
  }

  [[nodiscard]] std::size_t num_nodes() const noexcept { return nodes_.size(); }
  [[nodiscard]] std::size_t num_elements() const noexcept { return triangles_.size(); }
  [[nodiscard]] const std::vector<Point2>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
  [[nodiscard]] const TagMap& tags() const noexcept { return tags_; }
  [[nodiscard]] const Measures& measures() const noexcept { return measures_; }

  [[nodiscard]] bool has_tag(const std::string& name) const { return tags_.count(name) > 0; }

  [[nodiscard]] const std::vector<std::vector<std::size_t>>& tag(const std::string& name) const {
    auto it = tags_.find(name);
    if (it == tags_.end())
      throw ContractViolation("Mesh2D: no tag named '" + name + "'");
    return it->second;
  }

  /// Sorted, unique node indices touched by a tag.
  [[nodiscard]] std::vector<std::size_t> tag_nodes(const std::string& name) const {
    std::vector<std::size_t> out;
    for (const auto& ent : tag(name))
      out.insert(out.end(), ent.begin(), ent.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  [[nodiscard]] Point2 centroid(std::size_t e) const {
    const auto& t = triangles_[e];
    const auto &a = nodes_[t[0]], &b = nodes_[t[1]], &c = nodes_[t[2]];
    return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
  }

  /// Copy of this mesh with one more tag.
  [[nodiscard]] Mesh2D with_tag(const std::string& name,
                                std::vector<std::vector<std::size_t>> entities) const {
    TagMap tags = tags_;
    tags[name] = std::move(entities);
    return Mesh2D(nodes_, triangles_, std::move(tags));
  }

private:
  std::vector<Point2> nodes_;
  std::vector<Triangle> triangles_;
  TagMap tags_;
  Measures measures_;
};

inline const Measures& element_measures(const Mesh1D& m) { return m.measures(); }
inline const Measures& element_measures(const Mesh2D& m) { return m.measures(); }

// ---------------------------------------------------------------------------
// Generators

/// Log-spaced mesh on [1, 10] with nodes 10^(r/(n+1)), r = 0..n+1.
/// This gives n + 1 elements.
inline Mesh1D log_mesh_1d(std::size_t n) {
  if (n == 0)
    throw ContractViolation("log_mesh_1d: n must be positive");
  std::vector<double> nodes(n + 2);
  for (std::size_t r = 0; r <= n + 1; ++r)
    nodes[r] = std::pow(10.0, static_cast<double>(r) / static_cast<double>(n + 1));
  nodes.front() = 1.0;
  nodes.back() = 10.0;
  return Mesh1D(std::move(nodes));
}

inline Mesh1D uniform_mesh_1d(std::size_t n, double a = 0.0, double b = 1.0) {
  if (n == 0 || !(b > a))
    throw ContractViolation("uniform_mesh_1d: need n > 0 and b > a");
  std::vector<double> nodes(n + 1);
  for (std::size_t i = 0; i <= n; ++i)
    nodes[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
  nodes.back() = b;
  return Mesh1D(std::move(nodes));
}

/// Monotone node-spacing map on [0, 1]. Node i of n sits at g(i/n),
/// rescaled so that the endpoints map to the domain ends.
using Grading = std::function<double(double)>;

/// Consecutive element sizes grow by `ratio` (shrink for ratio < 1).
inline Grading geometric_grading(double ratio, std::size_t n) {
  if (!(ratio > 0.0))
    throw ContractViolation("geometric_grading: ratio must be positive");
  if (std::abs(ratio - 1.0) < 1e-14)
    return [](double t) { return t; };
  const double nn = static_cast<double>(n);
  const double denom = std::pow(ratio, nn) - 1.0;
  return [ratio, nn, denom](double t) { return (std::pow(ratio, t * nn) - 1.0) / denom; };
}

/// Two uniform zones: the first `rows_a` of `rows_a + rows_b` intervals
/// cover the leading `fraction_a` of the axis, the rest cover the remainder.
inline Grading two_zone_grading(std::size_t rows_a, std::size_t rows_b, double fraction_a) {
  if (rows_a == 0 || rows_b == 0 || !(fraction_a > 0.0 && fraction_a < 1.0))
    throw ContractViolation("two_zone_grading: need positive row counts and 0 < fraction < 1");
  const double ta = static_cast<double>(rows_a) / static_cast<double>(rows_a + rows_b);
  return [ta, fraction_a](double t) {
    return t <= ta ? fraction_a * t / ta : fraction_a + (1.0 - fraction_a) * (t - ta) / (1.0 - ta);
  };
}

/// Split-quad diagonal layout. `alternating` flips the diagonal on a
/// checkerboard, which makes the mesh mirror-symmetric for even counts.
enum class DiagonalPattern { uniform, alternating };

namespace detail {

inline std::vector<double> graded_nodes(std::size_t n, double length, const Grading& g,
                                        const char* axis) {
  std::vector<double> x(n + 1);
  if (!g) {
    for (std::size_t i = 0; i <= n; ++i)
      x[i] = length * static_cast<double>(i) / static_cast<double>(n);
    return x;
  }
  const double g0 = g(0.0), g1 = g(1.0);
  if (!(g1 > g0))
    throw ContractViolation(std::string("structured_tri_mesh: grading along ") + axis +
                            " is not increasing");
  for (std::size_t i = 0; i <= n; ++i)
    x[i] = length * (g(static_cast<double>(i) / static_cast<double>(n)) - g0) / (g1 - g0);
  x.front() = 0.0;
  x.back() = length;
  for (std::size_t i = 0; i < n; ++i)
    if (!(x[i + 1] > x[i]))
      throw ContractViolation(std::string("structured_tri_mesh: grading along ") + axis +
                              " is not monotone");
  return x;
}

struct EdgeKey {
  std::size_t a, b;
  EdgeKey(std::size_t u, std::size_t v) : a(std::min(u, v)), b(std::max(u, v)) {}
  bool operator<(const EdgeKey& o) const { return a != o.a ? a < o.a : b < o.b; }
};

} // namespace detail

/// Edges that belong to exactly one triangle, with their owning element,
/// oriented as in that element.
struct BoundaryEdge {
  std::size_t a, b, element;
};

inline std::vector<BoundaryEdge> boundary_edges(const Mesh2D& m) {
  std::map<detail::EdgeKey, std::pair<int, BoundaryEdge>> count;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto& t = m.triangles()[e];
    for (int k = 0; k < 3; ++k) {
      const std::size_t u = t[k], v = t[(k + 1) % 3];
      auto& slot = count[detail::EdgeKey(u, v)];
      slot.first += 1;
      slot.second = {u, v, e};
    }
  }
  std::vector<BoundaryEdge> out;
  for (const auto& [key, slot] : count)
    if (slot.first == 1)
      out.push_back(slot.second);
  return out;
}

/// Tag every boundary edge whose midpoint satisfies `pred`.
inline Mesh2D tag_boundary_edges(const Mesh2D& m, const std::string& name,
                                 const std::function<bool(Point2)>& pred) {
  std::vector<std::vector<std::size_t>> ents;
  for (const auto& be : boundary_edges(m)) {
    const auto &p = m.nodes()[be.a], &q = m.nodes()[be.b];
    if (pred({0.5 * (p.x + q.x), 0.5 * (p.y + q.y)}))
      ents.push_back({be.a, be.b});
  }
  return m.with_tag(name, std::move(ents));
}

/// Rectangle [0,width] x [0,height] split into nx*ny quads, two triangles
/// each. Boundary edges get tags `left`, `right`, `bottom`, `top`.
inline Mesh2D structured_tri_mesh(std::size_t nx, std::size_t ny, double width, double height,
                                  const Grading& grade_x = {}, const Grading& grade_y = {},
                                  DiagonalPattern pattern = DiagonalPattern::uniform) {
  if (nx == 0 || ny == 0 || !(width > 0.0) || !(height > 0.0))
    throw ContractViolation("structured_tri_mesh: need positive counts and extents");
  const auto xs = detail::graded_nodes(nx, width, grade_x, "x");
  const auto ys = detail::graded_nodes(ny, height, grade_y, "y");

  std::vector<Point2> nodes;
  nodes.reserve((nx + 1) * (ny + 1));
  for (std::size_t j = 0; j <= ny; ++j)
    for (std::size_t i = 0; i <= nx; ++i)
      nodes.push_back({xs[i], ys[j]});
  auto id = [nx](std::size_t i, std::size_t j) { return j * (nx + 1) + i; };

  std::vector<Triangle> tris;
  tris.reserve(2 * nx * ny);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      const bool flip = pattern == DiagonalPattern::alternating && ((i + j) % 2 == 1);
      if (!flip) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
    }

  TagMap tags;
  for (std::size_t j = 0; j < ny; ++j) {
    tags["left"].push_back({id(0, j), id(0, j + 1)});
    tags["right"].push_back({id(nx, j), id(nx, j + 1)});
  }
  for (std::size_t i = 0; i < nx; ++i) {
    tags["bottom"].push_back({id(i, 0), id(i + 1, 0)});
    tags["top"].push_back({id(i, ny), id(i + 1, ny)});
  }
  return Mesh2D(std::move(nodes), std::move(tris), std::move(tags));
}

// ---------------------------------------------------------------------------
// Refinement

/// Parent element of every child element, plus the two spaces involved.
struct RefinementMap {
  std::vector<std::size_t> parent;
  Measures parent_measures;
  Measures child_measures;
};

template <class MeshT>
struct Refined {
  MeshT mesh;
  RefinementMap map;
};

inline Refined<Mesh1D> refine_uniform(const Mesh1D& m) {
  std::vector<double> nodes;
  nodes.reserve(2 * m.num_nodes() - 1);
  std::vector<std::size_t> parent;
  parent.reserve(2 * m.num_elements());
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    nodes.push_back(m.left(e));
    nodes.push_back(m.midpoint(e));
    parent.push_back(e);
    parent.push_back(e);
  }
  nodes.push_back(m.nodes().back());
  Mesh1D child(std::move(nodes));
  RefinementMap map{std::move(parent), m.measures(), child.measures()};
  return {std::move(child), std::move(map)};
}

/// Red refinement: each triangle into four congruent children via edge
/// midpoints. Tagged edges are split; tagged nodes are kept.
inline Refined<Mesh2D> refine_uniform(const Mesh2D& m) {
  std::vector<Point2> nodes = m.nodes();
  std::map<detail::EdgeKey, std::size_t> mid;
  auto midpoint = [&](std::size_t u, std::size_t v) {
    auto [it, inserted] = mid.try_emplace(detail::EdgeKey(u, v), nodes.size());
    if (inserted) {
      const Point2 p = nodes[u], q = nodes[v];
      nodes.push_back({0.5 * (p.x + q.x), 0.5 * (p.y + q.y)});
    }
    return it->second;
  };

  std::vector<Triangle> tris;
  tris.reserve(4 * m.num_elements());
  std::vector<std::size_t> parent;
  parent.reserve(4 * m.num_elements());
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto [a, b, c] = m.triangles()[e];
    const std::size_t ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    tris.push_back({a, ab, ca});
    tris.push_back({ab, b, bc});
    tris.push_back({ca, bc, c});
    tris.push_back({ab, bc, ca});
    for (int k = 0; k < 4; ++k)
      parent.push_back(e);
  }

  TagMap tags;
  for (const auto& [name, ents] : m.tags()) {
    auto& out = tags[name];
    for (const auto& ent : ents) {
      if (ent.size() == 2) {
        const std::size_t mnode = midpoint(ent[0], ent[1]);
        out.push_back({ent[0], mnode});
        out.push_back({mnode, ent[1]});
      } else {
        out.push_back(ent);
      }
    }
  }
  Mesh2D child(std::move(nodes), std::move(tris), std::move(tags));
  RefinementMap map{std::move(parent), m.measures(), child.measures()};
  return {std::move(child), std::move(map)};
}

/// Exact injection of a parent-mesh field into the refined space.
inline PrimalField project_field(const PrimalField& u, const RefinementMap& map) {
  if (u.measures() != map.parent_measures)
    throw ContractViolation("project_field: field is not on the parent mesh");
  PrimalField out(map.child_measures);
  for (std::size_t c = 0; c < map.parent.size(); ++c)
    out[c] = u[map.parent[c]];
  return out;
}

// ---------------------------------------------------------------------------
// Point location

/// Bucket-grid locator over triangle bounding boxes.
class PointLocator {
public:
  explicit PointLocator(const Mesh2D& mesh) : mesh_(&mesh) {
    const auto& nodes = mesh.nodes();
    lo_ = hi_ = nodes.front();
    for (const auto& p : nodes) {
      lo_.x = std::min(lo_.x, p.x);
      lo_.y = std::min(lo_.y, p.y);
      hi_.x = std::max(hi_.x, p.x);
      hi_.y = std::max(hi_.y, p.y);
    }
    const auto n = static_cast<double>(mesh.num_elements());
    const double aspect = (hi_.x - lo_.x) / std::max(hi_.y - lo_.y, 1e-300);
    nx_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(n * aspect)));
    ny_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(n / aspect)));
    buckets_.resize(nx_ * ny_);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
      Point2 bl = nodes[mesh.triangles()[e][0]], tr = bl;
      for (auto v : mesh.triangles()[e]) {
        bl.x = std::min(bl.x, nodes[v].x);
        bl.y = std::min(bl.y, nodes[v].y);
        tr.x = std::max(tr.x, nodes[v].x);
        tr.y = std::max(tr.y, nodes[v].y);
      }
      const auto [i0, j0] = cell(bl);
      const auto [i1, j1] = cell(tr);
      for (std::size_t j = j0; j <= j1; ++j)
        for (std::size_t i = i0; i <= i1; ++i)
          buckets_[j * nx_ + i].push_back(e);
    }
  }

  /// Element containing p (boundary points belong to some adjacent element).
  [[nodiscard]] std::optional<std::size_t> locate(Point2 p) const {
    const auto [i, j] = cell(p);
    const auto& nodes = mesh_->nodes();
    std::optional<std::size_t> best;
    double best_score = -1e300;
    for (auto e : buckets_[j * nx_ + i]) {
      const auto& t = mesh_->triangles()[e];
      const double area = signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
      const double l0 = signed_area(p, nodes[t[1]], nodes[t[2]]) / area;
      const double l1 = signed_area(nodes[t[0]], p, nodes[t[2]]) / area;
      const double l2 = 1.0 - l0 - l1;
      const double score = std::min({l0, l1, l2});
      if (score > best_score) {
        best_score = score;
        best = e;
      }
    }
    if (best && best_score >= -1e-12)
      return best;
    return std::nullopt;
  }

private:
  [[nodiscard]] std::pair<std::size_t, std::size_t> cell(Point2 p) const {
    auto clampi = [](double t, std::size_t n) {
      const double c = std::floor(t * static_cast<double>(n));
      if (c < 0.0)
        return std::size_t{0};
      return std::min(n - 1, static_cast<std::size_t>(c));
    };
    return {clampi((p.x - lo_.x) / std::max(hi_.x - lo_.x, 1e-300), nx_),
            clampi((p.y - lo_.y) / std::max(hi_.y - lo_.y, 1e-300), ny_)};
  }

  const Mesh2D* mesh_;
  Point2 lo_, hi_;
  std::size_t nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

// ---------------------------------------------------------------------------
// Cross-mesh comparison

/// L2 distance between element-wise uniform fields on two meshes of the same
/// domain. Integration runs over the finer mesh with four sub-element
/// sample points per element (sub-interval midpoints in 1-D, red-refinement
/// child centroids in 2-D), so nested meshes give the exact value.
inline double l2_distance(const Mesh1D& ma, const PrimalField& a, const Mesh1D& mb,
                          const PrimalField& b) {
  if (a.measures() != ma.measures() || b.measures() != mb.measures())
    throw ContractViolation("l2_distance: field/mesh mismatch");
  const bool a_fine = ma.num_elements() >= mb.num_elements();
  const Mesh1D& fine = a_fine ? ma : mb;
  const Mesh1D& coarse = a_fine ? mb : ma;
  const PrimalField& uf = a_fine ? a : b;
  const PrimalField& uc = a_fine ? b : a;
  if (std::abs(fine.measures()->total() - coarse.measures()->total()) >
      1e-12 * coarse.measures()->total())
    throw ContractViolation("l2_distance: meshes cover different domains");
  CompensatedSum s;
  for (std::size_t e = 0; e < fine.num_elements(); ++e) {
    const double h = fine.right(e) - fine.left(e);
    for (int k = 0; k < 4; ++k) {
      const double x = fine.left(e) + (k + 0.5) * h / 4.0;
      const auto c = coarse.locate(x);
      if (!c)
        throw ContractViolation("l2_distance: meshes cover different domains");
      const double d = uf[e] - uc[*c];
      s += 0.25 * h * d * d;
    }
  }
  return std::sqrt(s.value());
}

inline double l2_distance(const Mesh2D& ma, const PrimalField& a, const Mesh2D& mb,
                          const PrimalField& b) {
  if (a.measures() != ma.measures() || b.measures() != mb.measures())
    throw ContractViolation("l2_distance: field/mesh mismatch");
  const bool a_fine = ma.num_elements() >= mb.num_elements();
  const Mesh2D& fine = a_fine ? ma : mb;
  const Mesh2D& coarse = a_fine ? mb : ma;
  const PrimalField& uf = a_fine ? a : b;
  const PrimalField& uc = a_fine ? b : a;
  if (std::abs(fine.measures()->total() - coarse.measures()->total()) >
      1e-12 * coarse.measures()->total())
    throw ContractViolation("l2_distance: meshes cover different domains");
  const PointLocator locator(coarse);
  // Child centroids of the red refinement in barycentric coordinates.
  static constexpr std::array<std::array<double, 3>, 4> samples{{
      {4.0 / 6, 1.0 / 6, 1.0 / 6},
      {1.0 / 6, 4.0 / 6, 1.0 / 6},
      {1.0 / 6, 1.0 / 6, 4.0 / 6},
      {2.0 / 6, 2.0 / 6, 2.0 / 6},
  }};
  CompensatedSum s;
  for (std::size_t e = 0; e < fine.num_elements(); ++e) {
    const auto& t = fine.triangles()[e];
    const auto &p0 = fine.nodes()[t[0]], &p1 = fine.nodes()[t[1]], &p2 = fine.nodes()[t[2]];
    for (const auto& w : samples) {
      const Point2 p{w[0] * p0.x + w[1] * p1.x + w[2] * p2.x,
                     w[0] * p0.y + w[1] * p1.y + w[2] * p2.y};
      const auto c = locator.locate(p);
      if (!c)
        throw ContractViolation("l2_distance: meshes cover different domains");
      const double d = uf[e] - uc[*c];
      s += 0.25 * fine.measures()->operator[](e) * d * d;
    }
  }
  return std::sqrt(s.value());
}

} // namespace gcmma
