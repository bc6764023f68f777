#pragma once

// 2-D linear elasticity compliance testbed on linear triangles: SIMP
// interpolation, a cell-centred finite-volume Helmholtz filter, and
// adjoint derivatives of compliance and filtered volume.

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "gcmma/errors.hpp"
#include "gcmma/fspace.hpp"
#include "gcmma/gcmma.hpp"
#include "gcmma/mesh.hpp"

namespace gcmma::fem {

struct ElasticModel {
  double young = 1.0;
  double poisson = 0.3;
  bool plane_stress = true;
  double simp_floor = 1e-5;
  double simp_exponent = 3.0;

  void validate() const {
    if (!(simp_floor > 0.0 && simp_floor < 1.0))
      throw ContractViolation("ElasticModel: SIMP floor must lie in (0, 1)");
    if (!(simp_exponent >= 1.0))
      throw ContractViolation("ElasticModel: SIMP exponent must be >= 1");
  }

  /// r(x) = floor + (1 - floor) x^p
  [[nodiscard]] double simp(double x) const {
    return simp_floor + (1.0 - simp_floor) * std::pow(x, simp_exponent);
  }
  [[nodiscard]] double simp_derivative(double x) const {
    return (1.0 - simp_floor) * simp_exponent * std::pow(x, simp_exponent - 1.0);
  }

  [[nodiscard]] Eigen::Matrix3d constitutive() const {
    Eigen::Matrix3d d = Eigen::Matrix3d::Zero();
    const double nu = poisson;
    if (plane_stress) {
      const double f = young / (1.0 - nu * nu);
      d << f, f * nu, 0.0, f * nu, f, 0.0, 0.0, 0.0, f * (1.0 - nu) / 2.0;
    } else {
      const double f = young / ((1.0 + nu) * (1.0 - 2.0 * nu));
      d << f * (1.0 - nu), f * nu, 0.0, f * nu, f * (1.0 - nu), 0.0, 0.0, 0.0,
          f * (1.0 - 2.0 * nu) / 2.0;
    }
    return d;
  }
};

struct FilterConfig {
  double kappa = 0.0; ///< length^2
};

struct LoadCase {
  std::string dirichlet_tag = "left";
  std::string traction_tag = "load";
  Point2 traction{0.0, -1.0};
  Point2 prescribed{0.0, 0.0}; ///< displacement imposed on the Dirichlet nodes
};

// ---------------------------------------------------------------------------
// Helmholtz filter

/// Solves  |Omega_e| nh_e + kappa sum_f T_ef (nh_e - nh_f) = |Omega_e| nu_e
/// with two-point fluxes T_ef = |edge| / |c_e - c_f| over interior edges and
/// no flux through the boundary. The map nu -> nh is self-adjoint in the
/// mass inner product.
class HelmholtzFilter {
public:
  HelmholtzFilter(const Mesh2D& mesh, FilterConfig cfg) : measures_(mesh.measures()), cfg_(cfg) {
    if (cfg_.kappa < 0.0)
      throw ContractViolation("HelmholtzFilter: kappa must be non-negative");
    if (cfg_.kappa == 0.0)
      return;
    const std::size_t n = mesh.num_elements();
    std::map<detail::EdgeKey, std::vector<std::size_t>> owners;
    for (std::size_t e = 0; e < n; ++e) {
      const auto& t = mesh.triangles()[e];
      for (int k = 0; k < 3; ++k)
        owners[detail::EdgeKey(t[k], t[(k + 1) % 3])].push_back(e);
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n + 4 * owners.size());
    for (std::size_t e = 0; e < n; ++e)
      trip.emplace_back(static_cast<int>(e), static_cast<int>(e), (*measures_)[e]);
    for (const auto& [edge, own] : owners) {
      if (own.size() != 2)
        continue;
      const auto &p = mesh.nodes()[edge.a], &q = mesh.nodes()[edge.b];
      const Point2 c0 = mesh.centroid(own[0]), c1 = mesh.centroid(own[1]);
      const double len = std::hypot(q.x - p.x, q.y - p.y);
      const double dist = std::hypot(c1.x - c0.x, c1.y - c0.y);
      const double t = cfg_.kappa * len / dist;
      const int a = static_cast<int>(own[0]), b = static_cast<int>(own[1]);
      trip.emplace_back(a, a, t);
      trip.emplace_back(b, b, t);
      trip.emplace_back(a, b, -t);
      trip.emplace_back(b, a, -t);
    }
    Eigen::SparseMatrix<double> a(static_cast<int>(n), static_cast<int>(n));
    a.setFromTriplets(trip.begin(), trip.end());
    solver_ = std::make_shared<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>(a);
    if (solver_->info() != Eigen::Success)
      throw SingularSystem("HelmholtzFilter: factorization failed");
  }

  [[nodiscard]] const Measures& measures() const noexcept { return measures_; }

  [[nodiscard]] PrimalField apply(const PrimalField& nu) const {
    if (nu.measures() != measures_)
      throw ContractViolation("HelmholtzFilter: field is not on the filter mesh");
    if (!solver_)
      return nu;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(nu.size()));
    for (std::size_t e = 0; e < nu.size(); ++e)
      rhs(static_cast<Eigen::Index>(e)) = (*measures_)[e] * nu[e];
    const Eigen::VectorXd x = solver_->solve(rhs);
    PrimalField out(measures_);
    for (std::size_t e = 0; e < nu.size(); ++e)
      out[e] = x(static_cast<Eigen::Index>(e));
    return out;
  }

  /// Transpose of the coefficient map, for chaining derivatives:
  /// D(theta o filter) = M filter(M^-1 D theta).
  [[nodiscard]] DualField apply_transpose(const DualField& d) const {
    return riesz_forward(apply(riesz_inverse(d)));
  }

private:
  Measures measures_;
  FilterConfig cfg_;
  std::shared_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> solver_;
};

inline PrimalField helmholtz_filter(const PrimalField& nu, const FilterConfig& cfg,
                                    const Mesh2D& mesh) {
  return HelmholtzFilter(mesh, cfg).apply(nu);
}

// ---------------------------------------------------------------------------
// Elasticity

/// Unit-stiffness element matrix of a linear triangle (unit thickness).
inline Eigen::Matrix<double, 6, 6> triangle_stiffness(const Point2& p0, const Point2& p1,
                                                      const Point2& p2, const Eigen::Matrix3d& d) {
  const double area = signed_area(p0, p1, p2);
  Eigen::Matrix<double, 3, 6> b;
  const double y23 = p1.y - p2.y, y31 = p2.y - p0.y, y12 = p0.y - p1.y;
  const double x32 = p2.x - p1.x, x13 = p0.x - p2.x, x21 = p1.x - p0.x;
  b << y23, 0, y31, 0, y12, 0, 0, x32, 0, x13, 0, x21, x32, y23, x13, y31, x21, y12;
  b /= 2.0 * area;
  return area * b.transpose() * d * b;
}

/// Displacement field with its strain energy.
struct Displacement {
  std::vector<double> u; ///< interleaved (ux, uy) per node
  double compliance = 0.0;
};

/// Linear elasticity on a fixed mesh and load case; element stiffness is
/// scaled by r(nh_e). The sparsity pattern is analysed once.
class ElasticitySolver {
public:
  ElasticitySolver(const Mesh2D& mesh, ElasticModel model, LoadCase load)
      : mesh_(mesh), model_(model), load_(std::move(load)) {
    model_.validate();
    const auto d = model_.constitutive();
    const std::size_t n = mesh_.num_elements();
    ke_.reserve(n);
    for (const auto& t : mesh_.triangles())
      ke_.push_back(triangle_stiffness(mesh_.nodes()[t[0]], mesh_.nodes()[t[1]],
                                       mesh_.nodes()[t[2]], d));

    const std::size_t ndof = 2 * mesh_.num_nodes();
    fixed_.assign(ndof, false);
    const auto fixed_nodes = mesh_.tag_nodes(load_.dirichlet_tag);
    if (fixed_nodes.empty())
      throw SingularSystem("ElasticitySolver: Dirichlet tag '" + load_.dirichlet_tag +
                           "' is empty; the stiffness matrix would be singular");
    for (auto v : fixed_nodes)
      fixed_[2 * v] = fixed_[2 * v + 1] = true;
    free_index_.assign(ndof, -1);
    int nfree = 0;
    for (std::size_t i = 0; i < ndof; ++i)
      if (!fixed_[i])
        free_index_[i] = nfree++;
    nfree_ = nfree;

    load_vec_.assign(ndof, 0.0);
    const auto& pts = mesh_.nodes();
    for (const auto& ent : mesh_.tag(load_.traction_tag)) {
      if (ent.size() != 2)
        continue;
      const double len = std::hypot(pts[ent[1]].x - pts[ent[0]].x, pts[ent[1]].y - pts[ent[0]].y);
      for (auto v : ent) {
        load_vec_[2 * v] += 0.5 * len * load_.traction.x;
        load_vec_[2 * v + 1] += 0.5 * len * load_.traction.y;
      }
    }
    prescribed_.assign(ndof, 0.0);
    for (auto v : fixed_nodes) {
      prescribed_[2 * v] = load_.prescribed.x;
      prescribed_[2 * v + 1] = load_.prescribed.y;
    }
  }

  [[nodiscard]] const Mesh2D& mesh() const noexcept { return mesh_; }
  [[nodiscard]] const ElasticModel& model() const noexcept { return model_; }
  [[nodiscard]] const std::vector<double>& load_vector() const noexcept { return load_vec_; }
  [[nodiscard]] const Eigen::Matrix<double, 6, 6>& element_matrix(std::size_t e) const {
    return ke_[e];
  }

  /// Global stiffness with all DOFs, for diagnostics.
  [[nodiscard]] Eigen::SparseMatrix<double> full_stiffness(const PrimalField& nu_hat) const {
    const auto ndof = static_cast<int>(2 * mesh_.num_nodes());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(36 * mesh_.num_elements());
    for (std::size_t e = 0; e < mesh_.num_elements(); ++e) {
      const auto dofs = element_dofs(e);
      const double r = model_.simp(nu_hat[e]);
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b)
          trip.emplace_back(dofs[a], dofs[b], r * ke_[e](a, b));
    }
    Eigen::SparseMatrix<double> k(ndof, ndof);
    k.setFromTriplets(trip.begin(), trip.end());
    return k;
  }

  [[nodiscard]] Displacement solve(const PrimalField& nu_hat) {
    if (nu_hat.measures() != mesh_.measures())
      throw ContractViolation("ElasticitySolver: field is not on the mesh");
    for (std::size_t e = 0; e < nu_hat.size(); ++e)
      if (nu_hat[e] < 0.0 || nu_hat[e] > 1.0)
        throw DomainError("ElasticitySolver: filtered design outside [0, 1] at element " +
                          std::to_string(e));
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(36 * mesh_.num_elements());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree_);
    for (std::size_t i = 0; i < free_index_.size(); ++i)
      if (free_index_[i] >= 0)
        rhs(free_index_[i]) = load_vec_[i];
    for (std::size_t e = 0; e < mesh_.num_elements(); ++e) {
      const auto dofs = element_dofs(e);
      const double r = model_.simp(nu_hat[e]);
      for (int a = 0; a < 6; ++a) {
        const int ia = free_index_[dofs[a]];
        if (ia < 0)
          continue;
        for (int b = 0; b < 6; ++b) {
          const int ib = free_index_[dofs[b]];
          const double kab = r * ke_[e](a, b);
          if (ib >= 0)
            trip.emplace_back(ia, ib, kab);
          else
            rhs(ia) -= kab * prescribed_[dofs[b]];
        }
      }
    }
    Eigen::SparseMatrix<double> k(nfree_, nfree_);
    k.setFromTriplets(trip.begin(), trip.end());
    if (!analysed_) {
      chol_.analyzePattern(k);
      analysed_ = true;
    }
    chol_.factorize(k);
    if (chol_.info() != Eigen::Success)
      throw SingularSystem("ElasticitySolver: stiffness factorization failed");
    const Eigen::VectorXd x = chol_.solve(rhs);

    Displacement out;
    out.u = prescribed_;
    for (std::size_t i = 0; i < free_index_.size(); ++i)
      if (free_index_[i] >= 0)
        out.u[i] = x(free_index_[i]);
    CompensatedSum c;
    for (std::size_t i = 0; i < out.u.size(); ++i)
      c += load_vec_[i] * out.u[i];
    out.compliance = c.value();
    return out;
  }

  /// u_e^T k_e u_e with the unit-stiffness element matrix.
  [[nodiscard]] double element_energy(std::size_t e, const std::vector<double>& u) const {
    const auto dofs = element_dofs(e);
    Eigen::Matrix<double, 6, 1> ue;
    for (int a = 0; a < 6; ++a)
      ue(a) = u[dofs[a]];
    return ue.dot(ke_[e] * ue);
  }

  /// u^T K u over all DOFs.
  [[nodiscard]] double strain_energy(const PrimalField& nu_hat, const std::vector<double>& u) const {
    CompensatedSum s;
    for (std::size_t e = 0; e < mesh_.num_elements(); ++e)
      s += model_.simp(nu_hat[e]) * element_energy(e, u);
    return s.value();
  }

private:
  [[nodiscard]] std::array<int, 6> element_dofs(std::size_t e) const {
    const auto& t = mesh_.triangles()[e];
    return {static_cast<int>(2 * t[0]), static_cast<int>(2 * t[0] + 1),
            static_cast<int>(2 * t[1]), static_cast<int>(2 * t[1] + 1),
            static_cast<int>(2 * t[2]), static_cast<int>(2 * t[2] + 1)};
  }

  Mesh2D mesh_;
  ElasticModel model_;
  LoadCase load_;
  std::vector<Eigen::Matrix<double, 6, 6>> ke_;
  std::vector<bool> fixed_;
  std::vector<int> free_index_;
  int nfree_ = 0;
  std::vector<double> load_vec_;
  std::vector<double> prescribed_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol_;
  bool analysed_ = false;
};

inline Displacement assemble_and_solve(const PrimalField& nu_hat, const ElasticModel& model,
                                       const LoadCase& load, const Mesh2D& mesh) {
  ElasticitySolver solver(mesh, model, load);
  return solver.solve(nu_hat);
}

// ---------------------------------------------------------------------------
// Functionals

struct FunctionalValue {
  double value;
  DualField derivative;
};

/// Compliance and its derivative with respect to the unfiltered design.
/// Compliance is self-adjoint, so the adjoint state is u itself.
class ComplianceFunctional {
public:
  ComplianceFunctional(const Mesh2D& mesh, ElasticModel model, LoadCase load, FilterConfig cfg)
      : filter_(mesh, cfg), solver_(mesh, model, std::move(load)) {}

  [[nodiscard]] const HelmholtzFilter& filter() const noexcept { return filter_; }
  [[nodiscard]] ElasticitySolver& solver() noexcept { return solver_; }

  FunctionalValue operator()(const PrimalField& nu) {
    const PrimalField nu_hat = filter_.apply(nu);
    const Displacement disp = solver_.solve(nu_hat);
    DualField d_hat(nu.measures());
    for (std::size_t e = 0; e < nu.size(); ++e)
      d_hat[e] = -solver_.model().simp_derivative(nu_hat[e]) * solver_.element_energy(e, disp.u);
    return {disp.compliance, filter_.apply_transpose(d_hat)};
  }

private:
  HelmholtzFilter filter_;
  ElasticitySolver solver_;
};

inline FunctionalValue compliance_and_derivative(const PrimalField& nu, const ElasticModel& model,
                                                 const LoadCase& load, const FilterConfig& cfg,
                                                 const Mesh2D& mesh) {
  ComplianceFunctional f(mesh, model, load, cfg);
  return f(nu);
}

/// theta_1 = int nh dV - fraction |D|.
inline FunctionalValue volume_and_derivative(const PrimalField& nu, const HelmholtzFilter& filter,
                                             double fraction) {
  const PrimalField nu_hat = filter.apply(nu);
  const double vol = integrate(nu_hat) - fraction * nu.measures()->total();
  DualField w(nu.measures());
  for (std::size_t e = 0; e < nu.size(); ++e)
    w[e] = nu.measure(e);
  return {vol, filter.apply_transpose(w)};
}

inline FunctionalValue volume_and_derivative(const PrimalField& nu, const FilterConfig& cfg,
                                             const Mesh2D& mesh, double fraction) {
  return volume_and_derivative(nu, HelmholtzFilter(mesh, cfg), fraction);
}

/// Compliance minimisation under a filtered volume bound, 0 <= nu <= 1.
inline OptimizationProblem compliance_problem(const Mesh2D& mesh, ElasticModel model, LoadCase load,
                                              FilterConfig cfg, double fraction) {
  auto functional = std::make_shared<ComplianceFunctional>(mesh, model, std::move(load), cfg);
  OptimizationProblem prob;
  prob.measures = mesh.measures();
  prob.nu_min = PrimalField(prob.measures, 0.0);
  prob.nu_max = PrimalField(prob.measures, 1.0);
  prob.num_constraints = 1;
  prob.evaluate = [functional, fraction](const PrimalField& nu) {
    auto c = (*functional)(nu);
    auto v = volume_and_derivative(nu, functional->filter(), fraction);
    Evaluation ev;
    ev.values = {c.value, v.value};
    ev.derivatives.push_back(std::move(c.derivative));
    ev.derivatives.push_back(std::move(v.derivative));
    return ev;
  };
  return prob;
}

/// Cantilever boundary set-up on a [0,width] x [0,height] mesh: the traction
/// tag `load` covers right-edge boundary edges within `band` of mid-height.
inline Mesh2D tag_cantilever_load(const Mesh2D& mesh, double width, double height, double band) {
  return tag_boundary_edges(mesh, "load", [=](Point2 p) {
    return std::abs(p.x - width) < 1e-9 * width &&
           std::abs(p.y - 0.5 * height) <= 0.5 * band + 1e-9 * height;
  });
}

/// Rectangle clamped on `left` and loaded on a centred band of the right
/// edge. With fine_rows > 0, `ny` rows cover the lower part and `fine_rows`
/// rows a strip of `fine_height` along the top.
struct CantileverSpec {
  std::size_t nx = 50;
  std::size_t ny = 20;
  double width = 100.0;
  double height = 40.0;
  double load_band = 8.0;
  std::size_t fine_rows = 0;
  double fine_height = 0.0;
};

inline Mesh2D cantilever_mesh(const CantileverSpec& s) {
  Grading gy;
  std::size_t rows = s.ny;
  if (s.fine_rows > 0) {
    if (!(s.fine_height > 0.0 && s.fine_height < s.height))
      throw ContractViolation("cantilever_mesh: fine strip height must lie in (0, height)");
    gy = two_zone_grading(s.ny, s.fine_rows, 1.0 - s.fine_height / s.height);
    rows += s.fine_rows;
  }
  auto mesh = tag_cantilever_load(structured_tri_mesh(s.nx, rows, s.width, s.height, {}, gy),
                                  s.width, s.height, s.load_band);
  if (mesh.tag("load").empty())
    throw ContractViolation("cantilever_mesh: load band contains no boundary edge");
  return mesh;
}

/// Keeps the filter length scale fixed relative to the element size:
/// kappa scales with h^2.
inline double scale_kappa(double kappa_ref, double h_ref, double h) {
  return kappa_ref * (h / h_ref) * (h / h_ref);
}

} // namespace gcmma::fem
