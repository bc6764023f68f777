#pragma once

// Steepest descent on theta(nu) = 1/2 (nu, c nu) - (nu, b) in R^n and in L2.
//
// With one-point quadrature per element, H = diag(c(x_e) |Omega_e|) and the
// derivative is H nu - M b. The R^n iteration steps along the derivative
// with exact line search; the L2 iteration steps along the gradient
// M^-1 H nu - b, for which the exact step length is 1.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "gcmma/errors.hpp"
#include "gcmma/fspace.hpp"
#include "gcmma/mesh.hpp"

namespace gcmma::descent {

struct QuadraticProblem {
  Measures measures;
  std::vector<double> points; ///< quadrature point per element
  std::vector<double> c;      ///< c at the quadrature points
  std::vector<double> b;      ///< b at the quadrature points
  std::vector<double> hess;   ///< H_ee = c_e |Omega_e|
  std::vector<double> mb;     ///< (M b)_e = b_e |Omega_e|

  [[nodiscard]] std::size_t size() const noexcept { return c.size(); }

  /// Exact discrete minimizer b / c.
  [[nodiscard]] std::vector<double> solution() const {
    std::vector<double> s(size());
    for (std::size_t e = 0; e < size(); ++e)
      s[e] = b[e] / c[e];
    return s;
  }

  [[nodiscard]] double objective(const std::vector<double>& nu) const {
    CompensatedSum s;
    for (std::size_t e = 0; e < size(); ++e)
      s += 0.5 * nu[e] * hess[e] * nu[e] - nu[e] * mb[e];
    return s.value();
  }
};

inline double default_c(double x) { return std::sin(x / 4.0); }
inline double default_b(double x) { return x; }

/// One-point (midpoint) quadrature on every element.
inline QuadraticProblem assemble_quadratic(const Mesh1D& mesh,
                                           const std::function<double(double)>& c = default_c,
                                           const std::function<double(double)>& b = default_b) {
  QuadraticProblem p;
  p.measures = mesh.measures();
  const std::size_t n = mesh.num_elements();
  p.points.resize(n);
  p.c.resize(n);
  p.b.resize(n);
  p.hess.resize(n);
  p.mb.resize(n);
  for (std::size_t e = 0; e < n; ++e) {
    const double x = mesh.midpoint(e);
    const double h = (*p.measures)[e];
    p.points[e] = x;
    p.c[e] = c(x);
    p.b[e] = b(x);
    if (!(p.c[e] > 0.0))
      throw ContractViolation("assemble_quadratic: c must be positive at every quadrature point");
    p.hess[e] = p.c[e] * h;
    p.mb[e] = p.b[e] * h;
  }
  return p;
}

struct HistoryEntry {
  std::size_t iter;
  double error;
};

struct History {
  std::vector<HistoryEntry> entries; ///< entry 0 is the initial guess
  std::vector<double> nu;            ///< final iterate
  bool converged = false;

  /// Number of updates taken.
  [[nodiscard]] std::size_t iterations() const noexcept {
    return entries.empty() ? 0 : entries.back().iter;
  }
};

inline constexpr std::size_t kDefaultMaxIter = 1'000'000;

/// Fixed point nu <- nu - gamma (H nu - M b), gamma = g.g / g.Hg.
/// Error is the Euclidean distance to b/c.
inline History run_rn(const QuadraticProblem& p, double tol, std::size_t max_iter = kDefaultMaxIter) {
  if (!(tol > 0.0))
    throw ContractViolation("run_rn: tol must be positive");
  const auto exact = p.solution();
  const std::size_t n = p.size();
  History h;
  h.nu.assign(n, 0.0);
  std::vector<double> g(n);
  auto error = [&] {
    CompensatedSum s;
    for (std::size_t e = 0; e < n; ++e)
      s += (h.nu[e] - exact[e]) * (h.nu[e] - exact[e]);
    return std::sqrt(s.value());
  };
  for (std::size_t it = 0;; ++it) {
    const double err = error();
    h.entries.push_back({it, err});
    if (err <= tol) {
      h.converged = true;
      return h;
    }
    if (it == max_iter)
      return h;
    CompensatedSum gg, ghg;
    for (std::size_t e = 0; e < n; ++e) {
      g[e] = p.hess[e] * h.nu[e] - p.mb[e];
      gg += g[e] * g[e];
      ghg += g[e] * p.hess[e] * g[e];
    }
    if (!(ghg.value() > 0.0))
      throw DegenerateCurvature("run_rn: g^T H g vanished with nonzero g at iteration " +
                                std::to_string(it));
    const double gamma = gg.value() / ghg.value();
    for (std::size_t e = 0; e < n; ++e)
      h.nu[e] -= gamma * g[e];
  }
}

/// Fixed point nu <- nu - (c nu - b). Error is ||nu - b/c||_{L2}.
inline History run_l2(const QuadraticProblem& p, double tol, std::size_t max_iter = kDefaultMaxIter) {
  if (!(tol > 0.0))
    throw ContractViolation("run_l2: tol must be positive");
  const auto exact = p.solution();
  const std::size_t n = p.size();
  History h;
  h.nu.assign(n, 0.0);
  auto error = [&] {
    CompensatedSum s;
    for (std::size_t e = 0; e < n; ++e)
      s += (h.nu[e] - exact[e]) * (*p.measures)[e] * (h.nu[e] - exact[e]);
    return std::sqrt(s.value());
  };
  for (std::size_t it = 0;; ++it) {
    const double err = error();
    h.entries.push_back({it, err});
    if (err <= tol) {
      h.converged = true;
      return h;
    }
    if (it == max_iter)
      return h;
    for (std::size_t e = 0; e < n; ++e)
      h.nu[e] -= p.c[e] * h.nu[e] - p.b[e];
  }
}

/// Mesh with n design variables for the log-spaced benchmark:
/// nodes 10^(r/n), r = 0..n.
inline Mesh1D benchmark_mesh(std::size_t n) {
  if (n == 0)
    throw ContractViolation("benchmark_mesh: n must be positive");
  return n == 1 ? Mesh1D({1.0, 10.0}) : log_mesh_1d(n - 1);
}

} // namespace gcmma::descent
