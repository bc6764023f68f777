#pragma once

// Pieces of one GCMMA outer iteration that act element by element:
// moving asymptotes, subproblem bounds, the separable convex approximation,
// the conservativeness parameters rho, and the outer KKT metric.
//
// Every field here lives in the optimizer's working space. In L2 mode that
// is the mesh space (integrals are mass-weighted); in R^n mode it is the
// identity-metric space of the same dimension, which recovers the classical
// summation-based algorithm.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gcmma/errors.hpp"
#include "gcmma/fspace.hpp"

namespace gcmma {

/// Parameters of the augmented problem
///   min theta_0 + a0 z + sum_i (c_i y_i + d_i y_i^2 / 2)
///   s.t. theta_i - a_i z - y_i <= 0,  y >= 0,  z >= 0.
struct AugmentedParams {
  double a0 = 1.0;
  std::vector<double> a;
  std::vector<double> c;
  std::vector<double> d;

  [[nodiscard]] std::size_t num_constraints() const noexcept { return c.size(); }

  static AugmentedParams defaults(std::size_t m) {
    return {1.0, std::vector<double>(m, 0.0), std::vector<double>(m, 10000.0),
            std::vector<double>(m, 0.0)};
  }

  void validate() const {
    const std::size_t m = c.size();
    if (a.size() != m || d.size() != m)
      throw ContractViolation("AugmentedParams: a, c, d must all have m entries");
    if (!(a0 > 0.0))
      throw ContractViolation("AugmentedParams: a0 must be positive");
    for (std::size_t i = 0; i < m; ++i)
      if (a[i] < 0.0 || c[i] < 0.0 || d[i] < 0.0 || !(c[i] + d[i] > 0.0))
        throw ContractViolation("AugmentedParams: need a_i, c_i, d_i >= 0 and c_i + d_i > 0");
  }
};

inline double ramp_pos(double a) { return std::max(0.0, a); }
inline double ramp_neg(double a) { return std::max(0.0, -a); }

/// Measures the optimizer integrates against for a given mode.
inline Measures working_measures(const Measures& mesh, SpaceMode mode) {
  return mode == SpaceMode::l2 ? mesh : unit_measures(mesh->size());
}

/// Gradient consumed by the approximation. L2: M^-1 D theta. R^n: the
/// derivative coefficients themselves.
inline PrimalField to_gradient(const DualField& derivative, SpaceMode mode, const Measures& working) {
  if (derivative.size() != working->size())
    throw ContractViolation("to_gradient: derivative has wrong length");
  if (mode == SpaceMode::l2) {
    if (derivative.measures() != working)
      throw ContractViolation("to_gradient: L2 mode needs the derivative on the working mesh");
    return riesz_inverse(derivative);
  }
  return PrimalField(working, derivative.values());
}

// ---------------------------------------------------------------------------
// Asymptotes and move limits

struct Asymptotes {
  PrimalField lower;
  PrimalField upper;
};

/// What the asymptote rule needs from earlier outer iterations.
struct AsymptoteState {
  std::optional<PrimalField> lower;    ///< L^(k-1)
  std::optional<PrimalField> upper;    ///< U^(k-1)
  std::optional<PrimalField> previous; ///< nu^(k-1)
  std::optional<PrimalField> before;   ///< nu^(k-2)

  /// Shift after accepting outer iterate k.
  void push(const PrimalField& nu_k, const Asymptotes& lu) {
    before = std::move(previous);
    previous = nu_k;
    lower = lu.lower;
    upper = lu.upper;
  }
};

/// Oscillation factor for one element; the product is compared with 0 exactly.
inline double asymptote_gamma(double now, double prev, double before) {
  const double prod = (now - prev) * (prev - before);
  if (prod < 0.0)
    return 0.7;
  if (prod > 0.0)
    return 1.2;
  return 1.0;
}

inline Asymptotes update_asymptotes(std::size_t k, const PrimalField& nu,
                                    const AsymptoteState& state, const PrimalField& nu_min,
                                    const PrimalField& nu_max) {
  if (k == 0)
    throw ContractViolation("update_asymptotes: outer iterations are counted from 1");
  detail::require_same_space(nu, nu_min, "update_asymptotes");
  detail::require_same_space(nu, nu_max, "update_asymptotes");
  const std::size_t n = nu.size();
  Asymptotes out{PrimalField(nu.measures()), PrimalField(nu.measures())};
  if (k <= 2) {
    for (std::size_t e = 0; e < n; ++e) {
      const double range = nu_max[e] - nu_min[e];
      out.lower[e] = nu[e] - 0.5 * range;
      out.upper[e] = nu[e] + 0.5 * range;
    }
    return out;
  }
  if (!state.lower || !state.upper || !state.previous || !state.before)
    throw ContractViolation("update_asymptotes: iteration " + std::to_string(k) +
                            " needs two previous iterates and asymptotes");
  const auto &lo = *state.lower, &up = *state.upper, &prev = *state.previous, &bef = *state.before;
  detail::require_same_space(nu, lo, "update_asymptotes");
  detail::require_same_space(nu, prev, "update_asymptotes");
  for (std::size_t e = 0; e < n; ++e) {
    const double range = nu_max[e] - nu_min[e];
    const double gamma = asymptote_gamma(nu[e], prev[e], bef[e]);
    double l = nu[e] - gamma * (prev[e] - lo[e]);
    double u = nu[e] + gamma * (up[e] - prev[e]);
    l = std::clamp(l, nu[e] - 10.0 * range, nu[e] - 0.01 * range);
    u = std::clamp(u, nu[e] + 0.01 * range, nu[e] + 10.0 * range);
    out.lower[e] = l;
    out.upper[e] = u;
  }
  return out;
}

struct MoveLimits {
  PrimalField alpha;
  PrimalField beta;
};

inline MoveLimits subproblem_bounds(const PrimalField& nu, const Asymptotes& lu,
                                    const PrimalField& nu_min, const PrimalField& nu_max) {
  detail::require_same_space(nu, lu.lower, "subproblem_bounds");
  detail::require_same_space(nu, nu_min, "subproblem_bounds");
  MoveLimits out{PrimalField(nu.measures()), PrimalField(nu.measures())};
  for (std::size_t e = 0; e < nu.size(); ++e) {
    const double range = nu_max[e] - nu_min[e];
    out.alpha[e] = std::max({nu_min[e], lu.lower[e] + 0.1 * (nu[e] - lu.lower[e]),
                             nu[e] - 0.5 * range});
    out.beta[e] = std::min({nu_max[e], lu.upper[e] - 0.1 * (lu.upper[e] - nu[e]),
                            nu[e] + 0.5 * range});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convex approximation

/// theta~_i(nu) = int (p_i / (U - nu) + q_i / (nu - L)) dV + r_i, i = 0..m.
struct ConvexApprox {
  std::vector<PrimalField> p;
  std::vector<PrimalField> q;
  std::vector<double> r;
  std::vector<double> rho;
  PrimalField lower;
  PrimalField upper;
  PrimalField alpha;
  PrimalField beta;
  PrimalField expansion;
  PrimalField nu_min;
  PrimalField nu_max;

  [[nodiscard]] std::size_t num_constraints() const noexcept { return p.size() - 1; }
  [[nodiscard]] std::size_t num_elements() const noexcept { return expansion.size(); }
  [[nodiscard]] const Measures& measures() const noexcept { return expansion.measures(); }
};

inline void require_strictly_between(const PrimalField& nu, const PrimalField& lower,
                                     const PrimalField& upper, const char* op) {
  detail::require_same_space(nu, lower, op);
  for (std::size_t e = 0; e < nu.size(); ++e)
    if (!(lower[e] < nu[e] && nu[e] < upper[e]))
      throw DomainError(std::string(op) + ": element " + std::to_string(e) +
                        " is not strictly between the asymptotes");
}

inline ConvexApprox build_approx(const PrimalField& nu_k, const std::vector<double>& theta,
                                 const std::vector<DualField>& derivatives,
                                 const std::vector<double>& rho, const Asymptotes& lu,
                                 const MoveLimits& bounds, const PrimalField& nu_min,
                                 const PrimalField& nu_max, SpaceMode mode) {
  const std::size_t m1 = theta.size();
  if (m1 == 0 || derivatives.size() != m1 || rho.size() != m1)
    throw ContractViolation("build_approx: need theta, derivatives and rho for i = 0..m");
  require_strictly_between(nu_k, lu.lower, lu.upper, "build_approx");

  const auto& w = nu_k.measures();
  const std::size_t n = nu_k.size();
  ConvexApprox ap{{}, {}, std::vector<double>(m1), rho, lu.lower, lu.upper,
                  bounds.alpha, bounds.beta, nu_k, nu_min, nu_max};
  ap.p.reserve(m1);
  ap.q.reserve(m1);
  for (std::size_t i = 0; i < m1; ++i) {
    const PrimalField g = to_gradient(derivatives[i], mode, w);
    PrimalField p(w), q(w);
    CompensatedSum integral;
    for (std::size_t e = 0; e < n; ++e) {
      const double ux = lu.upper[e] - nu_k[e];
      const double xl = nu_k[e] - lu.lower[e];
      const double shift = rho[i] / (nu_max[e] - nu_min[e]);
      const double gp = ramp_pos(g[e]), gm = ramp_neg(g[e]);
      p[e] = ux * ux * (1.001 * gp + 0.001 * gm + shift);
      q[e] = xl * xl * (0.001 * gp + 1.001 * gm + shift);
      integral += (*w)[e] * (p[e] / ux + q[e] / xl);
    }
    ap.r[i] = theta[i] - integral.value();
    ap.p.push_back(std::move(p));
    ap.q.push_back(std::move(q));
  }
  return ap;
}

/// theta~_i(nu).
inline double eval_approx(const ConvexApprox& ap, const PrimalField& nu, std::size_t i) {
  if (i >= ap.p.size())
    throw ContractViolation("eval_approx: index out of range");
  require_strictly_between(nu, ap.lower, ap.upper, "eval_approx");
  const auto& p = ap.p[i];
  const auto& q = ap.q[i];
  CompensatedSum s;
  for (std::size_t e = 0; e < nu.size(); ++e)
    s += nu.measure(e) * (p[e] / (ap.upper[e] - nu[e]) + q[e] / (nu[e] - ap.lower[e]));
  return s.value() + ap.r[i];
}

/// Element-wise derivative of the integrand of theta~_i at nu.
inline PrimalField approx_gradient(const ConvexApprox& ap, const PrimalField& nu, std::size_t i) {
  require_strictly_between(nu, ap.lower, ap.upper, "approx_gradient");
  PrimalField g(nu.measures());
  for (std::size_t e = 0; e < nu.size(); ++e) {
    const double ux = ap.upper[e] - nu[e], xl = nu[e] - ap.lower[e];
    g[e] = ap.p[i][e] / (ux * ux) - ap.q[i][e] / (xl * xl);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Conservativeness parameters

inline constexpr double kRhoFloor = 1e-6;

/// rho_i = 0.1 / |D| * int |grad theta_i| (nu_max - nu_min) dV, floored.
inline std::vector<double> init_rho(const std::vector<DualField>& derivatives, SpaceMode mode,
                                    const PrimalField& nu_min, const PrimalField& nu_max,
                                    double floor = kRhoFloor) {
  const auto& w = nu_min.measures();
  std::vector<double> rho(derivatives.size());
  for (std::size_t i = 0; i < derivatives.size(); ++i) {
    const PrimalField g = to_gradient(derivatives[i], mode, w);
    CompensatedSum s;
    for (std::size_t e = 0; e < g.size(); ++e)
      s += std::abs(g[e]) * (nu_max[e] - nu_min[e]) * (*w)[e];
    rho[i] = std::max(floor, 0.1 * s.value() / w->total());
  }
  return rho;
}

inline double update_rho(double rho, double delta) {
  if (delta > 0.0)
    return std::min(1.1 * (rho + delta), 10.0 * rho);
  return rho;
}

/// d(nu) with the expansion point and asymptotes of the current outer iterate.
inline double rho_denominator(const ConvexApprox& ap, const PrimalField& nu) {
  require_strictly_between(nu, ap.lower, ap.upper, "rho_denominator");
  CompensatedSum s;
  for (std::size_t e = 0; e < nu.size(); ++e) {
    const double diff = nu[e] - ap.expansion[e];
    s += nu.measure(e) * (ap.upper[e] - ap.lower[e]) * diff * diff /
         ((ap.upper[e] - nu[e]) * (nu[e] - ap.lower[e]) * (ap.nu_max[e] - ap.nu_min[e]));
  }
  return s.value();
}

/// delta_i = (theta_i(nu) - theta~_i(nu)) / d(nu); zero when d vanishes.
inline double rho_delta(const ConvexApprox& ap, const PrimalField& nu, std::size_t i,
                        double theta_true) {
  const double d = rho_denominator(ap, nu);
  if (!(d > 0.0))
    return 0.0;
  return (theta_true - eval_approx(ap, nu, i)) / d;
}

// ---------------------------------------------------------------------------
// Outer KKT metric

/// Norm of the complementarity form of the outer KKT conditions:
/// lambda_i (theta_i)^-, (theta_i)^+ in R^m and
/// (nu_min - nu)(grad L)^+, (nu_max - nu)(grad L)^- in the working space.
inline double kkt_metric(const PrimalField& nu, const std::vector<double>& lambda,
                         const std::vector<double>& theta, const std::vector<DualField>& derivatives,
                         const PrimalField& nu_min, const PrimalField& nu_max, SpaceMode mode) {
  const std::size_t m = lambda.size();
  if (theta.size() != m + 1 || derivatives.size() != m + 1)
    throw ContractViolation("kkt_metric: need m multipliers and m + 1 functions");
  const auto& w = nu.measures();
  CompensatedSum total;
  for (std::size_t i = 0; i < m; ++i) {
    const double comp = lambda[i] * ramp_neg(theta[i + 1]);
    const double feas = ramp_pos(theta[i + 1]);
    total += comp * comp + feas * feas;
  }
  std::vector<double> grad_l = to_gradient(derivatives[0], mode, w).values();
  for (std::size_t i = 0; i < m; ++i) {
    const PrimalField gi = to_gradient(derivatives[i + 1], mode, w);
    for (std::size_t e = 0; e < nu.size(); ++e)
      grad_l[e] += lambda[i] * gi[e];
  }
  for (std::size_t e = 0; e < nu.size(); ++e) {
    const double lo = (nu_min[e] - nu[e]) * ramp_pos(grad_l[e]);
    const double hi = (nu_max[e] - nu[e]) * ramp_neg(grad_l[e]);
    total += (*w)[e] * (lo * lo + hi * hi);
  }
  return std::sqrt(total.value());
}

} // namespace gcmma
