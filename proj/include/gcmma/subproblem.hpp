#pragma once

// Primal-dual interior-point solver for one GCMMA subproblem.
//
// Unknowns: nu (field), y, lambda, s, mu (R^m), z, zeta (scalars) and the
// bound multipliers eps_mult, eta_mult (fields). For a fixed barrier
// parameter the perturbed KKT system is solved by damped Newton; the barrier
// is then reduced by a constant factor.
//
// All blocks of the Newton matrix except the (lambda, z) core are diagonal,
// so the step is computed by elimination:
//   (eps_mult, eta_mult, mu, zeta) -> (s, y) -> nu -> dense (lambda, z).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gcmma/approx.hpp"
#include "gcmma/errors.hpp"
#include "gcmma/fspace.hpp"

namespace gcmma {

struct SubproblemState {
  PrimalField nu;
  std::vector<double> y;
  double z = 1.0;
  std::vector<double> lambda;
  std::vector<double> s;
  PrimalField eps_mult;
  PrimalField eta_mult;
  std::vector<double> mu;
  double zeta = 1.0;

  [[nodiscard]] std::size_t num_constraints() const noexcept { return y.size(); }
};

/// Newton direction; same shape as the state.
using SubproblemStep = SubproblemState;

struct SubproblemResidual {
  DualField nu;
  std::vector<double> y;
  double z = 0.0;
  std::vector<double> lambda;
  std::vector<double> s;
  PrimalField eps;
  PrimalField eta;
  std::vector<double> mu;
  double zeta = 0.0;
};

struct SubproblemOptions {
  double barrier_start = 1.0;
  double barrier_factor = 0.1;
  double barrier_final = 1e-5;
  double stage_exit = 0.9; ///< stage ends once q_norm < stage_exit * barrier
  std::size_t max_newton_per_stage = 200;
  std::size_t max_halvings = 50;
  double feasibility_tol = 1e-8; ///< final stage also requires |constraint rows| <= this
};

struct TraceEntry {
  double barrier;
  std::size_t newton_iter;
  double q_norm_before;
  double q_norm;
  double step_limit;
  double tau;
  double interior_margin; ///< smallest relative distance to the boundary after the step
};

struct StageSummary {
  double barrier;
  std::size_t newton_iters;
  double q_norm;
};

struct SubproblemSolution {
  SubproblemState state;
  double final_barrier = 0.0;
  std::vector<StageSummary> stages;
  std::vector<TraceEntry> trace;
};

/// CSV header for the optional diagnostic stream.
inline constexpr const char* kTraceHeader = "stage_eps,newton_iter,q_norm,tau";

// ---------------------------------------------------------------------------

namespace detail {

inline void require_interior(const SubproblemState& st, const ConvexApprox& ap, const char* op) {
  const std::size_t n = ap.num_elements();
  if (st.nu.size() != n || st.eps_mult.size() != n || st.eta_mult.size() != n)
    throw ContractViolation(std::string(op) + ": state has the wrong number of elements");
  for (std::size_t e = 0; e < n; ++e) {
    if (!(ap.alpha[e] < st.nu[e] && st.nu[e] < ap.beta[e]))
      throw DomainError(std::string(op) + ": nu leaves (alpha, beta) at element " +
                        std::to_string(e));
    if (!(st.eps_mult[e] > 0.0) || !(st.eta_mult[e] > 0.0))
      throw DomainError(std::string(op) + ": bound multiplier not positive at element " +
                        std::to_string(e));
  }
  const std::size_t m = ap.num_constraints();
  if (st.y.size() != m || st.lambda.size() != m || st.s.size() != m || st.mu.size() != m)
    throw ContractViolation(std::string(op) + ": state has the wrong number of constraints");
  for (std::size_t i = 0; i < m; ++i)
    if (!(st.y[i] > 0.0) || !(st.lambda[i] > 0.0) || !(st.s[i] > 0.0) || !(st.mu[i] > 0.0))
      throw DomainError(std::string(op) + ": scalar variable not positive for constraint " +
                        std::to_string(i));
  if (!(st.z > 0.0) || !(st.zeta > 0.0))
    throw DomainError(std::string(op) + ": z or zeta not positive");
}

/// psi_j, D psi_j, D^2 psi_j at one element.
struct PsiParts {
  double value, first, second;
};

inline PsiParts psi(const ConvexApprox& ap, std::size_t j, std::size_t e, double x) {
  const double ux = ap.upper[e] - x, xl = x - ap.lower[e];
  const double p = ap.p[j][e], q = ap.q[j][e];
  return {p / ux + q / xl, p / (ux * ux) - q / (xl * xl),
          2.0 * p / (ux * ux * ux) + 2.0 * q / (xl * xl * xl)};
}

} // namespace detail

/// Algorithm start point: nu at the middle of the move limits, multipliers
/// at max{1, 1/distance}.
inline SubproblemState initial_state(const ConvexApprox& ap, const AugmentedParams& params) {
  const std::size_t n = ap.num_elements(), m = ap.num_constraints();
  SubproblemState st;
  st.nu = PrimalField(ap.measures());
  st.eps_mult = PrimalField(ap.measures());
  st.eta_mult = PrimalField(ap.measures());
  for (std::size_t e = 0; e < n; ++e) {
    st.nu[e] = 0.5 * (ap.alpha[e] + ap.beta[e]);
    st.eps_mult[e] = std::max(1.0, 1.0 / (st.nu[e] - ap.alpha[e]));
    st.eta_mult[e] = std::max(1.0, 1.0 / (ap.beta[e] - st.nu[e]));
  }
  st.y.assign(m, 1.0);
  st.lambda.assign(m, 1.0);
  st.s.assign(m, 1.0);
  st.mu.resize(m);
  for (std::size_t i = 0; i < m; ++i)
    st.mu[i] = std::max(1.0, 0.5 * params.c[i]);
  st.z = 1.0;
  st.zeta = 1.0;
  return st;
}

inline SubproblemResidual residual(const SubproblemState& st, const ConvexApprox& ap,
                                   const AugmentedParams& params, double barrier) {
  if (!(barrier > 0.0))
    throw ContractViolation("residual: barrier parameter must be positive");
  detail::require_interior(st, ap, "residual");
  const std::size_t n = ap.num_elements(), m = ap.num_constraints();
  const auto& w = ap.measures();

  SubproblemResidual r;
  r.nu = DualField(w);
  r.eps = PrimalField(w);
  r.eta = PrimalField(w);
  std::vector<CompensatedSum> integrals(m);
  for (std::size_t e = 0; e < n; ++e) {
    const double x = st.nu[e];
    double dl = detail::psi(ap, 0, e, x).first - st.eps_mult[e] + st.eta_mult[e];
    for (std::size_t i = 0; i < m; ++i) {
      const auto ps = detail::psi(ap, i + 1, e, x);
      dl += st.lambda[i] * ps.first;
      integrals[i] += (*w)[e] * ps.value;
    }
    r.nu[e] = (*w)[e] * dl;
    r.eps[e] = (x - ap.alpha[e]) * st.eps_mult[e] - barrier;
    r.eta[e] = (ap.beta[e] - x) * st.eta_mult[e] - barrier;
  }
  r.y.resize(m);
  r.lambda.resize(m);
  r.s.resize(m);
  r.mu.resize(m);
  double lam_a = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    r.y[i] = params.c[i] + params.d[i] * st.y[i] - st.lambda[i] - st.mu[i];
    r.lambda[i] = integrals[i].value() - params.a[i] * st.z - st.y[i] + ap.r[i + 1] + st.s[i];
    r.s[i] = st.lambda[i] * st.s[i] - barrier;
    r.mu[i] = st.mu[i] * st.y[i] - barrier;
    lam_a += st.lambda[i] * params.a[i];
  }
  r.z = params.a0 - lam_a - st.zeta;
  r.zeta = st.zeta * st.z - barrier;
  return r;
}

/// ||F||_Q: the nu block in the dual norm, the two bound blocks in the
/// primal norm, everything else Euclidean.
inline double q_norm(const SubproblemResidual& r) {
  const double dn = dual_norm(r.nu), pe = primal_norm(r.eps), ph = primal_norm(r.eta);
  CompensatedSum s;
  s += dn * dn;
  s += pe * pe;
  s += ph * ph;
  for (const auto* v : {&r.y, &r.lambda, &r.s, &r.mu})
    for (double x : *v)
      s += x * x;
  s += r.z * r.z;
  s += r.zeta * r.zeta;
  return std::sqrt(s.value());
}

/// Solve the block Newton system for the current state.
inline SubproblemStep newton_step(const SubproblemState& st, const ConvexApprox& ap,
                                  const AugmentedParams& params, double barrier) {
  const SubproblemResidual r = residual(st, ap, params, barrier);
  const std::size_t n = ap.num_elements(), m = ap.num_constraints();
  const auto& w = ap.measures();

  // Diagonal of the reduced nu block, its right-hand side and G = [w Dpsi_i].
  std::vector<double> dnu(n), rhs_nu(n);
  Eigen::MatrixXd g(n, m);
  for (std::size_t e = 0; e < n; ++e) {
    const double x = st.nu[e];
    const double xa = x - ap.alpha[e], bx = ap.beta[e] - x;
    double curv = detail::psi(ap, 0, e, x).second;
    for (std::size_t i = 0; i < m; ++i) {
      const auto ps = detail::psi(ap, i + 1, e, x);
      curv += st.lambda[i] * ps.second;
      g(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(i)) = (*w)[e] * ps.first;
    }
    dnu[e] = (*w)[e] * (curv + st.eps_mult[e] / xa + st.eta_mult[e] / bx);
    rhs_nu[e] = -r.nu[e] - (*w)[e] * r.eps[e] / xa + (*w)[e] * r.eta[e] / bx;
  }

  std::vector<double> dy(m);
  for (std::size_t i = 0; i < m; ++i)
    dy[i] = params.d[i] + st.mu[i] / st.y[i];

  // Dense core in (dlambda, dz).
  const auto mm = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd core = Eigen::MatrixXd::Zero(mm + 1, mm + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mm + 1);
  for (Eigen::Index i = 0; i < mm; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    for (Eigen::Index j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t e = 0; e < n; ++e)
        acc += g(static_cast<Eigen::Index>(e), i) * g(static_cast<Eigen::Index>(e), j) / dnu[e];
      core(i, j) = acc;
      core(j, i) = acc;
    }
    core(i, i) += 1.0 / dy[iu] + st.s[iu] / st.lambda[iu];
    core(i, mm) = params.a[iu];
    core(mm, i) = params.a[iu];
    double acc = 0.0;
    for (std::size_t e = 0; e < n; ++e)
      acc += g(static_cast<Eigen::Index>(e), i) * rhs_nu[e] / dnu[e];
    rhs(i) = r.lambda[iu] + acc + (r.y[iu] + r.mu[iu] / st.y[iu]) / dy[iu] - r.s[iu] / st.lambda[iu];
  }
  core(mm, mm) = -st.zeta / st.z;
  rhs(mm) = r.z + r.zeta / st.z;

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(core);
  if (!lu.isInvertible())
    throw SingularSystem("newton_step: reduced (lambda, z) system is singular");
  const Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite())
    throw SingularSystem("newton_step: reduced solve produced non-finite values");

  SubproblemStep d;
  d.lambda.resize(m);
  d.s.resize(m);
  d.y.resize(m);
  d.mu.resize(m);
  for (std::size_t i = 0; i < m; ++i)
    d.lambda[i] = sol(static_cast<Eigen::Index>(i));
  d.z = sol(mm);

  d.nu = PrimalField(w);
  d.eps_mult = PrimalField(w);
  d.eta_mult = PrimalField(w);
  for (std::size_t e = 0; e < n; ++e) {
    double acc = rhs_nu[e];
    for (std::size_t i = 0; i < m; ++i)
      acc -= g(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(i)) * d.lambda[i];
    const double dx = acc / dnu[e];
    d.nu[e] = dx;
    const double xa = st.nu[e] - ap.alpha[e], bx = ap.beta[e] - st.nu[e];
    d.eps_mult[e] = (-r.eps[e] - st.eps_mult[e] * dx) / xa;
    d.eta_mult[e] = (-r.eta[e] + st.eta_mult[e] * dx) / bx;
  }
  for (std::size_t i = 0; i < m; ++i) {
    d.s[i] = (-r.s[i] - st.s[i] * d.lambda[i]) / st.lambda[i];
    d.y[i] = (d.lambda[i] - r.y[i] - r.mu[i] / st.y[i]) / dy[i];
    d.mu[i] = (-r.mu[i] - st.mu[i] * d.y[i]) / st.y[i];
  }
  d.zeta = (-r.zeta - st.zeta * d.z) / st.z;
  return d;
}

/// state + t * step
inline SubproblemState advance(const SubproblemState& st, const SubproblemStep& d, double t) {
  SubproblemState out = st;
  for (std::size_t e = 0; e < st.nu.size(); ++e) {
    out.nu[e] += t * d.nu[e];
    out.eps_mult[e] += t * d.eps_mult[e];
    out.eta_mult[e] += t * d.eta_mult[e];
  }
  for (std::size_t i = 0; i < st.y.size(); ++i) {
    out.y[i] += t * d.y[i];
    out.lambda[i] += t * d.lambda[i];
    out.s[i] += t * d.s[i];
    out.mu[i] += t * d.mu[i];
  }
  out.z += t * d.z;
  out.zeta += t * d.zeta;
  return out;
}

/// Largest t <= 1 keeping 1% of every distance to the boundary.
inline double step_limit(const SubproblemState& st, const SubproblemStep& d, const ConvexApprox& ap) {
  double t = 1.0;
  auto positive = [&t](double x, double dx) {
    if (dx < 0.0)
      t = std::min(t, -0.99 * x / dx);
  };
  for (std::size_t e = 0; e < st.nu.size(); ++e) {
    const double dx = d.nu[e];
    if (dx < 0.0)
      t = std::min(t, -0.99 * (st.nu[e] - ap.alpha[e]) / dx);
    else if (dx > 0.0)
      t = std::min(t, 0.99 * (ap.beta[e] - st.nu[e]) / dx);
    positive(st.eps_mult[e], d.eps_mult[e]);
    positive(st.eta_mult[e], d.eta_mult[e]);
  }
  for (std::size_t i = 0; i < st.y.size(); ++i) {
    positive(st.y[i], d.y[i]);
    positive(st.lambda[i], d.lambda[i]);
    positive(st.s[i], d.s[i]);
    positive(st.mu[i], d.mu[i]);
  }
  positive(st.z, d.z);
  positive(st.zeta, d.zeta);
  return t;
}

/// Smallest relative slack of the state: distances of nu to the move limits
/// over the limit gap, and every positive variable as is.
inline double interior_margin(const SubproblemState& st, const ConvexApprox& ap) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < st.nu.size(); ++e) {
    const double gap = ap.beta[e] - ap.alpha[e];
    margin = std::min({margin, (st.nu[e] - ap.alpha[e]) / gap, (ap.beta[e] - st.nu[e]) / gap,
                       st.eps_mult[e], st.eta_mult[e]});
  }
  for (std::size_t i = 0; i < st.y.size(); ++i)
    margin = std::min({margin, st.y[i], st.lambda[i], st.s[i], st.mu[i]});
  return std::min({margin, st.z, st.zeta});
}

struct LineSearchResult {
  double tau;
  std::size_t halvings;
  SubproblemState state;
  double q_norm;
};

/// First of t, t/2, t/4, ... that strictly reduces ||F||_Q.
inline LineSearchResult line_search(const SubproblemState& st, const SubproblemStep& d, double t,
                                    const ConvexApprox& ap, const AugmentedParams& params,
                                    double barrier, std::size_t max_halvings = 50,
                                    double current_norm = -1.0) {
  const double q0 = current_norm >= 0.0 ? current_norm : q_norm(residual(st, ap, params, barrier));
  double tau = t;
  for (std::size_t h = 0; h <= max_halvings; ++h, tau *= 0.5) {
    SubproblemState trial = advance(st, d, tau);
    double q1;
    try {
      q1 = q_norm(residual(trial, ap, params, barrier));
    } catch (const DomainError&) {
      continue;
    }
    if (q1 < q0)
      return {tau, h, std::move(trial), q1};
  }
  throw LineSearchFailure("line_search: no decrease of the residual norm after " +
                          std::to_string(max_halvings) + " halvings (||F||_Q = " +
                          std::to_string(q0) + ", barrier = " + std::to_string(barrier) + ")");
}

/// Barrier continuation from barrier_start down to barrier_final.
/// `trace`, when given, receives one CSV row per Newton step.
inline SubproblemSolution solve_subproblem(const ConvexApprox& ap, const AugmentedParams& params,
                                           const SubproblemOptions& opt = {},
                                           std::ostream* trace = nullptr) {
  params.validate();
  if (params.num_constraints() != ap.num_constraints())
    throw ContractViolation("solve_subproblem: parameter count does not match constraints");
  SubproblemSolution out;
  out.state = initial_state(ap, params);
  double barrier = opt.barrier_start;
  for (;;) {
    const bool last = barrier <= opt.barrier_final * (1.0 + 1e-9);
    const auto done = [&](double q) {
      if (!(q < opt.stage_exit * barrier))
        return false;
      if (!last)
        return true;
      const auto r = residual(out.state, ap, params, barrier);
      for (double v : r.lambda)
        if (!(std::abs(v) <= opt.feasibility_tol))
          return false;
      return true;
    };
    double qn = q_norm(residual(out.state, ap, params, barrier));
    std::size_t iters = 0;
    while (!done(qn)) {
      if (iters == opt.max_newton_per_stage)
        throw NonConvergence("solve_subproblem: stage with barrier " + std::to_string(barrier) +
                             " did not converge in " + std::to_string(iters) +
                             " Newton steps (||F||_Q = " + std::to_string(qn) + ")");
      const SubproblemStep d = newton_step(out.state, ap, params, barrier);
      const double t = step_limit(out.state, d, ap);
      LineSearchResult ls = line_search(out.state, d, t, ap, params, barrier, opt.max_halvings, qn);
      out.trace.push_back({barrier, iters + 1, qn, ls.q_norm, t, ls.tau, 0.0});
      out.state = std::move(ls.state);
      out.trace.back().interior_margin = interior_margin(out.state, ap);
      qn = ls.q_norm;
      ++iters;
      if (trace)
        *trace << barrier << ',' << iters << ',' << qn << ',' << ls.tau << '\n';
    }
    out.stages.push_back({barrier, iters, qn});
    out.final_barrier = barrier;
    if (last)
      break;
    barrier *= opt.barrier_factor;
  }
  return out;
}

} // namespace gcmma
