#pragma once

// Outer GCMMA loop. Each outer iteration builds a convex approximation at
// the current design, solves it, and re-solves with larger rho while the
// approximation underestimates any function at the candidate.

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gcmma/approx.hpp"
#include "gcmma/errors.hpp"
#include "gcmma/fspace.hpp"
#include "gcmma/subproblem.hpp"

namespace gcmma {

/// theta_i(nu) and D theta_i(nu) for i = 0..m.
struct Evaluation {
  std::vector<double> values;
  std::vector<DualField> derivatives;
};

struct OptimizationProblem {
  Measures measures;
  PrimalField nu_min;
  PrimalField nu_max;
  std::size_t num_constraints = 0;
  /// Must be deterministic for fixed nu; nu lives on `measures`.
  std::function<Evaluation(const PrimalField&)> evaluate;

  void validate() const {
    if (!measures || nu_min.measures() != measures || nu_max.measures() != measures)
      throw ContractViolation("OptimizationProblem: bounds must live on the problem mesh");
    for (std::size_t e = 0; e < nu_min.size(); ++e)
      if (!(nu_min[e] < nu_max[e]))
        throw ContractViolation("OptimizationProblem: nu_min < nu_max violated at element " +
                                std::to_string(e));
    if (!evaluate)
      throw ContractViolation("OptimizationProblem: no evaluator");
  }
};

struct GcmmaConfig {
  AugmentedParams params;
  SpaceMode space = SpaceMode::l2;
  double kkt_tolerance = 0.0; ///< <= 0 runs until max_outer
  std::size_t max_outer = 200;
  std::size_t max_inner = 15;
  double rho_floor = kRhoFloor;
  /// Relative slack on the acceptance test theta~ >= theta.
  double acceptance_slack = 1e-12;
  SubproblemOptions subproblem;
  bool keep_designs = true;
  std::function<void(const std::string&)> log;
  /// Called with every approximation before its subproblem is solved.
  std::function<void(std::size_t outer, std::size_t inner, const ConvexApprox&)> on_subproblem;

  static GcmmaConfig defaults(std::size_t m) {
    GcmmaConfig c;
    c.params = AugmentedParams::defaults(m);
    return c;
  }
};

struct OuterRecord {
  std::size_t iter = 0;
  std::vector<double> theta;
  double kkt = 0.0;
  std::vector<double> rho;
  std::size_t inner_iters = 0;
  std::vector<double> lambda;
  bool inner_capped = false;
  PrimalField nu; ///< empty unless keep_designs
  /// theta~_i at the accepted point (equal to theta at iter 0).
  std::vector<double> approx_theta;
};

struct GcmmaResult {
  std::vector<OuterRecord> history; ///< entry 0 is the initial design
  PrimalField nu;                   ///< final design on the problem mesh
  std::vector<double> lambda;
  bool converged = false;
  std::vector<std::string> warnings;
  /// Diagnostics of the last accepted subproblem solve.
  SubproblemSolution last_subproblem;
};

namespace detail {

inline Evaluation evaluate_checked(const OptimizationProblem& prob, const PrimalField& nu,
                                   std::size_t k, std::size_t j) {
  Evaluation ev;
  try {
    ev = prob.evaluate(nu);
  } catch (const std::exception& ex) {
    throw EvaluationError("evaluation failed at outer iteration " + std::to_string(k) +
                          ", inner iteration " + std::to_string(j) + ": " + ex.what());
  }
  const std::size_t m1 = prob.num_constraints + 1;
  if (ev.values.size() != m1 || ev.derivatives.size() != m1)
    throw EvaluationError("evaluator returned " + std::to_string(ev.values.size()) +
                          " values for " + std::to_string(m1) + " functions at outer iteration " +
                          std::to_string(k));
  for (const auto& d : ev.derivatives)
    if (d.measures() != prob.measures)
      throw EvaluationError("evaluator returned a derivative on the wrong mesh at outer iteration " +
                            std::to_string(k));
  return ev;
}

/// Derivatives as seen from the working space.
inline std::vector<DualField> rebind_all(const std::vector<DualField>& ds, const Measures& w) {
  std::vector<DualField> out;
  out.reserve(ds.size());
  for (const auto& d : ds)
    out.push_back(d.rebind(w));
  return out;
}

} // namespace detail

/// Run GCMMA from `initial` (on the problem mesh, within the bounds).
inline GcmmaResult solve(const OptimizationProblem& prob, const GcmmaConfig& cfg,
                         const PrimalField& initial) {
  prob.validate();
  cfg.params.validate();
  const std::size_t m = prob.num_constraints;
  if (cfg.params.num_constraints() != m)
    throw ContractViolation("solve: config has " + std::to_string(cfg.params.num_constraints()) +
                            " constraint parameters for " + std::to_string(m) + " constraints");
  if (initial.measures() != prob.measures)
    throw ContractViolation("solve: initial design is not on the problem mesh");
  for (std::size_t e = 0; e < initial.size(); ++e)
    if (initial[e] < prob.nu_min[e] || initial[e] > prob.nu_max[e])
      throw ContractViolation("solve: initial design violates the bounds at element " +
                              std::to_string(e));

  const Measures working = working_measures(prob.measures, cfg.space);
  const PrimalField nu_min = prob.nu_min.rebind(working);
  const PrimalField nu_max = prob.nu_max.rebind(working);
  auto warn = [&](GcmmaResult& res, std::string msg) {
    if (cfg.log)
      cfg.log(msg);
    res.warnings.push_back(std::move(msg));
  };

  GcmmaResult res;
  PrimalField nu = initial.rebind(working);
  Evaluation ev = detail::evaluate_checked(prob, initial, 0, 0);
  std::vector<DualField> derivs = detail::rebind_all(ev.derivatives, working);
  res.lambda.assign(m, 0.0);
  {
    OuterRecord rec;
    rec.iter = 0;
    rec.theta = ev.values;
    rec.approx_theta = ev.values;
    rec.kkt = kkt_metric(nu, res.lambda, ev.values, derivs, nu_min, nu_max, cfg.space);
    rec.rho.assign(m + 1, 0.0);
    rec.lambda = res.lambda;
    if (cfg.keep_designs)
      rec.nu = initial;
    res.history.push_back(std::move(rec));
  }

  AsymptoteState asym;
  for (std::size_t k = 1; k <= cfg.max_outer; ++k) {
    const Asymptotes lu = update_asymptotes(k, nu, asym, nu_min, nu_max);
    const MoveLimits lim = subproblem_bounds(nu, lu, nu_min, nu_max);
    std::vector<double> rho = init_rho(derivs, cfg.space, nu_min, nu_max, cfg.rho_floor);

    SubproblemSolution sol;
    Evaluation cand;
    std::vector<double> approx_vals(m + 1);
    std::size_t j = 0;
    bool capped = false;
    for (;; ++j) {
      const ConvexApprox ap =
          build_approx(nu, ev.values, derivs, rho, lu, lim, nu_min, nu_max, cfg.space);
      if (cfg.on_subproblem)
        cfg.on_subproblem(k, j, ap);
      try {
        sol = solve_subproblem(ap, cfg.params, cfg.subproblem);
      } catch (const SolverError& ex) {
        throw NonConvergence("subproblem failed at outer iteration " + std::to_string(k) +
                             ", inner iteration " + std::to_string(j) + ": " + ex.what());
      }
      cand = detail::evaluate_checked(prob, sol.state.nu.rebind(prob.measures), k, j);
      bool accepted = true;
      for (std::size_t i = 0; i <= m; ++i) {
        approx_vals[i] = eval_approx(ap, sol.state.nu, i);
        const double slack = cfg.acceptance_slack * (1.0 + std::abs(cand.values[i]));
        if (approx_vals[i] + slack < cand.values[i])
          accepted = false;
      }
      if (accepted)
        break;
      if (j >= cfg.max_inner) {
        capped = true;
        warn(res, "outer iteration " + std::to_string(k) + ": inner loop hit the cap of " +
                      std::to_string(cfg.max_inner) + "; accepting a non-conservative iterate");
        break;
      }
      for (std::size_t i = 0; i <= m; ++i)
        rho[i] = update_rho(rho[i], rho_delta(ap, sol.state.nu, i, cand.values[i]));
    }

    asym.push(nu, lu);
    nu = sol.state.nu;
    ev = std::move(cand);
    derivs = detail::rebind_all(ev.derivatives, working);
    res.lambda = sol.state.lambda;

    OuterRecord rec;
    rec.iter = k;
    rec.theta = ev.values;
    rec.approx_theta = approx_vals;
    rec.kkt = kkt_metric(nu, res.lambda, ev.values, derivs, nu_min, nu_max, cfg.space);
    rec.rho = rho;
    rec.inner_iters = j;
    rec.lambda = res.lambda;
    rec.inner_capped = capped;
    if (cfg.keep_designs)
      rec.nu = nu.rebind(prob.measures);
    const double kkt = rec.kkt;
    res.history.push_back(std::move(rec));
    res.last_subproblem = std::move(sol);
    if (cfg.kkt_tolerance > 0.0 && kkt <= cfg.kkt_tolerance) {
      res.converged = true;
      break;
    }
  }
  res.nu = nu.rebind(prob.measures);
  return res;
}

} // namespace gcmma
