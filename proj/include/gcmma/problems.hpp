#pragma once

// Closed-form test problem: min int (nu - target)^2 dV  s.t.  int nu dV <= fraction |D|,
// 0 <= nu <= 1. For target > fraction the optimum is nu = fraction with
// multiplier 2 (target - fraction).

#include "gcmma/fspace.hpp"
#include "gcmma/gcmma.hpp"

namespace gcmma {

struct QuadraticVolumeSpec {
  double target = 0.9;
  double fraction = 0.3;
};

inline OptimizationProblem quadratic_volume_problem(const Measures& measures,
                                                    QuadraticVolumeSpec spec = {}) {
  OptimizationProblem prob;
  prob.measures = measures;
  prob.nu_min = PrimalField(measures, 0.0);
  prob.nu_max = PrimalField(measures, 1.0);
  prob.num_constraints = 1;
  prob.evaluate = [measures, spec](const PrimalField& nu) {
    Evaluation ev;
    DualField d0(measures), d1(measures);
    CompensatedSum obj, vol;
    for (std::size_t e = 0; e < nu.size(); ++e) {
      const double w = (*measures)[e], diff = nu[e] - spec.target;
      obj += w * diff * diff;
      vol += w * nu[e];
      d0[e] = 2.0 * diff * w;
      d1[e] = w;
    }
    ev.values = {obj.value(), vol.value() - spec.fraction * measures->total()};
    ev.derivatives = {std::move(d0), std::move(d1)};
    return ev;
  };
  return prob;
}

} // namespace gcmma
