#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gcmma/fspace.hpp"
#include "gcmma/mesh.hpp"

namespace testing_support {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline std::size_t index(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double a, double b) {
  std::vector<double> v(n);
  for (auto& x : v)
    x = uniform(rng, a, b);
  return v;
}

/// Strictly increasing nodes with widths drawn from [0.05, 2].
inline gcmma::Mesh1D random_mesh_1d(Rng& rng, std::size_t n) {
  std::vector<double> x(n + 1);
  x[0] = uniform(rng, -1.0, 1.0);
  for (std::size_t i = 1; i <= n; ++i)
    x[i] = x[i - 1] + uniform(rng, 0.05, 2.0);
  return gcmma::Mesh1D(std::move(x));
}

inline gcmma::Measures random_measures(Rng& rng, std::size_t n) {
  return gcmma::make_measures(random_vector(rng, n, 0.05, 3.0));
}

template <class F>
F random_field(Rng& rng, const gcmma::Measures& m, double a = -1.0, double b = 1.0) {
  return F(m, random_vector(rng, m->size(), a, b));
}

inline double rel_err(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

/// |a - b| / max(|a|, |b|, floor)
inline double rel_diff(double a, double b, double floor = 0.0) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor, 1e-300});
}

} // namespace testing_support
