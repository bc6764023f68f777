#pragma once

// Discrete L2 layer for element-wise uniform fields.
//
// The basis is one indicator function per element, so the mass matrix is
// M = diag(|Omega_1|, ..., |Omega_n|). Primal fields hold the values of the
// function on each element; dual fields hold F(phi_e), i.e. integrated
// quantities. The Riesz map takes primal to dual by multiplying with M.

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gcmma/errors.hpp"

namespace gcmma {

/// Neumaier-compensated accumulator. Used for every reduction over elements.
class CompensatedSum {
public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Positive element volumes; the diagonal of the mass matrix.
class ElementMeasures {
public:
  explicit ElementMeasures(std::vector<double> volumes) : volumes_(std::move(volumes)) {
    if (volumes_.empty())
      throw ContractViolation("ElementMeasures: no elements");
    CompensatedSum total;
    for (std::size_t e = 0; e < volumes_.size(); ++e) {
      if (!(volumes_[e] > 0.0) || !std::isfinite(volumes_[e]))
        throw ContractViolation("ElementMeasures: element " + std::to_string(e) +
                                " has non-positive measure");
      total += volumes_[e];
    }
    total_ = total.value();
  }

  [[nodiscard]] std::size_t size() const noexcept { return volumes_.size(); }
  [[nodiscard]] double operator[](std::size_t e) const noexcept { return volumes_[e]; }
  [[nodiscard]] std::span<const double> values() const noexcept { return volumes_; }
  /// Measure of the whole domain.
  [[nodiscard]] double total() const noexcept { return total_; }

private:
  std::vector<double> volumes_;
  double total_ = 0.0;
};

/// Shared immutable handle. Fields compare handles, not contents, so two
/// meshes with identical volumes are still different spaces.
using Measures = std::shared_ptr<const ElementMeasures>;

inline Measures make_measures(std::vector<double> volumes) {
  return std::make_shared<const ElementMeasures>(std::move(volumes));
}

/// Identity metric with n elements; turns every mass-weighted operation into
/// its plain Euclidean counterpart.
inline Measures unit_measures(std::size_t n) { return make_measures(std::vector<double>(n, 1.0)); }

struct PrimalTag {};
struct DualTag {};

/// Coefficient list bound to a space. `Tag` separates V_h from V_h^*.
template <class Tag>
class Field {
public:
  Field() = default;

  explicit Field(Measures measures, double value = 0.0)
      : measures_(std::move(measures)), coeffs_(checked(measures_).size(), value) {}

  Field(Measures measures, std::vector<double> coeffs)
      : measures_(std::move(measures)), coeffs_(std::move(coeffs)) {
    if (checked(measures_).size() != coeffs_.size())
      throw ContractViolation("Field: " + std::to_string(coeffs_.size()) + " coefficients for " +
                              std::to_string(measures_->size()) + " elements");
  }

  [[nodiscard]] std::size_t size() const noexcept { return coeffs_.size(); }
  [[nodiscard]] const Measures& measures() const noexcept { return measures_; }
  [[nodiscard]] double measure(std::size_t e) const noexcept { return (*measures_)[e]; }

  [[nodiscard]] double operator[](std::size_t e) const noexcept { return coeffs_[e]; }
  double& operator[](std::size_t e) noexcept { return coeffs_[e]; }

  [[nodiscard]] std::span<const double> coeffs() const noexcept { return coeffs_; }
  [[nodiscard]] std::span<double> coeffs() noexcept { return coeffs_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return coeffs_; }

  [[nodiscard]] bool same_space(const Field& other) const noexcept {
    return measures_ == other.measures_;
  }

  /// Same coefficients, reinterpreted on another space of equal dimension.
  [[nodiscard]] Field rebind(Measures measures) const { return Field(std::move(measures), coeffs_); }

private:
  static const ElementMeasures& checked(const Measures& m) {
    if (!m)
      throw ContractViolation("Field: null measures handle");
    return *m;
  }

  Measures measures_;
  std::vector<double> coeffs_;
};

using PrimalField = Field<PrimalTag>;
using DualField = Field<DualTag>;

namespace detail {

template <class A, class B>
void require_same_space(const A& a, const B& b, const char* op) {
  if (a.measures() != b.measures() || a.size() != b.size())
    throw ContractViolation(std::string(op) + ": operands live on different meshes");
}

} // namespace detail

/// (u, v)_M = sum_e u_e |Omega_e| v_e
inline double inner_product(const PrimalField& u, const PrimalField& v) {
  detail::require_same_space(u, v, "inner_product");
  CompensatedSum s;
  for (std::size_t e = 0; e < u.size(); ++e)
    s += u.measure(e) * (u[e] * v[e]);
  return s.value();
}

inline double primal_norm(const PrimalField& u) { return std::sqrt(inner_product(u, u)); }

/// ||F||_{M^-1}
inline double dual_norm(const DualField& f) {
  CompensatedSum s;
  for (std::size_t e = 0; e < f.size(); ++e)
    s += f[e] * f[e] / f.measure(e);
  return std::sqrt(s.value());
}

/// Gradient from derivative: M^-1 F.
inline PrimalField riesz_inverse(const DualField& f) {
  PrimalField u(f.measures());
  for (std::size_t e = 0; e < f.size(); ++e)
    u[e] = f[e] / f.measure(e);
  return u;
}

/// M u
inline DualField riesz_forward(const PrimalField& u) {
  DualField f(u.measures());
  for (std::size_t e = 0; e < u.size(); ++e)
    f[e] = u[e] * u.measure(e);
  return f;
}

/// F(v) = F^T v
inline double dual_pairing(const DualField& f, const PrimalField& v) {
  detail::require_same_space(f, v, "dual_pairing");
  CompensatedSum s;
  for (std::size_t e = 0; e < f.size(); ++e)
    s += f[e] * v[e];
  return s.value();
}

/// Integral of u over the domain.
inline double integrate(const PrimalField& u) {
  CompensatedSum s;
  for (std::size_t e = 0; e < u.size(); ++e)
    s += u[e] * u.measure(e);
  return s.value();
}

/// Space the optimizer works in. `rn` replaces the mass matrix by the
/// identity everywhere inside the algorithm.
enum class SpaceMode { l2, rn };

inline const char* to_string(SpaceMode mode) { return mode == SpaceMode::l2 ? "l2" : "rn"; }

inline SpaceMode parse_space_mode(const std::string& s) {
  if (s == "l2")
    return SpaceMode::l2;
  if (s == "rn")
    return SpaceMode::rn;
  throw ContractViolation("unknown space mode '" + s + "' (expected l2 or rn)");
}

} // namespace gcmma
