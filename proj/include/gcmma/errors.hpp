#pragma once

#include <stdexcept>
#include <string>

namespace gcmma {

/// Precondition broken by the caller (mismatched meshes, missing history, ...).
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Argument outside the domain where an expression is defined,
/// e.g. a design value on or beyond an asymptote.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed to make progress.
class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DegenerateCurvature : public SolverError {
public:
  using SolverError::SolverError;
};

class LineSearchFailure : public SolverError {
public:
  using SolverError::SolverError;
};

class NonConvergence : public SolverError {
public:
  using SolverError::SolverError;
};

class SingularSystem : public SolverError {
public:
  using SolverError::SolverError;
};

/// Objective/constraint evaluation failed inside the optimizer; the message
/// carries the outer/inner iteration where it happened.
class EvaluationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace gcmma
