#pragma once

#include <stdexcept>
#include <string>

namespace alm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented invariant (shape, symmetry, simplex, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Non-finite intermediate, overflow, or divergence during a computation.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Market parameters produce an invalid Gaussian law.
class ModelError : public Error {
public:
    using Error::Error;
};

/// Linear system is singular or too ill-conditioned to solve.
class SolverError : public Error {
public:
    using Error::Error;
};

/// The mean-surplus floor cannot be reached by any budget-feasible portfolio.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, double unconstrained_surplus)
        : Error(what), unconstrained_surplus_(unconstrained_surplus) {}

    /// Expected surplus of the portfolio that ignores the mean constraint.
    double unconstrained_surplus() const noexcept { return unconstrained_surplus_; }

private:
    double unconstrained_surplus_;
};

/// Too many replications of an experiment cell failed.
class ExperimentError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace alm
