#pragma once

#include <stdexcept>
#include <string>

namespace lorenzlab {

/// Base of every error raised by the library. The CLI maps ConfigError to
/// exit status 2 and everything else to 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise inadmissible numeric input.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Bad argument shape: empty inputs, mismatched partitions, broken preconditions.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// The trajectory sits on the stable manifold of the singularity and never
/// leaves the linear region.
class StableManifoldError : public Error {
public:
    using Error::Error;
};

class BudgetError : public Error {
public:
    using Error::Error;
};

class BlowUpError : public Error {
public:
    using Error::Error;
};

/// Evaluation of a one-dimensional map at its discontinuity/critical point.
class CriticalPointError : public Error {
public:
    using Error::Error;
};

/// Degenerate derivative (e.g. Schwarzian with T' = 0).
class SingularityError : public Error {
public:
    using Error::Error;
};

/// The gluing jump leaves the cross-section: the translation constant c or
/// the expansion rho is inconsistent with the section bounds.
class GluingError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Tangent frame became numerically degenerate between renormalizations.
class RenormalizationError : public Error {
public:
    using Error::Error;
};

/// A trajectory sample left the histogram grid (trapping-region violation).
class EscapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace lorenzlab
