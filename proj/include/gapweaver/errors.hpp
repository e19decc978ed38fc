#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gapweaver {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidPotential : Error {
    using Error::Error;
};

/// Eigensolver or quadrature failure; carries the offending residual norm.
struct NumericalFailure : Error {
    double residual;
    NumericalFailure(const std::string& msg, double res = 0.0) : Error(msg), residual(res) {}
};

struct BracketError : Error {
    using Error::Error;
};

struct DegenerateEigenvalue : Error {
    using Error::Error;
};

struct NoLocalizedSolution : Error {
    using Error::Error;
};

struct TailContamination : Error {
    using Error::Error;
};

/// Newton failed to converge; history holds the residual per iteration.
struct NewtonDivergence : Error {
    std::vector<double> history;
    NewtonDivergence(const std::string& msg, std::vector<double> h = {})
        : Error(msg), history(std::move(h)) {}
};

struct SingularSystem : Error {
    using Error::Error;
};

struct NotBlockDiagonalizable : Error {
    using Error::Error;
};

struct CoverageError : Error {
    using Error::Error;
};

struct CellBudgetExceeded : Error {
    using Error::Error;
};

}  // namespace gapweaver
