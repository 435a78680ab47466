#pragma once

#include <stdexcept>
#include <string>

namespace bsol {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input validation (bad spec, bad payoff, bad arguments).  The CLI maps
// these to exit code 2.
struct ValidationError : Error {
    using Error::Error;
};

struct InvalidSpec : ValidationError {
    using ValidationError::ValidationError;
};

// Problem-spec text could not be parsed.  Carries a 1-based position.
struct ParseError : ValidationError {
    int line;
    int column;
    ParseError(int line_, int column_, const std::string& message)
        : ValidationError("parse error at " + std::to_string(line_) + ":" +
                          std::to_string(column_) + ": " + message),
          line(line_),
          column(column_) {}
};

// Numeric failures.  The CLI maps these to exit code 3.
struct NumericError : Error {
    using Error::Error;
};

struct NonConvergence : NumericError {
    using NumericError::NumericError;
};

struct DivergentIntegral : NumericError {
    using NumericError::NumericError;
};

struct QuadratureFailure : NumericError {
    using NumericError::NumericError;
};

struct DegenerateBracket : NumericError {
    using NumericError::NumericError;
};

struct PlateauViolation : NumericError {
    using NumericError::NumericError;
};

struct AssumptionViolated : NumericError {
    using NumericError::NumericError;
};

struct DerivativeUnavailable : ValidationError {
    using ValidationError::ValidationError;
};

struct UnsupportedBoundaryCombination : ValidationError {
    using ValidationError::ValidationError;
};

struct HorizonExhausted : NumericError {
    using NumericError::NumericError;
};

struct MCNonConvergence : NumericError {
    using NumericError::NumericError;
};

struct GoldenMismatch : NumericError {
    using NumericError::NumericError;
};

}  // namespace bsol
