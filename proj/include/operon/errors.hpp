#pragma once
#include <stdexcept>
#include <string>

namespace operon {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// bad parameters or configuration
struct ValidationError : Error {
    using Error::Error;
};

struct DomainError : Error {
    using Error::Error;
};

// velocity <= 0 and similar pointwise failures
struct EvaluationError : Error {
    using Error::Error;
};

struct HorizonError : Error {
    using Error::Error;
};

struct BlowUpError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

}  // namespace operon
