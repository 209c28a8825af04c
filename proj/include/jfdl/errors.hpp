#ifndef JFDL_ERRORS_HPP
#define JFDL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace jfdl {

// Invalid configuration or arguments (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input outside an operation's mathematical domain (t out of range, unknown
// class, t=0 singularities, degenerate samples).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Backend cannot perform the requested operation (e.g. forward transport on a
// trained model, omega on a model without a guidance pathway).
struct CapabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values produced where finite ones are required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operation not valid in the object's current state.
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched dimensions between parameter vectors / states.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace jfdl

#endif
