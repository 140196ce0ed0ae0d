#pragma once

#include <stdexcept>
#include <string>

namespace gmtlab {

/// Caller passed a value outside the documented parameter range.
struct parameter_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Input data violates a documented contract (points outside the box,
/// support-ball violations, malformed files).
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A named precondition of an estimate-style operation failed.
/// `name` identifies which hypothesis broke.
struct precondition_error : std::runtime_error {
    std::string name;
    precondition_error(std::string n, const std::string& what)
        : std::runtime_error(what), name(std::move(n)) {}
};

} // namespace gmtlab
