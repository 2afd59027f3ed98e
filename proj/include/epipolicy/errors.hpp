#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace epipolicy {

/// A documented precondition of an operation was violated by its inputs.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a quantity that only exists for an epidemic (R0 > 1) is requested.
class NoEpidemicError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An exhaustive search was asked to visit more schedules than its guard allows.
class SearchTooLargeError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Scenario file could not be parsed or failed validation. `field()` names the
/// offending key path (e.g. `params.r0`), `line()` is 1-based or 0 when unknown.
class ScenarioError : public std::runtime_error {
public:
    ScenarioError(std::string field, const std::string& message, int line = 0)
        : std::runtime_error(format(field, message, line)), field_(std::move(field)), line_(line) {}

    const std::string& field() const noexcept { return field_; }
    int line() const noexcept { return line_; }

private:
    static std::string format(const std::string& field, const std::string& message, int line) {
        std::string out;
        if (line > 0) {
            out += "line " + std::to_string(line) + ": ";
        }
        if (!field.empty()) {
            out += field + ": ";
        }
        return out + message;
    }

    std::string field_;
    int line_;
};

} // namespace epipolicy
