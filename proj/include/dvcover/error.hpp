#pragma once

#include <stdexcept>
#include <string>

namespace dvcover {

/// Malformed input: bad descriptor, parameter out of range, unknown key.
class ValidationError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// A well-formed request the library declines to run: a work budget would
/// be exceeded, or a standing hypothesis of the criterion is not met.
class Refusal : public std::runtime_error
{
public:
    enum class Reason { budget_exceeded, precondition_failed };

    Refusal(Reason reason, const std::string& message) : std::runtime_error(message), reason_(reason) {}

    Reason reason() const noexcept { return reason_; }

    const char* reason_name() const noexcept
    {
        return reason_ == Reason::budget_exceeded ? "budget_exceeded" : "precondition_failed";
    }

private:
    Reason reason_;
};

} // namespace dvcover
