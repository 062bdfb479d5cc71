#pragma once

#include <stdexcept>
#include <string>

namespace mixvol {

/// Failure classes. Each maps onto one CLI exit status.
enum class ErrorKind {
    input = 2,        // malformed input, violated precondition, domain error
    calibration = 3,  // data admits no (or no acceptable) model
    verification = 4, // a numerical check failed
    internal = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

struct InputError : Error {
    explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

/// Grid too narrow or too coarse for the requested accuracy.
struct GridError : Error {
    explicit GridError(const std::string& what) : Error(ErrorKind::input, what) {}
};

struct CalibrationError : Error {
    explicit CalibrationError(const std::string& what) : Error(ErrorKind::calibration, what) {}
};

struct VerificationError : Error {
    explicit VerificationError(const std::string& what) : Error(ErrorKind::verification, what) {}
};

[[noreturn]] void fail_input(const std::string& what);
void require(bool cond, const std::string& what);

} // namespace mixvol
