#pragma once

#include <stdexcept>
#include <string>

namespace mmhp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input: bad parameters, unordered event times, out-of-range indices.
class InvalidInput : public Error {
public:
    using Error::Error;
};

// A computation produced a non-finite or non-positive quantity.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what, long interval = -1)
        : Error(interval >= 0 ? what + " (interval " + std::to_string(interval) + ")" : what),
          interval_(interval) {}

    // 1-based interval index, or -1 when not tied to an interval.
    long interval() const noexcept { return interval_; }

private:
    long interval_;
};

// The E-step assigned (almost) no occupancy time to a hidden state.
class StateStarvation : public NumericalError {
public:
    explicit StateStarvation(int state)
        : NumericalError("hidden state " + std::to_string(state + 1) + " received no occupancy"),
          state_(state) {}

    int state() const noexcept { return state_; }

private:
    int state_;
};

class DecodeError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace mmhp
