#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hashtran {

// Two objects that must agree on a dimension do not.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A record file failed to parse or validate. `line()` is 1-based, 0 when unknown.
class FormatError : public std::runtime_error {
public:
    FormatError(std::size_t line, const std::string &what)
        : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Operation was asked to run on an object that is not in a usable state
// (an uncalibrated model, a stale cache, an exhausted attack budget).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline void require_same_dim(std::size_t a, std::size_t b, const char *what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

} // namespace hashtran
