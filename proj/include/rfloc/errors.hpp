#pragma once

#include <stdexcept>
#include <string>

namespace rfloc {

/// Bad arguments or violated preconditions. CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Failed factorizations, non-convergence, degenerate geometry. Exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable/unwritable files, malformed file contents. Exit code 4.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace rfloc
