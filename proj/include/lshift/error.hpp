#pragma once

#include <stdexcept>
#include <string>

namespace lshift {

/// Bad input: malformed files, violated preconditions, unknown ids.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical routine failed (non-convergence, singular systems, collapse).
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw ValidationError(msg);
}

} // namespace detail
} // namespace lshift
