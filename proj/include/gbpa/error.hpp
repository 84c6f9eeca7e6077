#pragma once

#include <stdexcept>
#include <string>

namespace gbpa {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument (range, size, finiteness) was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// The safeguarded dual solve did not reach tolerance.
class RootFindError : public Error {
 public:
  RootFindError(const std::string& what, double lo, double hi)
      : Error(what + " (bracket [" + std::to_string(lo) + ", " +
              std::to_string(hi) + "])"),
        lo_(lo),
        hi_(hi) {}

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

// A numeric identity that must hold (e.g. a non-negative Bregman divergence)
// was violated beyond tolerance.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace detail
}  // namespace gbpa
