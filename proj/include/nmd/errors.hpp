#pragma once

#include <stdexcept>

namespace nmd {

/// Geometry outside the domain where a force can be evaluated. Rollouts stop
/// at the last valid snapshot instead of propagating the error.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nmd
