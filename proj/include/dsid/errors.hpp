#pragma once

#include <stdexcept>
#include <string>

namespace dsid {

/// File could not be read or is not a well-formed container (bad magic,
/// unsupported version, truncation, malformed CSV).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Records parsed but violate a dataset invariant (label range, coinciding
/// labels, inconsistent widths).
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dsid
