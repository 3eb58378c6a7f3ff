#pragma once

#include <stdexcept>
#include <string>

namespace fsprune {

/// Operand shapes do not satisfy an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The kernel norm vector (or one normalization unit of it) is identically
/// zero, so ratios and normalizations are undefined.
class DegenerateNetworkError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed dataset, checkpoint, or report file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fsprune
