#pragma once

#include <stdexcept>
#include <string>

namespace s2l {

/// Raised for contract violations and unusable input across the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace s2l
