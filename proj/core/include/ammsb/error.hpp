#pragma once

#include <stdexcept>
#include <string>

namespace ammsb {

// Raised for invalid input, malformed files and violated preconditions.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ammsb
