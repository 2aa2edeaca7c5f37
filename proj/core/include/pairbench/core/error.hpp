#pragma once

#include <stdexcept>
#include <string>

namespace pairbench {

// Every engine failure surfaces as Error; the message carries the context
// (line numbers, row indices, mismatched counts).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pairbench
