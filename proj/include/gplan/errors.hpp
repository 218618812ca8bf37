#pragma once

#include <stdexcept>
#include <string>

namespace gplan {

// Root of the library's exception hierarchy. Every failure that crosses a
// module boundary derives from this so callers can catch one type.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gplan
