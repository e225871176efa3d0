#pragma once

#include <stdexcept>

namespace molmip {

/// Input text that does not match its documented schema.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operation outside the supported envelope (size caps, format limits).
struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace molmip
