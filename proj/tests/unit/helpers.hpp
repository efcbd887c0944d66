#pragma once

#include <optional>

#include "echogcn/error.hpp"

namespace echogcn::testing {

// Error code thrown by `fn`, if any.
inline std::optional<Errc> thrown(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace echogcn::testing
