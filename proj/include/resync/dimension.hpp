#pragma once

#include <Eigen/Core>

#include <utility>

namespace resync {

/// Calls fn.template operator()<D>() with D = 2, 3, or Eigen::Dynamic for
/// any other d, so runtime dimensions reach the fixed-size code paths.
template <class Fn>
decltype(auto) with_dimension(int d, Fn&& fn) {
  switch (d) {
    case 2: return std::forward<Fn>(fn).template operator()<2>();
    case 3: return std::forward<Fn>(fn).template operator()<3>();
    default: return std::forward<Fn>(fn).template operator()<Eigen::Dynamic>();
  }
}

}  // namespace resync
