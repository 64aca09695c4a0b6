#pragma once

#include <cstddef>

namespace icegan {

// Length of a model input vector.
inline constexpr std::size_t kFeatureCount = 28;

}  // namespace icegan
