#pragma once

#include "lfqv/rng.hpp"
#include "lfqv/tensor.hpp"

namespace lfqv::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace lfqv::testing
