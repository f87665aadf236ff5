#pragma once

// Quick invariant suite behind `lfqv selftest`.

#include <string>
#include <vector>

namespace lfqv {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SelftestCheck> run_selftest();

}  // namespace lfqv
