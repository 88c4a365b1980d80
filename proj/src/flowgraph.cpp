#include "flowconv/flowgraph.hpp"

#include <algorithm>

namespace flowconv {

std::vector<int> receptive_field(const SparseFlowMatrix& f, int region) {
  if (region < 0 || region >= f.n)
    throw RangeError("receptive_field: region " + std::to_string(region) + " outside [0, " + std::to_string(f.n) + ")");
  std::vector<int> field;
  for (const auto& e : f.entries) {
    if (e.src == region && e.dst != region) field.push_back(e.dst);
    if (e.dst == region && e.src != region) field.push_back(e.src);
  }
  std::sort(field.begin(), field.end());
  field.erase(std::unique(field.begin(), field.end()), field.end());
  return field;
}

}  // namespace flowconv
