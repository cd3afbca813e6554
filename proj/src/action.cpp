#include "peatsim/action.hpp"

#include <algorithm>

namespace peatsim {

void encode_branch(const BranchSpec& spec, std::span<const int> choice,
                   std::span<const int> selection, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  switch (spec.encoding) {
    case BranchEncoding::kNone:
      return;
    case BranchEncoding::kMask:
      for (int n : choice) out[n] = 1.0;
      return;
    case BranchEncoding::kShare: {
      double total = 0.0;
      for (int c : choice) total += c + 1;
      for (std::size_t k = 0; k < selection.size(); ++k) {
        out[selection[k]] = (choice[k] + 1) / total;
      }
      return;
    }
  }
}

}  // namespace peatsim
