#pragma once

// Joint action types shared between the environment and the controllers.

#include <span>
#include <string>
#include <vector>

namespace peatsim {

/// Decoded joint action. All per-device vectors follow `selection` order.
struct ActionBundle {
  std::vector<int> selection;
  std::vector<int> bandwidth_levels;  // 1..L
  std::vector<int> power_levels;      // 1..L
  std::vector<double> retentions;     // values from the retention grid

  friend bool operator==(const ActionBundle&, const ActionBundle&) = default;
};

/// How a branch's action is appended to the state fed to the next branch.
enum class BranchEncoding { kMask, kShare, kNone };

struct BranchSpec {
  enum class Kind { kSelection, kPerDevice };

  Kind kind = Kind::kSelection;
  int num_devices = 0;
  int select_k = 0;   // kSelection: number of distinct devices drawn
  int choices = 0;    // kPerDevice: options per selected device
  BranchEncoding encoding = BranchEncoding::kNone;
  std::string name;

  /// Width of the logit vector this branch's head produces.
  int logit_count() const { return kind == Kind::kSelection ? num_devices : num_devices * choices; }
  /// Width of this branch's contribution to the chained state.
  int encoding_size() const { return encoding == BranchEncoding::kNone ? 0 : num_devices; }
};

/// Raw per-branch indices. Group 0 is the ordered selection; every other group
/// holds one choice index (0-based) per selected device, in selection order.
struct BranchActions {
  std::vector<std::vector<int>> groups;

  const std::vector<int>& selection() const { return groups.at(0); }
  friend bool operator==(const BranchActions&, const BranchActions&) = default;
};

/// Writes the N-wide encoding of `choice` (a branch action) into `out`.
/// Share encoding maps 0-based level indices to level/(sum of selected levels).
void encode_branch(const BranchSpec& spec, std::span<const int> choice,
                   std::span<const int> selection, std::span<double> out);

}  // namespace peatsim
