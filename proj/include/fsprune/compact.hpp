#pragma once

#include "fsprune/checkpoint.hpp"

namespace fsprune {

/// Rebuilds `network` with frozen conv kernels physically removed: their output
/// channels, the matching input-channel slices of the next conv layer, and the
/// matching input rows of the first linear layer after flatten. Frozen kernels
/// must already be zero (weights and bias); otherwise, or when the mask does
/// not fit the network, throws std::invalid_argument.
Network compact_network(const Network& network, const KernelMask& mask);

/// Compacted checkpoint with an all-active mask and zeroed momentum; config and
/// history carried over.
Checkpoint export_pruned(const Checkpoint& checkpoint);

}  // namespace fsprune
