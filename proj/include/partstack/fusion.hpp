#pragma once

#include <string>
#include <vector>

#include "partstack/tape.hpp"

namespace partstack {

// Branch fusion strategies. FC concatenates every branch slot; SS sums, SM
// takes the elementwise max, SMM concatenates elementwise mean and max.
enum class FusionMode { FC, SS, SM, SMM };

FusionMode fusion_from_string(const std::string& s);
std::string fusion_to_string(FusionMode mode);

// Output length for `branches` slots of width d.
int fused_length(FusionMode mode, int branches, int d);

// branches: fixed-order slots (object first, then parts by index), each
// [1, d]. Only branches with present[i] participate in the reductions; FC
// zero-fills absent slots so the output length stays fixed. present[0] (the
// object branch) must be true. SM ties route the gradient to the lowest
// branch index.
TensorPtr fuse(Tape& tape, const std::vector<TensorPtr>& branches,
               const std::vector<char>& present, FusionMode mode);

}  // namespace partstack
