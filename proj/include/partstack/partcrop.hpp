#pragma once

#include <vector>

#include "partstack/locnet.hpp"
#include "partstack/tape.hpp"
#include "partstack/tensor.hpp"

namespace partstack {

struct CropSpec {
  int rows = 7;
  int cols = 7;
};

// Window placement resolved against the feature map: nominally centered on
// the detected location, shifted minimally to lie fully inside.
struct CropWindow {
  int row0 = 0;
  int col0 = 0;
  bool present = false;
};

CropWindow resolve_crop_window(const PartDetection& loc, const CropSpec& spec, int map_rows,
                               int map_cols);

// Crops of one feature map, one per part; absent parts carry a zero-filled
// crop and present=false.
struct PartCrops {
  std::vector<TensorPtr> crops;     // each [1, C, l, h]
  std::vector<char> present;
  std::vector<CropWindow> windows;
};

// features: [1, C, H, W]. The backward pass scatters every crop gradient back
// to its window and sums where windows overlap; positions outside all windows
// receive zero, and absent parts contribute nothing.
PartCrops part_crop(Tape& tape, const TensorPtr& features, const PartLocations& locs,
                    const CropSpec& spec);

// Tape-free forms of the same gather/scatter pair, used by adjoint checks.
Tensor crop_window_values(const Tensor& features, const CropWindow& window, const CropSpec& spec);
void scatter_add_window(Tensor& features_grad, const Tensor& crop_grad, const CropWindow& window);

}  // namespace partstack
