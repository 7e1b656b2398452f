#include "partstack/partcrop.hpp"

#include <algorithm>
#include <stdexcept>

namespace partstack {

CropWindow resolve_crop_window(const PartDetection& loc, const CropSpec& spec, int map_rows,
                               int map_cols) {
  if (spec.rows > map_rows || spec.cols > map_cols)
    throw std::invalid_argument("part_crop: window " + std::to_string(spec.rows) + "x" +
                                std::to_string(spec.cols) + " larger than feature map " +
                                std::to_string(map_rows) + "x" + std::to_string(map_cols));
  CropWindow win;
  if (!loc.present()) return win;
  if (loc.row >= map_rows || loc.col >= map_cols)
    throw std::invalid_argument("part_crop: location (" + std::to_string(loc.row) + "," +
                                std::to_string(loc.col) + ") outside feature map " +
                                std::to_string(map_rows) + "x" + std::to_string(map_cols));
  win.present = true;
  win.row0 = std::clamp(loc.row - (spec.rows - 1) / 2, 0, map_rows - spec.rows);
  win.col0 = std::clamp(loc.col - (spec.cols - 1) / 2, 0, map_cols - spec.cols);
  return win;
}

Tensor crop_window_values(const Tensor& features, const CropWindow& window, const CropSpec& spec) {
  const int c = features.dim(1), h = features.dim(2), w = features.dim(3);
  Tensor crop({1, c, spec.rows, spec.cols});
  if (!window.present) return crop;
  for (int ic = 0; ic < c; ++ic)
    for (int i = 0; i < spec.rows; ++i)
      for (int j = 0; j < spec.cols; ++j)
        crop.values[(static_cast<std::size_t>(ic) * spec.rows + i) * spec.cols + j] =
            features.values[(static_cast<std::size_t>(ic) * h + window.row0 + i) * w + window.col0 + j];
  return crop;
}

void scatter_add_window(Tensor& features_grad, const Tensor& crop_grad, const CropWindow& window) {
  if (!window.present) return;
  const int c = features_grad.dim(1), h = features_grad.dim(2), w = features_grad.dim(3);
  const int l = crop_grad.dim(2), m = crop_grad.dim(3);
  if (crop_grad.dim(1) != c)
    throw std::invalid_argument("scatter_add_window: channel mismatch (" + crop_grad.shape_string() +
                                " into " + features_grad.shape_string() + ")");
  if (window.row0 + l > h || window.col0 + m > w)
    throw std::invalid_argument("scatter_add_window: window exceeds feature map bounds");
  for (int ic = 0; ic < c; ++ic)
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < m; ++j)
        features_grad.values[(static_cast<std::size_t>(ic) * h + window.row0 + i) * w + window.col0 + j] +=
            crop_grad.values[(static_cast<std::size_t>(ic) * l + i) * m + j];
}

PartCrops part_crop(Tape& tape, const TensorPtr& features, const PartLocations& locs,
                    const CropSpec& spec) {
  if (features->rank() != 4 || features->dim(0) != 1)
    throw std::invalid_argument("part_crop: features must be [1,C,H,W], got " +
                                features->shape_string());
  const int c = features->dim(1), h = features->dim(2), w = features->dim(3);

  PartCrops out;
  out.crops.reserve(locs.size());
  out.present.reserve(locs.size());
  out.windows.reserve(locs.size());
  features->ensure_grad();

  for (const auto& loc : locs) {
    const CropWindow win = resolve_crop_window(loc, spec, h, w);
    out.windows.push_back(win);
    out.present.push_back(win.present ? 1 : 0);

    auto crop = make_tensor({1, c, spec.rows, spec.cols});
    if (win.present) {
      for (int ic = 0; ic < c; ++ic)
        for (int i = 0; i < spec.rows; ++i)
          for (int j = 0; j < spec.cols; ++j)
            crop->values[(static_cast<std::size_t>(ic) * spec.rows + i) * spec.cols + j] =
                features->values[(static_cast<std::size_t>(ic) * h + win.row0 + i) * w + win.col0 + j];
      crop->ensure_grad();
      const CropSpec sp = spec;
      tape.record([features, crop, win, sp, c, h, w]() {
        for (int ic = 0; ic < c; ++ic)
          for (int i = 0; i < sp.rows; ++i)
            for (int j = 0; j < sp.cols; ++j)
              features->grad[(static_cast<std::size_t>(ic) * h + win.row0 + i) * w + win.col0 + j] +=
                  crop->grad[(static_cast<std::size_t>(ic) * sp.rows + i) * sp.cols + j];
      });
    }
    out.crops.push_back(std::move(crop));
  }
  return out;
}

}  // namespace partstack
