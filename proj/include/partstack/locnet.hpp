#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "partstack/netgeom.hpp"
#include "partstack/tape.hpp"

namespace partstack {

struct Keypoint {
  double y = 0.0;
  double x = 0.0;
  bool visible = false;
};

// Per-image part annotations: M keypoints in input-pixel coordinates, with
// invisible entries standing for absent parts.
struct KeypointAnnotation {
  int image_id = 0;
  int height = 0;
  int width = 0;
  std::vector<Keypoint> parts;

  int num_parts() const { return static_cast<int>(parts.size()); }
};

// Ground-truth labels on the candidate grid: 0 = background, 1..M = parts.
struct LabelMap {
  int rows = 0;
  int cols = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(int r, int c) : rows(r), cols(c), labels(static_cast<std::size_t>(r) * c, 0) {}
  int& at(int i, int j) { return labels[static_cast<std::size_t>(i) * cols + j]; }
  int at(int i, int j) const { return labels[static_cast<std::size_t>(i) * cols + j]; }
};

// (M+1)-channel maps, channel-major; channel 0 is background.
struct HeatmapStack {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  HeatmapStack() = default;
  HeatmapStack(int c, int r, int w)
      : channels(c), rows(r), cols(w), data(static_cast<std::size_t>(c) * r * w, 0.0) {}
  double& at(int c, int i, int j) { return data[(static_cast<std::size_t>(c) * rows + i) * cols + j]; }
  double at(int c, int i, int j) const { return data[(static_cast<std::size_t>(c) * rows + i) * cols + j]; }
};

// Detected grid location of one part, or the (-1,-1) sentinel.
struct PartDetection {
  int row = -1;
  int col = -1;
  double confidence = 0.0;

  bool present() const { return row >= 0 && col >= 0; }
};

using PartLocations = std::vector<PartDetection>;

struct PixelPoint {
  double y = 0.0;
  double x = 0.0;
  bool present = false;
};

// Labels every grid cell with the part index (1-based) of the nearest visible
// keypoint if that distance is within assignment_radius, else background.
// Distance ties pick the lowest part index. An annotation with no visible
// keypoints yields an all-background map and bumps *empty_warnings.
LabelMap build_label_map(const KeypointAnnotation& ann, const CandidateGrid& grid,
                         double assignment_radius, int* empty_warnings = nullptr);

// Location-preserving softmax loss: SUM over all h*w positions of
// -log softmax(logits at that position)[label]. logits: [1, M+1, h, w].
TensorPtr loc_loss(Tape& tape, const TensorPtr& logits, const LabelMap& labels);

// Per-position softmax of raw head output [1, C, h, w] into a HeatmapStack.
HeatmapStack position_softmax(const Tensor& logits);

// Per-channel convolution with a normalized truncated Gaussian, replicate
// padding at borders. support must be odd.
HeatmapStack smooth(const HeatmapStack& maps, double sigma, int support);

// Per part channel c in [1, M]: grid argmax of g if strictly above mu, else
// the sentinel. Argmax ties pick the lowest row-major position.
PartLocations infer_parts(const HeatmapStack& smoothed, double mu);

// Grid coordinates to input-pixel coordinates via the grid geometry.
std::vector<PixelPoint> grid_to_pixels(const PartLocations& locs, const RFSpec& rf);

double default_mu(int num_parts);  // 2/(M+1)

// Annotation file: one `image_id part_id y x visible` line per (image, part),
// part_id 1-based, visible 0 marking absent parts.
std::vector<KeypointAnnotation> read_keypoint_file(const std::filesystem::path& path,
                                                   int image_height, int image_width);
void write_keypoint_file(const std::filesystem::path& path,
                         const std::vector<KeypointAnnotation>& annotations);

}  // namespace partstack
