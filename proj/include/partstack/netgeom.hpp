#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace partstack {

struct LayerSpec {
  std::string name;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
};

// Receptive-field geometry of a layer stack: side length in input pixels,
// jump (product of strides) between neighboring output units, and the input
// coordinate of the center of output unit 0. The center of input pixel (0,0)
// is coordinate (0,0); centers may be sub-pixel reals.
struct RFSpec {
  int size = 1;
  int jump = 1;
  double start = 0.0;
};

// Regular grid of receptive-field centers, treated as candidate keypoints.
struct CandidateGrid {
  int rows = 0;
  int cols = 0;
  int jump = 1;
  double start = 0.0;

  std::pair<double, double> center(int i, int j) const {
    return {start + static_cast<double>(i) * jump, start + static_cast<double>(j) * jump};
  }
};

// Folds the stack into one RFSpec: starting from (size 1, jump 1, start 0),
// each layer (k,s,p) applies size += (k-1)*jump; start += ((k-1)/2 - p)*jump;
// jump *= s. Composition is associative; the empty stack is the identity.
RFSpec compose_rf(std::span<const LayerSpec> stack);

// Spatial output size of the stack for a square input, via
// floor((in + 2p - k)/s) + 1 per layer. Throws if any layer yields a
// nonpositive dim.
int output_dim(std::span<const LayerSpec> stack, int input_size);

CandidateGrid candidate_grid(const RFSpec& rf, int rows, int cols);

// Convenience: grid dims from the stack's own shape rule.
CandidateGrid candidate_grid_for_stack(std::span<const LayerSpec> stack, int input_size);

// One layer per line: `name kernel stride padding`; `#` starts a comment.
std::vector<LayerSpec> parse_layer_file(const std::filesystem::path& path);
std::vector<LayerSpec> parse_layer_text(const std::string& text, const std::string& origin = "<text>");

}  // namespace partstack
