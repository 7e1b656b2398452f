#include "partstack/netgeom.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "partstack/errors.hpp"

namespace partstack {

RFSpec compose_rf(std::span<const LayerSpec> stack) {
  RFSpec rf;
  for (const auto& layer : stack) {
    if (layer.kernel < 1 || layer.stride < 1 || layer.padding < 0)
      throw std::invalid_argument("compose_rf: invalid layer '" + layer.name + "' (kernel " +
                                  std::to_string(layer.kernel) + ", stride " +
                                  std::to_string(layer.stride) + ", padding " +
                                  std::to_string(layer.padding) + ")");
    rf.size += (layer.kernel - 1) * rf.jump;
    rf.start += ((layer.kernel - 1) / 2.0 - layer.padding) * rf.jump;
    rf.jump *= layer.stride;
  }
  return rf;
}

int output_dim(std::span<const LayerSpec> stack, int input_size) {
  int dim = input_size;
  for (const auto& layer : stack) {
    dim = (dim + 2 * layer.padding - layer.kernel) / layer.stride + 1;
    if (dim <= 0)
      throw std::invalid_argument("output_dim: layer '" + layer.name +
                                  "' yields nonpositive spatial dim for input " +
                                  std::to_string(input_size));
  }
  return dim;
}

CandidateGrid candidate_grid(const RFSpec& rf, int rows, int cols) {
  if (rows <= 0 || cols <= 0)
    throw std::invalid_argument("candidate_grid: nonpositive grid dims " + std::to_string(rows) +
                                "x" + std::to_string(cols));
  CandidateGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.jump = rf.jump;
  grid.start = rf.start;
  return grid;
}

CandidateGrid candidate_grid_for_stack(std::span<const LayerSpec> stack, int input_size) {
  const int dim = output_dim(stack, input_size);
  return candidate_grid(compose_rf(stack), dim, dim);
}

std::vector<LayerSpec> parse_layer_text(const std::string& text, const std::string& origin) {
  std::vector<LayerSpec> layers;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    LayerSpec spec;
    if (!(ls >> spec.name)) continue;  // blank or comment-only line
    if (!(ls >> spec.kernel >> spec.stride >> spec.padding))
      throw IoError(origin + ":" + std::to_string(lineno) +
                    ": expected `name kernel stride padding`, got '" + line + "'");
    std::string extra;
    if (ls >> extra)
      throw IoError(origin + ":" + std::to_string(lineno) + ": trailing token '" + extra + "'");
    if (spec.kernel < 1 || spec.stride < 1 || spec.padding < 0)
      throw IoError(origin + ":" + std::to_string(lineno) + ": invalid layer parameters");
    layers.push_back(std::move(spec));
  }
  return layers;
}

std::vector<LayerSpec> parse_layer_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open layer file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_layer_text(buf.str(), path.string());
}

}  // namespace partstack
