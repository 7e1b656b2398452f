#include "partstack/locnet.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "partstack/errors.hpp"

namespace partstack {

LabelMap build_label_map(const KeypointAnnotation& ann, const CandidateGrid& grid,
                         double assignment_radius, int* empty_warnings) {
  if (assignment_radius <= 0.0)
    throw std::invalid_argument("build_label_map: assignment_radius must be positive");
  LabelMap map(grid.rows, grid.cols);

  bool any_visible = false;
  for (const auto& kp : ann.parts) any_visible |= kp.visible;
  if (!any_visible) {
    if (empty_warnings) ++*empty_warnings;
    return map;
  }

  for (int i = 0; i < grid.rows; ++i) {
    for (int j = 0; j < grid.cols; ++j) {
      const auto [cy, cx] = grid.center(i, j);
      double best_d = std::numeric_limits<double>::infinity();
      int best_part = 0;
      for (int p = 0; p < ann.num_parts(); ++p) {
        const auto& kp = ann.parts[static_cast<std::size_t>(p)];
        if (!kp.visible) continue;
        const double d = std::hypot(kp.y - cy, kp.x - cx);
        if (d < best_d) {  // strict: ties keep the lowest part index
          best_d = d;
          best_part = p + 1;
        }
      }
      map.at(i, j) = best_d <= assignment_radius ? best_part : 0;
    }
  }
  return map;
}

TensorPtr loc_loss(Tape& tape, const TensorPtr& logits, const LabelMap& labels) {
  if (logits->rank() != 4 || logits->dim(0) != 1)
    throw std::invalid_argument("loc_loss: logits must be [1,C,h,w], got " + logits->shape_string());
  const int c = logits->dim(1), h = logits->dim(2), w = logits->dim(3);
  if (labels.rows != h || labels.cols != w)
    throw std::invalid_argument("loc_loss: label map " + std::to_string(labels.rows) + "x" +
                                std::to_string(labels.cols) + " does not match logits " +
                                logits->shape_string());

  auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(c) * h * w);
  double loss = 0.0;
  std::vector<double> col(static_cast<std::size_t>(c));
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const int label = labels.at(i, j);
      if (label < 0 || label >= c)
        throw std::invalid_argument("loc_loss: label " + std::to_string(label) +
                                    " out of range [0," + std::to_string(c) + ") at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
      for (int ch = 0; ch < c; ++ch)
        col[static_cast<std::size_t>(ch)] = logits->values[(static_cast<std::size_t>(ch) * h + i) * w + j];
      const auto sm = softmax_row(col.data(), c);
      loss -= std::log(sm[static_cast<std::size_t>(label)]);
      for (int ch = 0; ch < c; ++ch)
        (*probs)[(static_cast<std::size_t>(ch) * h + i) * w + j] = sm[static_cast<std::size_t>(ch)];
    }
  }

  auto out = make_tensor({1}, {loss});
  logits->ensure_grad();
  out->ensure_grad();
  LabelMap labels_copy = labels;
  tape.record([logits, out, probs, labels_copy, c, h, w]() {
    const double g = out->grad[0];
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const int label = labels_copy.at(i, j);
        for (int ch = 0; ch < c; ++ch) {
          const std::size_t idx = (static_cast<std::size_t>(ch) * h + i) * w + j;
          logits->grad[idx] += g * ((*probs)[idx] - (ch == label ? 1.0 : 0.0));
        }
      }
  });
  return out;
}

HeatmapStack position_softmax(const Tensor& logits) {
  if (logits.rank() != 4 || logits.dim(0) != 1)
    throw std::invalid_argument("position_softmax: logits must be [1,C,h,w], got " +
                                logits.shape_string());
  const int c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  HeatmapStack maps(c, h, w);
  std::vector<double> col(static_cast<std::size_t>(c));
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      for (int ch = 0; ch < c; ++ch)
        col[static_cast<std::size_t>(ch)] = logits.values[(static_cast<std::size_t>(ch) * h + i) * w + j];
      const auto sm = softmax_row(col.data(), c);
      for (int ch = 0; ch < c; ++ch) maps.at(ch, i, j) = sm[static_cast<std::size_t>(ch)];
    }
  return maps;
}

HeatmapStack smooth(const HeatmapStack& maps, double sigma, int support) {
  if (support % 2 == 0) throw std::invalid_argument("smooth: support must be odd, got " + std::to_string(support));
  if (sigma <= 0.0) throw std::invalid_argument("smooth: sigma must be positive");

  const int half = support / 2;
  std::vector<double> kernel(static_cast<std::size_t>(support) * support);
  double total = 0.0;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx) {
      const double v = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
      kernel[static_cast<std::size_t>(dy + half) * support + (dx + half)] = v;
      total += v;
    }
  for (auto& v : kernel) v /= total;

  HeatmapStack out(maps.channels, maps.rows, maps.cols);
  for (int c = 0; c < maps.channels; ++c)
    for (int i = 0; i < maps.rows; ++i)
      for (int j = 0; j < maps.cols; ++j) {
        double acc = 0.0;
        for (int dy = -half; dy <= half; ++dy)
          for (int dx = -half; dx <= half; ++dx) {
            const int si = std::min(std::max(i + dy, 0), maps.rows - 1);
            const int sj = std::min(std::max(j + dx, 0), maps.cols - 1);
            acc += maps.at(c, si, sj) * kernel[static_cast<std::size_t>(dy + half) * support + (dx + half)];
          }
        out.at(c, i, j) = acc;
      }
  return out;
}

PartLocations infer_parts(const HeatmapStack& smoothed, double mu) {
  if (smoothed.channels < 2)
    throw std::invalid_argument("infer_parts: need background plus at least one part channel");
  PartLocations locs(static_cast<std::size_t>(smoothed.channels - 1));
  for (int c = 1; c < smoothed.channels; ++c) {
    double best = -1.0;
    int bi = -1, bj = -1;
    for (int i = 0; i < smoothed.rows; ++i)
      for (int j = 0; j < smoothed.cols; ++j)
        if (smoothed.at(c, i, j) > best) {
          best = smoothed.at(c, i, j);
          bi = i;
          bj = j;
        }
    auto& det = locs[static_cast<std::size_t>(c - 1)];
    if (best > mu) {
      det.row = bi;
      det.col = bj;
      det.confidence = best;
    } else {
      det = PartDetection{};  // sentinel
      det.confidence = best;
    }
  }
  return locs;
}

std::vector<PixelPoint> grid_to_pixels(const PartLocations& locs, const RFSpec& rf) {
  std::vector<PixelPoint> points(locs.size());
  for (std::size_t p = 0; p < locs.size(); ++p) {
    if (!locs[p].present()) continue;
    points[p].present = true;
    points[p].y = rf.start + static_cast<double>(locs[p].row) * rf.jump;
    points[p].x = rf.start + static_cast<double>(locs[p].col) * rf.jump;
  }
  return points;
}

double default_mu(int num_parts) { return 2.0 / (num_parts + 1); }

std::vector<KeypointAnnotation> read_keypoint_file(const std::filesystem::path& path,
                                                   int image_height, int image_width) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open keypoint file " + path.string());

  // image_id -> (part_id -> keypoint); parts may arrive in any order.
  std::map<int, std::map<int, Keypoint>> images;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int image_id = 0, part_id = 0, visible = 0;
    double y = 0.0, x = 0.0;
    if (!(ls >> image_id >> part_id >> y >> x >> visible))
      throw IoError(path.string() + ":" + std::to_string(lineno) +
                    ": expected `image_id part_id y x visible`, got '" + line + "'");
    if (part_id < 1)
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": part_id must be >= 1");
    Keypoint kp;
    kp.y = y;
    kp.x = x;
    kp.visible = visible != 0;
    images[image_id][part_id] = kp;
  }

  std::vector<KeypointAnnotation> annotations;
  annotations.reserve(images.size());
  for (const auto& [image_id, parts] : images) {
    KeypointAnnotation ann;
    ann.image_id = image_id;
    ann.height = image_height;
    ann.width = image_width;
    const int max_part = parts.rbegin()->first;
    ann.parts.assign(static_cast<std::size_t>(max_part), Keypoint{});
    for (const auto& [part_id, kp] : parts) ann.parts[static_cast<std::size_t>(part_id - 1)] = kp;
    annotations.push_back(std::move(ann));
  }
  return annotations;
}

void write_keypoint_file(const std::filesystem::path& path,
                         const std::vector<KeypointAnnotation>& annotations) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write keypoint file " + path.string());
  for (const auto& ann : annotations)
    for (int p = 0; p < ann.num_parts(); ++p) {
      const auto& kp = ann.parts[static_cast<std::size_t>(p)];
      if (kp.visible)
        out << ann.image_id << ' ' << p + 1 << ' ' << kp.y << ' ' << kp.x << " 1\n";
      else
        out << ann.image_id << ' ' << p + 1 << " 0 0 0\n";
    }
  if (!out) throw IoError("failed writing keypoint file " + path.string());
}

}  // namespace partstack
