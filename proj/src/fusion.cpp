#include "partstack/fusion.hpp"

#include <stdexcept>

namespace partstack {

FusionMode fusion_from_string(const std::string& s) {
  if (s == "fc" || s == "FC") return FusionMode::FC;
  if (s == "ss" || s == "SS") return FusionMode::SS;
  if (s == "sm" || s == "SM") return FusionMode::SM;
  if (s == "smm" || s == "SMM") return FusionMode::SMM;
  throw std::invalid_argument("unknown fusion mode '" + s + "' (expected fc|ss|sm|smm)");
}

std::string fusion_to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::FC: return "fc";
    case FusionMode::SS: return "ss";
    case FusionMode::SM: return "sm";
    case FusionMode::SMM: return "smm";
  }
  return "?";
}

int fused_length(FusionMode mode, int branches, int d) {
  switch (mode) {
    case FusionMode::FC: return branches * d;
    case FusionMode::SS:
    case FusionMode::SM: return d;
    case FusionMode::SMM: return 2 * d;
  }
  return 0;
}

TensorPtr fuse(Tape& tape, const std::vector<TensorPtr>& branches,
               const std::vector<char>& present, FusionMode mode) {
  if (branches.empty()) throw std::invalid_argument("fuse: no branches");
  if (present.size() != branches.size())
    throw std::invalid_argument("fuse: mask size " + std::to_string(present.size()) +
                                " != branch count " + std::to_string(branches.size()));
  if (!present[0]) throw std::invalid_argument("fuse: object branch (slot 0) must be present");

  const int b = static_cast<int>(branches.size());
  const int d = branches[0]->size();
  for (const auto& br : branches) {
    if (br->rank() != 2 || br->dim(0) != 1)
      throw std::invalid_argument("fuse: branches must be [1,d], got " + br->shape_string());
    if (br->size() != d)
      throw std::invalid_argument("fuse: branch length " + std::to_string(br->size()) +
                                  " != expected " + std::to_string(d));
    br->ensure_grad();
  }

  int n_present = 0;
  for (char p : present) n_present += p ? 1 : 0;

  auto out = make_tensor({1, fused_length(mode, b, d)});
  out->ensure_grad();

  switch (mode) {
    case FusionMode::FC: {
      for (int i = 0; i < b; ++i) {
        if (!present[static_cast<std::size_t>(i)]) continue;  // slot stays zero
        for (int j = 0; j < d; ++j)
          out->values[static_cast<std::size_t>(i * d + j)] = branches[static_cast<std::size_t>(i)]->values[static_cast<std::size_t>(j)];
      }
      tape.record([branches, present, out, b, d]() {
        for (int i = 0; i < b; ++i) {
          if (!present[static_cast<std::size_t>(i)]) continue;
          for (int j = 0; j < d; ++j)
            branches[static_cast<std::size_t>(i)]->grad[static_cast<std::size_t>(j)] +=
                out->grad[static_cast<std::size_t>(i * d + j)];
        }
      });
      break;
    }
    case FusionMode::SS: {
      for (int i = 0; i < b; ++i) {
        if (!present[static_cast<std::size_t>(i)]) continue;
        for (int j = 0; j < d; ++j)
          out->values[static_cast<std::size_t>(j)] += branches[static_cast<std::size_t>(i)]->values[static_cast<std::size_t>(j)];
      }
      tape.record([branches, present, out, b, d]() {
        for (int i = 0; i < b; ++i) {
          if (!present[static_cast<std::size_t>(i)]) continue;
          for (int j = 0; j < d; ++j)
            branches[static_cast<std::size_t>(i)]->grad[static_cast<std::size_t>(j)] += out->grad[static_cast<std::size_t>(j)];
        }
      });
      break;
    }
    case FusionMode::SM: {
      auto winner = std::make_shared<std::vector<int>>(static_cast<std::size_t>(d), -1);
      for (int j = 0; j < d; ++j) {
        double best = 0.0;
        int who = -1;
        for (int i = 0; i < b; ++i) {
          if (!present[static_cast<std::size_t>(i)]) continue;
          const double v = branches[static_cast<std::size_t>(i)]->values[static_cast<std::size_t>(j)];
          if (who < 0 || v > best) {  // strict: ties keep the lowest branch index
            best = v;
            who = i;
          }
        }
        out->values[static_cast<std::size_t>(j)] = best;
        (*winner)[static_cast<std::size_t>(j)] = who;
      }
      tape.record([branches, out, winner, d]() {
        for (int j = 0; j < d; ++j)
          branches[static_cast<std::size_t>((*winner)[static_cast<std::size_t>(j)])]->grad[static_cast<std::size_t>(j)] +=
              out->grad[static_cast<std::size_t>(j)];
      });
      break;
    }
    case FusionMode::SMM: {
      auto winner = std::make_shared<std::vector<int>>(static_cast<std::size_t>(d), -1);
      for (int j = 0; j < d; ++j) {
        double sum = 0.0, best = 0.0;
        int who = -1;
        for (int i = 0; i < b; ++i) {
          if (!present[static_cast<std::size_t>(i)]) continue;
          const double v = branches[static_cast<std::size_t>(i)]->values[static_cast<std::size_t>(j)];
          sum += v;
          if (who < 0 || v > best) {
            best = v;
            who = i;
          }
        }
        out->values[static_cast<std::size_t>(j)] = sum / n_present;
        out->values[static_cast<std::size_t>(d + j)] = best;
        (*winner)[static_cast<std::size_t>(j)] = who;
      }
      tape.record([branches, present, out, winner, b, d, n_present]() {
        for (int j = 0; j < d; ++j) {
          const double gmean = out->grad[static_cast<std::size_t>(j)] / n_present;
          for (int i = 0; i < b; ++i)
            if (present[static_cast<std::size_t>(i)])
              branches[static_cast<std::size_t>(i)]->grad[static_cast<std::size_t>(j)] += gmean;
          branches[static_cast<std::size_t>((*winner)[static_cast<std::size_t>(j)])]->grad[static_cast<std::size_t>(j)] +=
              out->grad[static_cast<std::size_t>(d + j)];
        }
      });
      break;
    }
  }
  return out;
}

}  // namespace partstack
