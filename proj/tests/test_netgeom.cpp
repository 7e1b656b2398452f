#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "oracles.hpp"
#include "partstack/netgeom.hpp"
#include "partstack/rng.hpp"
#include "partstack/tape.hpp"

using namespace partstack;

namespace {

const std::filesystem::path kConfigDir = PARTSTACK_CONFIG_DIR;

// Dependency-tracing oracle: tracks, per output unit along one axis, the
// closed interval of input pixels that can influence it. Layer (k,s,p) maps
// output index i to input interval [i*s - p, i*s - p + k - 1] clipped to the
// input; composition takes the union over the window, which stays an
// interval. Entirely independent of the RFSpec recurrence.
struct TracedAxis {
  std::vector<std::pair<int, int>> intervals;  // per output index, in input pixels
  int dim;                                     // output size
};

TracedAxis trace_influence(std::span<const LayerSpec> stack, int input_size) {
  TracedAxis axis;
  axis.dim = input_size;
  axis.intervals.resize(static_cast<std::size_t>(input_size));
  for (int i = 0; i < input_size; ++i) axis.intervals[static_cast<std::size_t>(i)] = {i, i};

  for (const auto& layer : stack) {
    const int out_dim = (axis.dim + 2 * layer.padding - layer.kernel) / layer.stride + 1;
    REQUIRE(out_dim > 0);
    std::vector<std::pair<int, int>> next(static_cast<std::size_t>(out_dim));
    for (int i = 0; i < out_dim; ++i) {
      int lo = i * layer.stride - layer.padding;
      int hi = lo + layer.kernel - 1;
      lo = std::max(lo, 0);
      hi = std::min(hi, axis.dim - 1);
      REQUIRE(lo <= hi);
      next[static_cast<std::size_t>(i)] = {axis.intervals[static_cast<std::size_t>(lo)].first,
                                           axis.intervals[static_cast<std::size_t>(hi)].second};
    }
    axis.intervals = std::move(next);
    axis.dim = out_dim;
  }
  return axis;
}

}  // namespace

TEST_CASE("compose_rf of the empty stack is the identity") {
  auto rf = compose_rf({});
  CHECK(rf.size == 1);
  CHECK(rf.jump == 1);
  CHECK(rf.start == 0.0);
}

TEST_CASE("compose_rf two-layer example verified by perturbation tracing") {
  std::vector<LayerSpec> stack{{"conv", 7, 2, 3}, {"pool", 3, 2, 0}};
  auto rf = compose_rf(stack);
  CHECK(rf.size == 11);
  CHECK(rf.jump == 4);

  // Perturbation oracle on an actual numeric forward: an all-ones conv plus
  // an average pool propagate any input change to exactly the dependent
  // outputs, so the changed-output set for a delta at one pixel is the true
  // dependency set.
  const int n = 32;
  auto forward = [&](const Tensor& img) {
    Tape tape;
    auto w = make_tensor({1, 1, 7, 7}, std::vector<double>(49, 1.0));
    auto b = make_tensor({1}, {0.0});
    auto c = conv2d(tape, make_tensor(img.shape, img.values), w, b, 2, 3);
    auto p = pool2d(tape, c, PoolMode::Avg, 3, 2);
    return p->values;
  };
  Tensor base({1, 1, n, n});
  auto base_out = forward(base);

  // Trace along the row axis: perturb pixels of one row and collect, for an
  // interior output unit, which input pixels reach it.
  const int probe_unit = 3;
  int lo = n, hi = -1;
  const int out_dim = output_dim(stack, n);
  for (int px = 0; px < n; ++px) {
    Tensor img({1, 1, n, n});
    img.values[static_cast<std::size_t>(px)] = 1.0;  // row 0, col px
    auto out = forward(img);
    for (int u = 0; u < out_dim; ++u) {
      if (out[static_cast<std::size_t>(u)] != base_out[static_cast<std::size_t>(u)]) {
        if (u == probe_unit) {
          lo = std::min(lo, px);
          hi = std::max(hi, px);
        }
      }
    }
  }
  CHECK(hi - lo + 1 == rf.size);
  CHECK((lo + hi) / 2.0 == doctest::Approx(rf.start + probe_unit * rf.jump).epsilon(1e-12));
}

TEST_CASE("shipped configs reproduce the published receptive-field column") {
  struct Expect {
    const char* file;
    int size;
  };
  for (const Expect e : {Expect{"bn_to_4a.layers", 107}, Expect{"bn_to_4b.layers", 139},
                         Expect{"bn_to_4c.layers", 171}, Expect{"bn_to_4d.layers", 203}}) {
    auto layers = parse_layer_file(kConfigDir / e.file);
    auto rf = compose_rf(layers);
    CHECK_MESSAGE(rf.size == e.size, e.file);
    CHECK(rf.jump == 16);
  }
}

TEST_CASE("4a stack on a 448 input yields a 28x28 grid spaced 16 px") {
  auto layers = parse_layer_file(kConfigDir / "bn_to_4a.layers");
  auto grid = candidate_grid_for_stack(layers, 448);
  CHECK(grid.rows == 28);
  CHECK(grid.cols == 28);
  CHECK(grid.jump == 16);
  auto c00 = grid.center(0, 0);
  auto c01 = grid.center(0, 1);
  auto c10 = grid.center(1, 0);
  CHECK(c01.second - c00.second == doctest::Approx(16.0));
  CHECK(c10.first - c00.first == doctest::Approx(16.0));
}

TEST_CASE("identity stack grid puts centers on integer pixels") {
  RFSpec rf;  // identity
  auto grid = candidate_grid(rf, 3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      auto [y, x] = grid.center(i, j);
      CHECK(y == doctest::Approx(static_cast<double>(i)));
      CHECK(x == doctest::Approx(static_cast<double>(j)));
    }
}

TEST_CASE("candidate_grid rejects nonpositive dims") {
  CHECK_THROWS_AS(candidate_grid(RFSpec{}, 0, 3), std::invalid_argument);
}

TEST_CASE("random stacks: traced influence equals predicted size and center") {
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<LayerSpec> stack;
    const int depth = rng.uniform_int(1, 5);
    for (int l = 0; l < depth; ++l) {
      LayerSpec spec;
      spec.name = "l" + std::to_string(l);
      spec.kernel = rng.uniform_int(1, 5);
      spec.stride = rng.uniform_int(1, 3);
      spec.padding = rng.uniform_int(0, 2);
      stack.push_back(spec);
    }
    const int input = 64;
    int out_dim;
    try {
      out_dim = output_dim(stack, input);
    } catch (const std::invalid_argument&) {
      continue;
    }
    auto rf = compose_rf(stack);
    auto traced = trace_influence(stack, input);
    REQUIRE(traced.dim == out_dim);

    // Pick an interior unit whose receptive field lies fully inside.
    for (int u = 0; u < out_dim; ++u) {
      const double center = rf.start + static_cast<double>(u) * rf.jump;
      const double half = (rf.size - 1) / 2.0;
      if (center - half < 0 || center + half > input - 1) continue;
      const auto [lo, hi] = traced.intervals[static_cast<std::size_t>(u)];
      CHECK(hi - lo + 1 == rf.size);
      CHECK(std::abs((lo + hi) / 2.0 - center) <= 0.5);
      ++checked;
      break;
    }
  }
  CHECK(checked >= 20);  // enough stacks actually had interior units
}

TEST_CASE("grid regularity: center differences are multiples of jump") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    RFSpec rf;
    rf.jump = rng.uniform_int(1, 16);
    rf.start = rng.uniform(-4.0, 4.0);
    auto grid = candidate_grid(rf, 6, 5);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 5; ++j) {
        auto [y, x] = grid.center(i, j);
        auto [y0, x0] = grid.center(0, 0);
        const double dy = y - y0, dx = x - x0;
        CHECK(std::abs(dy - std::round(dy / rf.jump) * rf.jump) < 1e-9);
        CHECK(std::abs(dx - std::round(dx / rf.jump) * rf.jump) < 1e-9);
      }
  }
}

TEST_CASE("appending a layer never decreases the receptive field") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LayerSpec> stack;
    const int depth = rng.uniform_int(0, 4);
    for (int l = 0; l < depth; ++l)
      stack.push_back({"l", rng.uniform_int(1, 5), rng.uniform_int(1, 3), rng.uniform_int(0, 2)});
    auto before = compose_rf(stack);
    stack.push_back({"extra", rng.uniform_int(1, 5), rng.uniform_int(1, 3), rng.uniform_int(0, 2)});
    auto after = compose_rf(stack);
    CHECK(after.size >= before.size);
  }
}

TEST_CASE("composition is associative") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<LayerSpec> a, b;
    for (int l = 0, n = rng.uniform_int(0, 3); l < n; ++l)
      a.push_back({"a", rng.uniform_int(1, 5), rng.uniform_int(1, 3), rng.uniform_int(0, 2)});
    for (int l = 0, n = rng.uniform_int(0, 3); l < n; ++l)
      b.push_back({"b", rng.uniform_int(1, 5), rng.uniform_int(1, 3), rng.uniform_int(0, 2)});

    std::vector<LayerSpec> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    const auto whole = compose_rf(ab);

    // combine(A, B): size = size_a + (size_b - 1) * jump_a;
    // start = start_a + start_b * jump_a; jump = jump_a * jump_b.
    const auto ra = compose_rf(a);
    const auto rb = compose_rf(b);
    CHECK(whole.size == ra.size + (rb.size - 1) * ra.jump);
    CHECK(whole.jump == ra.jump * rb.jump);
    CHECK(whole.start == doctest::Approx(ra.start + rb.start * ra.jump).epsilon(1e-12));
  }
}

TEST_CASE("odd kernels compose to odd sizes") {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<LayerSpec> stack;
    for (int l = 0, n = rng.uniform_int(1, 5); l < n; ++l)
      stack.push_back({"l", 1 + 2 * rng.uniform_int(0, 2), rng.uniform_int(1, 3), rng.uniform_int(0, 2)});
    CHECK(compose_rf(stack).size % 2 == 1);
  }
}

TEST_CASE("layer file parser diagnostics") {
  CHECK_THROWS_AS(parse_layer_text("conv 3 1", "bad.layers"), IoError);
  CHECK_THROWS_WITH_AS(parse_layer_text("conv 3 1 1 9", "bad.layers"),
                       doctest::Contains("bad.layers:1"), IoError);
  auto ok = parse_layer_text("# comment\n\nconv 3 1 1  # inline\npool 2 2 0\n");
  REQUIRE(ok.size() == 2);
  CHECK(ok[0].name == "conv");
  CHECK(ok[1].kernel == 2);
}
