#pragma once

#include <functional>
#include <string>
#include <vector>

#include "partstack/tensor.hpp"

namespace partstack {

// Reverse-mode tape. Ops record a backward closure when executed; backward()
// seeds the loss gradient and replays the closures in exact reverse order.
// Gradients accumulate additively, so a tensor feeding several consumers
// receives the sum of all partials.
class Tape {
 public:
  void record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }

  // loss must be a scalar (size 1). seed lets callers average a batch by
  // seeding each per-sample tape with 1/B.
  void backward(const TensorPtr& loss, double seed = 1.0);

  std::size_t op_count() const { return ops_.size(); }

 private:
  std::vector<std::function<void()>> ops_;
};

// Trainable tensor plus its learning-rate multiplier (0 freezes it) and the
// momentum buffer used by sgd_step.
struct Parameter {
  std::string name;
  TensorPtr tensor;
  double lr_multiplier = 1.0;
  std::vector<double> velocity;

  Parameter() = default;
  Parameter(std::string n, TensorPtr t, double mult = 1.0)
      : name(std::move(n)), tensor(std::move(t)), lr_multiplier(mult) {}
};

enum class PoolMode { Max, Avg };

// x: [N,Ci,H,W], w: [Co,Ci,K,K], b: [Co]. Output spatial dims follow
// floor((in + 2*pad - k)/stride) + 1.
TensorPtr conv2d(Tape& tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                 int stride, int padding);

// No padding. Max pooling routes the gradient to the argmax (ties resolve to
// the lowest row-major index); average pooling distributes it uniformly.
TensorPtr pool2d(Tape& tape, const TensorPtr& x, PoolMode mode, int kernel, int stride);

// x: [N,D], w: [D,K], b: [K] -> [N,K].
TensorPtr dense(Tape& tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

TensorPtr relu(Tape& tape, const TensorPtr& x);

// logits: [N,C], labels in [0,C). Mean over N of -log softmax[label].
TensorPtr softmax_cross_entropy(Tape& tape, const TensorPtr& logits, const std::vector<int>& labels);

// Per-channel affine y = gamma (.) x + beta. x rank 4: channel = dim 1;
// x rank 2 [N,d]: every column is a channel.
TensorPtr scale_channels(Tape& tape, const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta);

TensorPtr reshape(Tape& tape, const TensorPtr& x, std::vector<int> new_shape);

// Global average pool [N,C,H,W] -> [N,C].
TensorPtr global_avg_pool(Tape& tape, const TensorPtr& x);

// Fixed projection of a tensor to a scalar: sum_i weights[i] * x[i].
// Used to make vector-valued ops scalar for gradient checks.
TensorPtr dot_probe(Tape& tape, const TensorPtr& x, const std::vector<double>& weights);

// v <- momentum*v - lr_mult*base_lr*grad; w <- w + v; gradients zeroed after.
void sgd_step(std::vector<Parameter>& params, double base_lr, double momentum);

std::vector<double> softmax_row(const double* logits, int n);

}  // namespace partstack
