#include "partstack/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace partstack {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

int conv_out_dim(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

}  // namespace

void Tape::backward(const TensorPtr& loss, double seed) {
  require(loss->size() == 1, "backward: loss must be scalar, got shape " + loss->shape_string());
  loss->ensure_grad();
  loss->grad[0] += seed;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

std::vector<double> softmax_row(const double* logits, int n) {
  double mx = logits[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  std::vector<double> out(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = std::exp(logits[i] - mx);
    sum += out[static_cast<std::size_t>(i)];
  }
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] /= sum;
  return out;
}

TensorPtr conv2d(Tape& tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                 int stride, int padding) {
  require(x->rank() == 4, "conv2d: input must be 4-D NCHW, got " + x->shape_string());
  require(w->rank() == 4, "conv2d: weights must be 4-D OIKK, got " + w->shape_string());
  require(stride >= 1 && padding >= 0, "conv2d: stride must be >=1 and padding >=0");
  const int n = x->dim(0), ci = x->dim(1), h = x->dim(2), wd = x->dim(3);
  const int co = w->dim(0), k = w->dim(2);
  require(w->dim(1) == ci, "conv2d: input channels " + std::to_string(ci) +
                               " != weight input channels " + std::to_string(w->dim(1)) +
                               " (input " + x->shape_string() + ", weights " + w->shape_string() + ")");
  require(w->dim(2) == w->dim(3), "conv2d: kernel must be square, got " + w->shape_string());
  require(b->size() == co, "conv2d: bias size " + b->shape_string() + " != output channels " +
                               std::to_string(co));
  require(k <= h + 2 * padding && k <= wd + 2 * padding,
          "conv2d: kernel " + std::to_string(k) + " does not fit padded input " + x->shape_string() +
              " with padding " + std::to_string(padding));

  const int ho = conv_out_dim(h, k, stride, padding);
  const int wo = conv_out_dim(wd, k, stride, padding);
  require(ho > 0 && wo > 0, "conv2d: nonpositive output dims for input " + x->shape_string());

  auto out = make_tensor({n, co, ho, wo});
  const double* xv = x->values.data();
  const double* wv = w->values.data();
  const double* bv = b->values.data();
  double* ov = out->values.data();

  for (int in = 0; in < n; ++in) {
    for (int oc = 0; oc < co; ++oc) {
      for (int oh = 0; oh < ho; ++oh) {
        for (int ow = 0; ow < wo; ++ow) {
          double acc = bv[oc];
          const int ih0 = oh * stride - padding;
          const int iw0 = ow * stride - padding;
          for (int ic = 0; ic < ci; ++ic) {
            const double* xp = xv + ((in * ci + ic) * h) * wd;
            const double* wp = wv + ((oc * ci + ic) * k) * k;
            for (int kh = 0; kh < k; ++kh) {
              const int ih = ih0 + kh;
              if (ih < 0 || ih >= h) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int iw = iw0 + kw;
                if (iw < 0 || iw >= wd) continue;
                acc += xp[ih * wd + iw] * wp[kh * k + kw];
              }
            }
          }
          ov[((in * co + oc) * ho + oh) * wo + ow] = acc;
        }
      }
    }
  }

  x->ensure_grad();
  w->ensure_grad();
  b->ensure_grad();
  out->ensure_grad();
  tape.record([x, w, b, out, stride, padding, n, ci, h, wd, co, k, ho, wo]() {
    const double* go = out->grad.data();
    const double* xv = x->values.data();
    const double* wv = w->values.data();
    double* gx = x->grad.data();
    double* gw = w->grad.data();
    double* gb = b->grad.data();
    for (int in = 0; in < n; ++in) {
      for (int oc = 0; oc < co; ++oc) {
        for (int oh = 0; oh < ho; ++oh) {
          for (int ow = 0; ow < wo; ++ow) {
            const double g = go[((in * co + oc) * ho + oh) * wo + ow];
            if (g == 0.0) continue;
            gb[oc] += g;
            const int ih0 = oh * stride - padding;
            const int iw0 = ow * stride - padding;
            for (int ic = 0; ic < ci; ++ic) {
              const double* xp = xv + ((in * ci + ic) * h) * wd;
              const double* wp = wv + ((oc * ci + ic) * k) * k;
              double* gxp = gx + ((in * ci + ic) * h) * wd;
              double* gwp = gw + ((oc * ci + ic) * k) * k;
              for (int kh = 0; kh < k; ++kh) {
                const int ih = ih0 + kh;
                if (ih < 0 || ih >= h) continue;
                for (int kw = 0; kw < k; ++kw) {
                  const int iw = iw0 + kw;
                  if (iw < 0 || iw >= wd) continue;
                  gxp[ih * wd + iw] += g * wp[kh * k + kw];
                  gwp[kh * k + kw] += g * xp[ih * wd + iw];
                }
              }
            }
          }
        }
      }
    }
  });
  return out;
}

TensorPtr pool2d(Tape& tape, const TensorPtr& x, PoolMode mode, int kernel, int stride) {
  require(x->rank() == 4, "pool2d: input must be 4-D NCHW, got " + x->shape_string());
  require(kernel >= 1 && stride >= 1, "pool2d: kernel and stride must be positive");
  const int n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
  require(kernel <= h && kernel <= w,
          "pool2d: kernel " + std::to_string(kernel) + " larger than input " + x->shape_string());
  const int ho = (h - kernel) / stride + 1;
  const int wo = (w - kernel) / stride + 1;

  auto out = make_tensor({n, c, ho, wo});
  const double* xv = x->values.data();
  double* ov = out->values.data();

  // For max mode, remember the winning input index per output element.
  auto argmax = std::make_shared<std::vector<int>>();
  if (mode == PoolMode::Max) argmax->resize(out->values.size());

  int oi = 0;
  for (int in = 0; in < n; ++in) {
    for (int ic = 0; ic < c; ++ic) {
      const double* xp = xv + ((in * c + ic) * h) * w;
      for (int oh = 0; oh < ho; ++oh) {
        for (int ow = 0; ow < wo; ++ow, ++oi) {
          if (mode == PoolMode::Max) {
            double best = -1e300;
            int best_idx = -1;
            for (int kh = 0; kh < kernel; ++kh) {
              for (int kw = 0; kw < kernel; ++kw) {
                const int idx = (oh * stride + kh) * w + (ow * stride + kw);
                if (xp[idx] > best) {
                  best = xp[idx];
                  best_idx = idx;
                }
              }
            }
            ov[oi] = best;
            (*argmax)[static_cast<std::size_t>(oi)] = ((in * c + ic) * h) * w + best_idx;
          } else {
            double acc = 0.0;
            for (int kh = 0; kh < kernel; ++kh)
              for (int kw = 0; kw < kernel; ++kw)
                acc += xp[(oh * stride + kh) * w + (ow * stride + kw)];
            ov[oi] = acc / (static_cast<double>(kernel) * kernel);
          }
        }
      }
    }
  }

  x->ensure_grad();
  out->ensure_grad();
  if (mode == PoolMode::Max) {
    tape.record([x, out, argmax]() {
      double* gx = x->grad.data();
      const double* go = out->grad.data();
      for (std::size_t i = 0; i < out->values.size(); ++i) gx[(*argmax)[i]] += go[i];
    });
  } else {
    tape.record([x, out, kernel, stride, n, c, h, w, ho, wo]() {
      double* gx = x->grad.data();
      const double* go = out->grad.data();
      const double inv = 1.0 / (static_cast<double>(kernel) * kernel);
      int oi = 0;
      for (int in = 0; in < n; ++in) {
        for (int ic = 0; ic < c; ++ic) {
          double* gxp = gx + ((in * c + ic) * h) * w;
          for (int oh = 0; oh < ho; ++oh) {
            for (int ow = 0; ow < wo; ++ow, ++oi) {
              const double g = go[oi] * inv;
              for (int kh = 0; kh < kernel; ++kh)
                for (int kw = 0; kw < kernel; ++kw)
                  gxp[(oh * stride + kh) * w + (ow * stride + kw)] += g;
            }
          }
        }
      }
    });
  }
  return out;
}

TensorPtr dense(Tape& tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
  require(x->rank() == 2, "dense: input must be 2-D, got " + x->shape_string());
  require(w->rank() == 2, "dense: weights must be 2-D, got " + w->shape_string());
  const int n = x->dim(0), d = x->dim(1), k = w->dim(1);
  require(w->dim(0) == d, "dense: inner dims disagree (input " + x->shape_string() + ", weights " +
                              w->shape_string() + ")");
  require(b->size() == k, "dense: bias " + b->shape_string() + " != output dim " + std::to_string(k));

  auto out = make_tensor({n, k});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      double acc = b->values[static_cast<std::size_t>(j)];
      for (int q = 0; q < d; ++q)
        acc += x->values[static_cast<std::size_t>(i * d + q)] * w->values[static_cast<std::size_t>(q * k + j)];
      out->values[static_cast<std::size_t>(i * k + j)] = acc;
    }
  }

  x->ensure_grad();
  w->ensure_grad();
  b->ensure_grad();
  out->ensure_grad();
  tape.record([x, w, b, out, n, d, k]() {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        const double g = out->grad[static_cast<std::size_t>(i * k + j)];
        if (g == 0.0) continue;
        b->grad[static_cast<std::size_t>(j)] += g;
        for (int q = 0; q < d; ++q) {
          x->grad[static_cast<std::size_t>(i * d + q)] += g * w->values[static_cast<std::size_t>(q * k + j)];
          w->grad[static_cast<std::size_t>(q * k + j)] += g * x->values[static_cast<std::size_t>(i * d + q)];
        }
      }
    }
  });
  return out;
}

TensorPtr relu(Tape& tape, const TensorPtr& x) {
  auto out = make_tensor(x->shape);
  for (std::size_t i = 0; i < x->values.size(); ++i)
    out->values[i] = x->values[i] > 0.0 ? x->values[i] : 0.0;
  x->ensure_grad();
  out->ensure_grad();
  // Subgradient 0 at exactly 0.
  tape.record([x, out]() {
    for (std::size_t i = 0; i < x->values.size(); ++i)
      if (x->values[i] > 0.0) x->grad[i] += out->grad[i];
  });
  return out;
}

TensorPtr softmax_cross_entropy(Tape& tape, const TensorPtr& logits, const std::vector<int>& labels) {
  require(logits->rank() == 2, "softmax_cross_entropy: logits must be 2-D, got " + logits->shape_string());
  const int n = logits->dim(0), c = logits->dim(1);
  require(static_cast<int>(labels.size()) == n,
          "softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
              std::to_string(n) + " rows");
  for (int i = 0; i < n; ++i)
    require(labels[static_cast<std::size_t>(i)] >= 0 && labels[static_cast<std::size_t>(i)] < c,
            "softmax_cross_entropy: label " + std::to_string(labels[static_cast<std::size_t>(i)]) +
                " out of range [0," + std::to_string(c) + ")");

  auto probs = std::make_shared<std::vector<double>>();
  probs->reserve(static_cast<std::size_t>(n * c));
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    auto row = softmax_row(logits->values.data() + i * c, c);
    loss -= std::log(row[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])]);
    probs->insert(probs->end(), row.begin(), row.end());
  }
  loss /= n;

  auto out = make_tensor({1}, {loss});
  logits->ensure_grad();
  out->ensure_grad();
  tape.record([logits, out, probs, labels, n, c]() {
    const double g = out->grad[0] / n;
    for (int i = 0; i < n; ++i) {
      const int y = labels[static_cast<std::size_t>(i)];
      for (int j = 0; j < c; ++j) {
        double p = (*probs)[static_cast<std::size_t>(i * c + j)];
        logits->grad[static_cast<std::size_t>(i * c + j)] += g * (p - (j == y ? 1.0 : 0.0));
      }
    }
  });
  return out;
}

TensorPtr scale_channels(Tape& tape, const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta) {
  require(x->rank() == 2 || x->rank() == 4,
          "scale_channels: input must be 2-D or 4-D, got " + x->shape_string());
  const int c = x->dim(1);
  require(gamma->size() == c && beta->size() == c,
          "scale_channels: channel dims disagree (input " + x->shape_string() + ", gamma " +
              gamma->shape_string() + ", beta " + beta->shape_string() + ")");

  const int spatial = x->rank() == 4 ? x->dim(2) * x->dim(3) : 1;
  const int batch = x->dim(0);
  auto out = make_tensor(x->shape);
  for (int in = 0; in < batch; ++in)
    for (int ic = 0; ic < c; ++ic) {
      const double g = gamma->values[static_cast<std::size_t>(ic)];
      const double bv = beta->values[static_cast<std::size_t>(ic)];
      const int base = (in * c + ic) * spatial;
      for (int s = 0; s < spatial; ++s)
        out->values[static_cast<std::size_t>(base + s)] = g * x->values[static_cast<std::size_t>(base + s)] + bv;
    }

  x->ensure_grad();
  gamma->ensure_grad();
  beta->ensure_grad();
  out->ensure_grad();
  tape.record([x, gamma, beta, out, batch, c, spatial]() {
    for (int in = 0; in < batch; ++in)
      for (int ic = 0; ic < c; ++ic) {
        const int base = (in * c + ic) * spatial;
        const double g = gamma->values[static_cast<std::size_t>(ic)];
        for (int s = 0; s < spatial; ++s) {
          const double go = out->grad[static_cast<std::size_t>(base + s)];
          x->grad[static_cast<std::size_t>(base + s)] += g * go;
          gamma->grad[static_cast<std::size_t>(ic)] += x->values[static_cast<std::size_t>(base + s)] * go;
          beta->grad[static_cast<std::size_t>(ic)] += go;
        }
      }
  });
  return out;
}

TensorPtr reshape(Tape& tape, const TensorPtr& x, std::vector<int> new_shape) {
  require(Tensor::volume(new_shape) == x->size(),
          "reshape: cannot view " + x->shape_string() + " as " + Tensor::shape_string(new_shape));
  auto out = make_tensor(std::move(new_shape), x->values);
  x->ensure_grad();
  out->ensure_grad();
  tape.record([x, out]() {
    for (std::size_t i = 0; i < x->values.size(); ++i) x->grad[i] += out->grad[i];
  });
  return out;
}

TensorPtr global_avg_pool(Tape& tape, const TensorPtr& x) {
  require(x->rank() == 4, "global_avg_pool: input must be 4-D, got " + x->shape_string());
  const int n = x->dim(0), c = x->dim(1), spatial = x->dim(2) * x->dim(3);
  auto out = make_tensor({n, c});
  for (int in = 0; in < n; ++in)
    for (int ic = 0; ic < c; ++ic) {
      double acc = 0.0;
      const int base = (in * c + ic) * spatial;
      for (int s = 0; s < spatial; ++s) acc += x->values[static_cast<std::size_t>(base + s)];
      out->values[static_cast<std::size_t>(in * c + ic)] = acc / spatial;
    }
  x->ensure_grad();
  out->ensure_grad();
  tape.record([x, out, n, c, spatial]() {
    for (int in = 0; in < n; ++in)
      for (int ic = 0; ic < c; ++ic) {
        const double g = out->grad[static_cast<std::size_t>(in * c + ic)] / spatial;
        const int base = (in * c + ic) * spatial;
        for (int s = 0; s < spatial; ++s) x->grad[static_cast<std::size_t>(base + s)] += g;
      }
  });
  return out;
}

TensorPtr dot_probe(Tape& tape, const TensorPtr& x, const std::vector<double>& weights) {
  require(static_cast<int>(weights.size()) == x->size(),
          "dot_probe: weight count " + std::to_string(weights.size()) + " != tensor size " +
              std::to_string(x->size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * x->values[i];
  auto out = make_tensor({1}, {acc});
  x->ensure_grad();
  out->ensure_grad();
  tape.record([x, out, weights]() {
    const double g = out->grad[0];
    for (std::size_t i = 0; i < weights.size(); ++i) x->grad[i] += g * weights[i];
  });
  return out;
}

void sgd_step(std::vector<Parameter>& params, double base_lr, double momentum) {
  if (base_lr <= 0.0) throw std::invalid_argument("sgd_step: base_lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("sgd_step: momentum must be in [0,1)");
  for (auto& p : params) {
    Tensor& t = *p.tensor;
    t.ensure_grad();
    if (p.velocity.empty()) p.velocity.assign(t.values.size(), 0.0);
    const double lr = base_lr * p.lr_multiplier;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      p.velocity[i] = momentum * p.velocity[i] - lr * t.grad[i];
      t.values[i] += p.velocity[i];
    }
    t.zero_grad();
  }
}

}  // namespace partstack
