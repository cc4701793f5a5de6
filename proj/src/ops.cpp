#include "msga/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msga/error.hpp"
#include "msga/kernels.hpp"

namespace msga {

namespace kp = kernels::parallel;
using kernels::Trans;

namespace {

bool tracks(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape.enabled()) return false;
  for (const Tensor* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                         shape_str(x.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
  }
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions of " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " disagree");
  }
  Tensor out({m, n}, 0.0, tracks(tape, {&a, &b}));
  kp::gemm(Trans::kNo, Trans::kNo, m, n, k, a.data(), b.data(), out.data(), false);
  tape.record(out, [a, b, out, m, n, k]() mutable {
    const double* g = out.grad().data();
    if (a.requires_grad()) kp::gemm(Trans::kNo, Trans::kYes, m, k, n, g, b.data(), a.grad().data(), true);
    if (b.requires_grad()) kp::gemm(Trans::kYes, Trans::kNo, k, n, m, a.data(), g, b.grad().data(), true);
  });
  return out;
}

Tensor transpose(Tape& tape, const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t axes[] = {1, 0};
  return permute(tape, a, axes);
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape " + shape_str(x.shape()) + " to " + shape_str(shape) +
                         ": element counts differ");
  }
  Tensor out(std::move(shape), std::vector<double>(x.values().begin(), x.values().end()),
             tracks(tape, {&x}));
  tape.record(out, [x, out]() mutable {
    auto gx = x.grad();
    auto g = out.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
  return out;
}

Tensor permute(Tape& tape, const Tensor& x, std::span<const std::size_t> axes) {
  const std::size_t rank = x.rank();
  if (axes.size() != rank) throw DimensionError("permute: " + std::to_string(axes.size()) +
                                                " axes for shape " + shape_str(x.shape()));
  std::vector<bool> seen(rank, false);
  for (auto ax : axes) {
    if (ax >= rank || seen[ax]) throw DimensionError("permute: axes are not a permutation");
    seen[ax] = true;
  }
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = x.dim(axes[i]);

  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.dim(i);
  // source offset for each output element
  std::vector<std::size_t> src(x.numel());
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t o = 0; o < src.size(); ++o) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < rank; ++i) off += idx[i] * in_stride[axes[i]];
    src[o] = off;
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  Tensor out(out_shape, 0.0, tracks(tape, {&x}));
  for (std::size_t o = 0; o < src.size(); ++o) out[o] = x[src[o]];
  tape.record(out, [x, out, src = std::move(src)]() mutable {
    auto gx = x.grad();
    auto g = out.grad();
    for (std::size_t o = 0; o < src.size(); ++o) gx[src[o]] += g[o];
  });
  return out;
}

Tensor concat_channels(Tape& tape, std::span<const Tensor> xs) {
  if (xs.empty()) throw DimensionError("concat_channels of an empty list");
  std::size_t channels = 0;
  bool grad = false;
  for (const auto& x : xs) {
    require_rank(x, 3, "concat_channels");
    if (x.dim(1) != xs[0].dim(1) || x.dim(2) != xs[0].dim(2)) {
      throw DimensionError("concat_channels: spatial sizes " + shape_str(x.shape()) + " and " +
                           shape_str(xs[0].shape()) + " differ");
    }
    channels += x.dim(0);
    grad = grad || tracks(tape, {&x});
  }
  Tensor out({channels, xs[0].dim(1), xs[0].dim(2)}, 0.0, grad);
  std::size_t off = 0;
  for (const auto& x : xs) {
    std::copy(x.values().begin(), x.values().end(), out.values().begin() + off);
    off += x.numel();
  }
  tape.record(out, [parts = std::vector<Tensor>(xs.begin(), xs.end()), out]() mutable {
    auto g = out.grad();
    std::size_t off = 0;
    for (auto& x : parts) {
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[off + i];
      }
      off += x.numel();
    }
  });
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape(), 0.0, tracks(tape, {&a, &b}));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] + b[i];
  tape.record(out, [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape(), 0.0, tracks(tape, {&a, &b}));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] - b[i];
  tape.record(out, [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape(), 0.0, tracks(tape, {&a, &b}));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] * b[i];
  tape.record(out, [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
    }
  });
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  Tensor out(x.shape(), 0.0, tracks(tape, {&x}));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] * factor;
  tape.record(out, [x, out, factor]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
  });
  return out;
}

Tensor scale_by(Tape& tape, const Tensor& x, const Tensor& factor) {
  if (factor.numel() != 1) throw DimensionError("scale_by: factor must have one element, got " +
                                                shape_str(factor.shape()));
  const double s = factor[0];
  Tensor out(x.shape(), 0.0, tracks(tape, {&x, &factor}));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] * s;
  tape.record(out, [x, factor, out]() mutable {
    auto g = out.grad();
    const double s = factor[0];
    if (x.requires_grad()) {
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s;
    }
    if (factor.requires_grad()) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
      factor.grad()[0] += acc;
    }
  });
  return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
  Tensor out(x.shape(), 0.0, tracks(tape, {&x}));
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  tape.record(out, [x, out]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) gx[i] += g[i];
  });
  return out;
}

Tensor sum_all(Tape& tape, const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor out = Tensor::scalar(s, tracks(tape, {&x}));
  tape.record(out, [x, out]() mutable {
    const double g = out.grad()[0];
    for (double& v : x.grad()) v += g;
  });
  return out;
}

Tensor sum_squares(Tape& tape, const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  Tensor out = Tensor::scalar(s, tracks(tape, {&x}));
  tape.record(out, [x, out]() mutable {
    const double g = 2.0 * out.grad()[0];
    auto gx = x.grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * x[i];
  });
  return out;
}

Tensor softmax_rows(Tape& tape, const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor out(x.shape(), 0.0, tracks(tape, {&x}));
  kp::softmax_rows_forward(rows, cols, x.data(), out.data());
  tape.record(out, [x, out, rows, cols]() mutable {
    kp::softmax_rows_backward(rows, cols, out.data(), out.grad().data(), x.grad().data());
  });
  return out;
}

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  require_rank(x, 3, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  if (kernel.dim(1) != x.dim(0)) {
    throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) + " does not match input " +
                         shape_str(x.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != kernel.dim(0))) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " does not match kernel " +
                         shape_str(kernel.shape()));
  }
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  if (kernel.dim(2) % 2 == 0 || kernel.dim(3) % 2 == 0) {
    throw ConfigError("conv2d: kernel spatial size must be odd, got " + shape_str(kernel.shape()));
  }
  const kernels::ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), kernel.dim(0), kernel.dim(2), kernel.dim(3),
                                stride, pad};
  if (x.dim(1) + 2 * pad < g.kernel_h || x.dim(2) + 2 * pad < g.kernel_w) {
    throw ConfigError("conv2d: kernel " + shape_str(kernel.shape()) + " larger than padded input " +
                      shape_str(x.shape()));
  }
  Tensor out({g.out_channels, g.out_h(), g.out_w()}, 0.0, tracks(tape, {&x, &kernel, &bias}));
  kp::conv2d_forward(g, x.data(), kernel.data(), bias.defined() ? bias.data() : nullptr, out.data());
  tape.record(out, [x, kernel, bias, out, g]() mutable {
    double* dx = x.requires_grad() ? x.grad().data() : nullptr;
    double* dk = kernel.requires_grad() ? kernel.grad().data() : nullptr;
    double* db = bias.defined() && bias.requires_grad() ? bias.grad().data() : nullptr;
    kp::conv2d_backward(g, x.data(), kernel.data(), out.grad().data(), dx, dk, db);
  });
  return out;
}

Tensor bilinear_upsample(Tape& tape, const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_rank(x, 3, "bilinear_upsample");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (out_h < h || out_w < w) {
    throw ConfigError("bilinear_upsample: cannot resize " + shape_str(x.shape()) + " down to " +
                      std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  Tensor out({c, out_h, out_w}, 0.0, tracks(tape, {&x}));
  kp::upsample_forward(c, h, w, out_h, out_w, x.data(), out.data());
  tape.record(out, [x, out, c, h, w, out_h, out_w]() mutable {
    kp::upsample_backward(c, h, w, out_h, out_w, out.grad().data(), x.grad().data());
  });
  return out;
}

Tensor avg_pool2(Tape& tape, const Tensor& x) {
  require_rank(x, 3, "avg_pool2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2) throw ConfigError("avg_pool2: odd spatial size " + shape_str(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out({c, oh, ow}, 0.0, tracks(tape, {&x}));
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* p = x.data() + ch * h * w;
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx)
        out[(ch * oh + y) * ow + xx] = 0.25 * (p[2 * y * w + 2 * xx] + p[2 * y * w + 2 * xx + 1] +
                                               p[(2 * y + 1) * w + 2 * xx] + p[(2 * y + 1) * w + 2 * xx + 1]);
  }
  tape.record(out, [x, out, c, h, w, oh, ow]() mutable {
    auto g = out.grad();
    double* gx = x.grad().data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      double* p = gx + ch * h * w;
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          const double d = 0.25 * g[(ch * oh + y) * ow + xx];
          p[2 * y * w + 2 * xx] += d;
          p[2 * y * w + 2 * xx + 1] += d;
          p[(2 * y + 1) * w + 2 * xx] += d;
          p[(2 * y + 1) * w + 2 * xx + 1] += d;
        }
    }
  });
  return out;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, const LabelMap& labels) {
  require_rank(logits, 3, "cross_entropy");
  const std::size_t k = logits.dim(0), pixels = logits.dim(1) * logits.dim(2);
  if (labels.shape != Shape{logits.dim(1), logits.dim(2)}) {
    throw DataError("cross_entropy: label map " + shape_str(labels.shape) + " does not match logits " +
                    shape_str(logits.shape()));
  }
  validate_labels(labels, int(k));

  // per-pixel softmax over classes, kept for the backward pass
  std::vector<double> prob(k * pixels);
  double loss = 0.0;
  for (std::size_t p = 0; p < pixels; ++p) {
    double mx = logits[p];
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits[c * pixels + p]);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      prob[c * pixels + p] = std::exp(logits[c * pixels + p] - mx);
      z += prob[c * pixels + p];
    }
    for (std::size_t c = 0; c < k; ++c) prob[c * pixels + p] /= z;
    loss += mx + std::log(z) - logits[std::size_t(labels[p]) * pixels + p];
  }
  Tensor out = Tensor::scalar(loss / double(pixels), tracks(tape, {&logits}));
  tape.record(out, [logits, out, labels, prob = std::move(prob), k, pixels]() mutable {
    const double g = out.grad()[0] / double(pixels);
    auto gl = logits.grad();
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t p = 0; p < pixels; ++p)
        gl[c * pixels + p] += g * (prob[c * pixels + p] - (labels[p] == int(c) ? 1.0 : 0.0));
  });
  return out;
}

// ---- label helpers -------------------------------------------------------

void validate_labels(const LabelMap& labels, int num_classes) {
  for (std::size_t i = 0; i < labels.numel(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw DataError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

LabelMap argmax_classes(const Tensor& logits) {
  require_rank(logits, 3, "argmax_classes");
  const std::size_t k = logits.dim(0), pixels = logits.dim(1) * logits.dim(2);
  LabelMap out({logits.dim(1), logits.dim(2)});
  for (std::size_t p = 0; p < pixels; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (logits[c * pixels + p] > logits[best * pixels + p]) best = c;
    out[p] = int(best);
  }
  return out;
}

LabelMap resize_nearest(const LabelMap& labels, std::size_t out_h, std::size_t out_w) {
  if (labels.shape.size() != 2) throw DimensionError("resize_nearest expects a 2-D label map");
  const std::size_t h = labels.shape[0], w = labels.shape[1];
  LabelMap out({out_h, out_w});
  for (std::size_t y = 0; y < out_h; ++y)
    for (std::size_t x = 0; x < out_w; ++x) out[y * out_w + x] = labels[(y * h / out_h) * w + x * w / out_w];
  return out;
}

}  // namespace msga
