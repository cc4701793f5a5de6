#pragma once

#include <span>
#include <vector>

#include "msga/label_map.hpp"
#include "msga/tape.hpp"
#include "msga/tensor.hpp"

// Differentiable operations. Each op computes its result eagerly and, when
// any input requires a gradient and the tape is enabled, records a backward
// closure on `tape`. Feature maps are laid out C×H×W.
namespace msga {

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& a);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
Tensor permute(Tape& tape, const Tensor& x, std::span<const std::size_t> axes);
Tensor concat_channels(Tape& tape, std::span<const Tensor> xs);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, double factor);
// x scaled by a single-element tensor (learnable gates).
Tensor scale_by(Tape& tape, const Tensor& x, const Tensor& factor);
Tensor relu(Tape& tape, const Tensor& x);
Tensor sum_all(Tape& tape, const Tensor& x);
// Σ x², i.e. the squared L2 norm over all elements.
Tensor sum_squares(Tape& tape, const Tensor& x);

// Row-wise softmax of a 2-D tensor, max-shifted.
Tensor softmax_rows(Tape& tape, const Tensor& x);

// Cross-correlation with zero padding. `bias` may be undefined.
// Output size is floor((H + 2·pad − k) / stride) + 1.
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t pad);
// Corner-aligned bilinear upsampling of a C×h×w map.
Tensor bilinear_upsample(Tape& tape, const Tensor& x, std::size_t out_h, std::size_t out_w);
// 2×2 average pooling with stride 2.
Tensor avg_pool2(Tape& tape, const Tensor& x);

// Pixel-mean multi-class cross-entropy of K×H×W logits against H×W labels.
Tensor cross_entropy(Tape& tape, const Tensor& logits, const LabelMap& labels);

}  // namespace msga
