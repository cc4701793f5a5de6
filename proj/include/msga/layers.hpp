#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "msga/tape.hpp"
#include "msga/tensor.hpp"

namespace msga {

using Rng = std::mt19937_64;

struct NamedParameter {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedParameter>;

void zero_grads(const ParameterList& params);

enum class Activation { kRelu, kNone };

// Convolution (odd square kernel, "same" padding) followed by an optional relu.
// Kernels are He-uniform initialised, biases start at zero.
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size, Activation act,
            Rng& rng, std::size_t stride = 1);

  Tensor forward(Tape& tape, const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  std::size_t in_channels() const { return kernel.dim(1); }
  std::size_t out_channels() const { return kernel.dim(0); }

  Tensor kernel;  // C_out × C_in × k × k
  Tensor bias;    // C_out
  Activation activation = Activation::kRelu;
  std::size_t stride = 1;
};

// Four conv stages, each followed by 2×2 average pooling; stage s emits
// base·2^s channels at 1/2^(s+1) of the input resolution.
class Backbone {
 public:
  Backbone() = default;
  Backbone(std::size_t image_channels, std::size_t base_width, Rng& rng);

  std::array<Tensor, 4> forward(Tape& tape, const Tensor& image) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  static std::size_t stage_channels(std::size_t base_width, std::size_t stage) { return base_width << stage; }

  std::array<ConvBlock, 4> stages;
};

struct EncodeDecode {
  Tensor latent;  // 2C × H/4 × W/4
  Tensor recon;   // C × H × W
};

// Two stride-2 conv blocks down to a 2C-channel latent, then two
// (bilinear ×2, conv block) stages back to the input shape.
class EncoderDecoder {
 public:
  EncoderDecoder() = default;
  EncoderDecoder(std::size_t channels, Rng& rng);

  EncodeDecode forward(Tape& tape, const Tensor& f) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  ConvBlock enc1, enc2, dec1, dec2;
};

// 1×1 projection from features to K class logits.
class SegHead {
 public:
  SegHead() = default;
  SegHead(std::size_t in_channels, std::size_t num_classes, Rng& rng);

  Tensor forward(Tape& tape, const Tensor& f) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  ConvBlock proj;
};

}  // namespace msga
