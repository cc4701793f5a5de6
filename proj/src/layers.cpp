#include "msga/layers.hpp"

#include <cmath>

#include "msga/error.hpp"
#include "msga/ops.hpp"

namespace msga {

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

ConvBlock::ConvBlock(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size, Activation act,
                     Rng& rng, std::size_t stride_)
    : kernel({out_channels, in_channels, kernel_size, kernel_size}, 0.0, true),
      bias({out_channels}, 0.0, true),
      activation(act),
      stride(stride_) {
  if (kernel_size % 2 == 0) throw ConfigError("conv block kernel size must be odd");
  const double bound = std::sqrt(6.0 / double(in_channels * kernel_size * kernel_size));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : kernel.values()) v = dist(rng);
}

Tensor ConvBlock::forward(Tape& tape, const Tensor& x) const {
  Tensor y = conv2d(tape, x, kernel, bias, stride, kernel.dim(2) / 2);
  return activation == Activation::kRelu ? relu(tape, y) : y;
}

void ConvBlock::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".kernel", kernel});
  out.push_back({prefix + ".bias", bias});
}

Backbone::Backbone(std::size_t image_channels, std::size_t base_width, Rng& rng) {
  std::size_t in = image_channels;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const std::size_t out = stage_channels(base_width, s);
    stages[s] = ConvBlock(in, out, 3, Activation::kRelu, rng);
    in = out;
  }
}

std::array<Tensor, 4> Backbone::forward(Tape& tape, const Tensor& image) const {
  if (image.rank() != 3) throw DimensionError("backbone expects a C×H×W image, got " + shape_str(image.shape()));
  if (image.dim(1) % 16 || image.dim(2) % 16) {
    throw ConfigError("backbone input " + shape_str(image.shape()) + ": H and W must be divisible by 16");
  }
  std::array<Tensor, 4> features;
  Tensor x = image;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    x = avg_pool2(tape, stages[s].forward(tape, x));
    features[s] = x;
  }
  return features;
}

void Backbone::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t s = 0; s < stages.size(); ++s) stages[s].collect(prefix + ".stage" + std::to_string(s), out);
}

EncoderDecoder::EncoderDecoder(std::size_t channels, Rng& rng)
    : enc1(channels, 2 * channels, 3, Activation::kRelu, rng, 2),
      enc2(2 * channels, 2 * channels, 3, Activation::kRelu, rng, 2),
      dec1(2 * channels, 2 * channels, 3, Activation::kRelu, rng),
      dec2(2 * channels, channels, 3, Activation::kRelu, rng) {}

EncodeDecode EncoderDecoder::forward(Tape& tape, const Tensor& f) const {
  if (f.rank() != 3) throw DimensionError("encoder-decoder expects C×H×W, got " + shape_str(f.shape()));
  const std::size_t h = f.dim(1), w = f.dim(2);
  if (h % 4 || w % 4) {
    throw ConfigError("encoder-decoder input " + shape_str(f.shape()) + ": H and W must be divisible by 4");
  }
  EncodeDecode r;
  r.latent = enc2.forward(tape, enc1.forward(tape, f));
  Tensor up = dec1.forward(tape, bilinear_upsample(tape, r.latent, h / 2, w / 2));
  r.recon = dec2.forward(tape, bilinear_upsample(tape, up, h, w));
  return r;
}

void EncoderDecoder::collect(const std::string& prefix, ParameterList& out) const {
  enc1.collect(prefix + ".enc1", out);
  enc2.collect(prefix + ".enc2", out);
  dec1.collect(prefix + ".dec1", out);
  dec2.collect(prefix + ".dec2", out);
}

SegHead::SegHead(std::size_t in_channels, std::size_t num_classes, Rng& rng)
    : proj(in_channels, num_classes, 1, Activation::kNone, rng) {}

Tensor SegHead::forward(Tape& tape, const Tensor& f) const {
  if (f.rank() != 3 || f.dim(0) != proj.in_channels()) {
    throw DimensionError("segmentation head expects " + std::to_string(proj.in_channels()) +
                         " input channels, got " + shape_str(f.shape()));
  }
  return proj.forward(tape, f);
}

void SegHead::collect(const std::string& prefix, ParameterList& out) const { proj.collect(prefix, out); }

}  // namespace msga
