#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "msga/guided.hpp"
#include "msga/label_map.hpp"
#include "msga/layers.hpp"

namespace msga {

inline constexpr std::size_t kNumScales = 4;

struct NetworkConfig {
  std::size_t num_classes = 4;
  std::size_t image_channels = 1;
  std::size_t base_width = 8;
  std::size_t fusion_channels = 16;
  std::size_t refinement_steps = 2;
  double alpha = 1.0;
  double beta = 0.25;
  double gamma = 0.1;
  std::size_t height = 32;
  std::size_t width = 32;
  std::uint64_t seed = 1;  // parameter initialisation

  void validate() const;

  // key=value lines, one per field
  std::string to_text() const;
  static NetworkConfig from_text(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static NetworkConfig load(const std::filesystem::path& path);

  // Names of fields whose values differ.
  std::vector<std::string> differences(const NetworkConfig& other) const;

  // Heads predict at half the input resolution.
  std::size_t head_height() const { return height / 2; }
  std::size_t head_width() const { return width / 2; }
};

struct ForwardOptions {
  // Replace the multi-scale fusion map with zeros (wiring checks).
  bool ablate_multiscale = false;
};

struct ForwardResult {
  Tensor logits_final;  // K × H/2 × W/2, attentive head at scale 0
  std::array<Tensor, kNumScales> raw_logits;
  std::array<Tensor, kNumScales> attentive_logits;
  std::array<Tensor, kNumScales> attentive;  // A_s
  std::vector<GuidedOutput> guided;
  Tensor guide_total;
  Tensor recon_total;
};

struct LossBreakdown {
  Tensor total;
  Tensor seg;
  Tensor guide;
  Tensor recon;
  std::size_t ce_terms = 0;
};

class MsgaNet {
 public:
  explicit MsgaNet(const NetworkConfig& cfg);
  // Parameters are tensor handles; a copy would alias them.
  MsgaNet(const MsgaNet&) = delete;
  MsgaNet& operator=(const MsgaNet&) = delete;
  MsgaNet(MsgaNet&&) = default;
  MsgaNet& operator=(MsgaNet&&) = default;

  const NetworkConfig& config() const { return cfg_; }

  ForwardResult forward(Tape& tape, const Tensor& image, const ForwardOptions& opts = {}) const;
  // Full-resolution label map: final logits upsampled to H×W, then argmax.
  LabelMap predict(const Tensor& image) const;

  const ParameterList& parameters() const { return params_; }
  std::size_t parameter_count() const;

  // Checkpoint directory plus net.cfg beside the parameter files.
  void save(const std::filesystem::path& dir) const;
  static MsgaNet load(const std::filesystem::path& dir);

  Backbone backbone;
  ConvBlock fuse_multiscale;
  std::array<ConvBlock, kNumScales> fuse_scale;
  std::array<GuidedModule, kNumScales> guided;
  std::array<SegHead, kNumScales> raw_heads;
  std::array<SegHead, kNumScales> attentive_heads;

 private:
  NetworkConfig cfg_;
  ParameterList params_;
};

// α·seg + β·guide + γ·recon.
Tensor compose_total(Tape& tape, const Tensor& seg, const Tensor& guide, const Tensor& recon,
                     const NetworkConfig& cfg);

// Deep-supervised objective. `labels` may be at input resolution (they are
// nearest-neighbour downsampled) or already at head resolution.
LossBreakdown total_loss(Tape& tape, const ForwardResult& r, const LabelMap& labels, const NetworkConfig& cfg);

}  // namespace msga
