#pragma once

#include "msga/layers.hpp"

namespace msga {

struct AttentionResult {
  Tensor out;   // C×H×W
  Tensor attn;  // normalised so that every column attn[·, j] sums to 1
};

// Position attention. With N = H·W positions, query/key projections
// q = proj_b(f), k = proj_c(f) (C/8 channels) and value v = proj_d(f):
//
//   s[i][j] = exp(q_i · k_j) / Σ_i' exp(q_i' · k_j)
//   out_j   = λ_p · Σ_i s[i][j] · v_i + f_j
//
// λ_p starts at 0, so a freshly built block is the identity.
class PamBlock {
 public:
  PamBlock() = default;
  PamBlock(std::size_t channels, Rng& rng);

  AttentionResult forward(Tape& tape, const Tensor& f) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  ConvBlock proj_b, proj_c, proj_d;
  Tensor lambda;
};

// Channel attention, no projections:
//
//   s[i][j] = exp(f_i · f_j) / Σ_i' exp(f_i' · f_j)   (f_i = channel i, flattened)
//   out_j   = λ_c · Σ_i s[i][j] · f_i + f_j
class CamBlock {
 public:
  CamBlock();

  AttentionResult forward(Tape& tape, const Tensor& f) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor lambda;
};

struct DualResult {
  Tensor out;
  Tensor pam_attn;
  Tensor cam_attn;
};

// PAM and CAM on the same input; each branch goes through its own 3×3 conv
// block and the two results are summed.
class DualBlock {
 public:
  DualBlock() = default;
  DualBlock(std::size_t channels, Rng& rng);

  DualResult forward(Tape& tape, const Tensor& f) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  PamBlock pam;
  CamBlock cam;
  ConvBlock out_pam, out_cam;
};

}  // namespace msga
