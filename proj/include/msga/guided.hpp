#pragma once

#include <span>
#include <vector>

#include "msga/attention.hpp"

namespace msga {

struct RefinementStep {
  DualBlock dual;
  EncoderDecoder encdec;
};

// Per-step tensors kept for inspection and tests.
struct StepTrace {
  Tensor input;     // x_{i-1}
  Tensor latent;    // E_i(x_{i-1})
  Tensor recon;     // D_i(E_i(x_{i-1}))
  Tensor attended;  // dual block output on x_{i-1}
  Tensor output;    // x_i = attended ⊙ recon
  Tensor pam_attn, cam_attn;
};

struct GuidedOutput {
  Tensor features;    // x_M
  Tensor guide_loss;  // Σ_{i<M} ‖latent_i − latent_{i+1}‖²
  Tensor recon_loss;  // Σ_i ‖x_{i-1} − recon_i‖²
  std::vector<StepTrace> steps;
};

// M refinement steps. Step i runs a dual attention block and an
// encoder-decoder on the same input x_{i-1} (x_0 is the module input) and
// gates the attended features with the reconstruction: x_i = att_i ⊙ recon_i.
class GuidedModule {
 public:
  GuidedModule() = default;
  GuidedModule(std::size_t channels, std::size_t refinement_steps, Rng& rng);

  GuidedOutput forward(Tape& tape, const Tensor& f) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  std::size_t refinement_steps() const { return steps.size(); }

  std::vector<RefinementStep> steps;
};

struct GuidedTotals {
  Tensor guide;
  Tensor recon;
};

// Plain sums of the per-scale guided and reconstruction losses.
GuidedTotals guided_losses_total(Tape& tape, std::span<const GuidedOutput> outputs);

}  // namespace msga
