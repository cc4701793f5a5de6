#include "msga/guided.hpp"

#include "msga/error.hpp"
#include "msga/ops.hpp"

namespace msga {

GuidedModule::GuidedModule(std::size_t channels, std::size_t refinement_steps, Rng& rng) {
  if (refinement_steps == 0) throw ConfigError("guided attention needs at least one refinement step");
  steps.reserve(refinement_steps);
  for (std::size_t i = 0; i < refinement_steps; ++i) {
    RefinementStep step;
    step.dual = DualBlock(channels, rng);
    step.encdec = EncoderDecoder(channels, rng);
    steps.push_back(std::move(step));
  }
}

GuidedOutput GuidedModule::forward(Tape& tape, const Tensor& f) const {
  GuidedOutput r;
  r.steps.reserve(steps.size());
  Tensor x = f;
  Tensor guide, recon;
  for (const auto& step : steps) {
    EncodeDecode ed = step.encdec.forward(tape, x);
    DualResult att = step.dual.forward(tape, x);
    Tensor next = mul(tape, att.out, ed.recon);

    Tensor rec = sum_squares(tape, sub(tape, x, ed.recon));
    recon = recon.defined() ? add(tape, recon, rec) : rec;
    if (!r.steps.empty()) {
      Tensor g = sum_squares(tape, sub(tape, r.steps.back().latent, ed.latent));
      guide = guide.defined() ? add(tape, guide, g) : g;
    }
    r.steps.push_back({x, ed.latent, ed.recon, att.out, next, att.pam_attn, att.cam_attn});
    x = next;
  }
  r.features = x;
  r.recon_loss = recon;
  r.guide_loss = guide.defined() ? guide : Tensor::scalar(0.0);
  return r;
}

void GuidedModule::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string p = prefix + ".step" + std::to_string(i);
    steps[i].dual.collect(p + ".dual", out);
    steps[i].encdec.collect(p + ".encdec", out);
  }
}

GuidedTotals guided_losses_total(Tape& tape, std::span<const GuidedOutput> outputs) {
  if (outputs.empty()) throw UsageError("guided_losses_total needs at least one scale");
  GuidedTotals t{outputs[0].guide_loss, outputs[0].recon_loss};
  for (std::size_t s = 1; s < outputs.size(); ++s) {
    t.guide = add(tape, t.guide, outputs[s].guide_loss);
    t.recon = add(tape, t.recon, outputs[s].recon_loss);
  }
  return t;
}

}  // namespace msga
