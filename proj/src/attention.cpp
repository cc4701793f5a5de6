#include "msga/attention.hpp"

#include "msga/error.hpp"
#include "msga/ops.hpp"

namespace msga {

namespace {

void require_feature_map(const Tensor& f, const char* who) {
  if (f.rank() != 3) throw DimensionError(std::string(who) + " expects C×H×W, got " + shape_str(f.shape()));
}

// The attention map is reported for inspection only; it is not differentiated.
Tensor untracked_transpose(const Tensor& t) {
  Tape off(false);
  return transpose(off, t);
}

}  // namespace

PamBlock::PamBlock(std::size_t channels, Rng& rng) : lambda(Tensor::scalar(0.0, true)) {
  if (channels % 8 != 0 || channels == 0) {
    throw ConfigError("position attention needs a channel count divisible by 8, got " + std::to_string(channels));
  }
  proj_b = ConvBlock(channels, channels / 8, 1, Activation::kNone, rng);
  proj_c = ConvBlock(channels, channels / 8, 1, Activation::kNone, rng);
  proj_d = ConvBlock(channels, channels, 1, Activation::kNone, rng);
}

AttentionResult PamBlock::forward(Tape& tape, const Tensor& f) const {
  require_feature_map(f, "position attention");
  const std::size_t c = f.dim(0), n = f.dim(1) * f.dim(2);
  if (c != proj_b.in_channels()) {
    throw ConfigError("position attention built for " + std::to_string(proj_b.in_channels()) +
                      " channels, got " + shape_str(f.shape()));
  }
  const std::size_t cq = proj_b.out_channels();
  Tensor q = reshape(tape, proj_b.forward(tape, f), {cq, n});
  Tensor k = reshape(tape, proj_c.forward(tape, f), {cq, n});
  Tensor v = reshape(tape, proj_d.forward(tape, f), {c, n});

  // energy_t[j][i] = k_j · q_i; softmax along i, one row per target j
  Tensor st = softmax_rows(tape, matmul(tape, transpose(tape, k), q));
  Tensor context = matmul(tape, v, transpose(tape, st));  // Σ_i v_i s[i][j]
  Tensor gated = scale_by(tape, reshape(tape, context, f.shape()), lambda);
  return {add(tape, gated, f), untracked_transpose(st)};
}

void PamBlock::collect(const std::string& prefix, ParameterList& out) const {
  proj_b.collect(prefix + ".proj_b", out);
  proj_c.collect(prefix + ".proj_c", out);
  proj_d.collect(prefix + ".proj_d", out);
  out.push_back({prefix + ".lambda", lambda});
}

CamBlock::CamBlock() : lambda(Tensor::scalar(0.0, true)) {}

AttentionResult CamBlock::forward(Tape& tape, const Tensor& f) const {
  require_feature_map(f, "channel attention");
  const std::size_t c = f.dim(0), n = f.dim(1) * f.dim(2);
  Tensor flat = reshape(tape, f, {c, n});
  // The Gram matrix is symmetric, so it already has the target-major layout.
  Tensor st = softmax_rows(tape, matmul(tape, flat, transpose(tape, flat)));
  Tensor context = matmul(tape, st, flat);  // row j: Σ_i s[i][j] f_i
  Tensor gated = scale_by(tape, reshape(tape, context, f.shape()), lambda);
  return {add(tape, gated, f), untracked_transpose(st)};
}

void CamBlock::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".lambda", lambda});
}

DualBlock::DualBlock(std::size_t channels, Rng& rng)
    : pam(channels, rng),
      out_pam(channels, channels, 3, Activation::kRelu, rng),
      out_cam(channels, channels, 3, Activation::kRelu, rng) {}

DualResult DualBlock::forward(Tape& tape, const Tensor& f) const {
  AttentionResult p = pam.forward(tape, f);
  AttentionResult c = cam.forward(tape, f);
  Tensor out = add(tape, out_pam.forward(tape, p.out), out_cam.forward(tape, c.out));
  return {out, p.attn, c.attn};
}

void DualBlock::collect(const std::string& prefix, ParameterList& out) const {
  pam.collect(prefix + ".pam", out);
  cam.collect(prefix + ".cam", out);
  out_pam.collect(prefix + ".out_pam", out);
  out_cam.collect(prefix + ".out_cam", out);
}

}  // namespace msga
