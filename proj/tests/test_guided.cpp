#include <gtest/gtest.h>

#include "msga/error.hpp"
#include "msga/gradcheck.hpp"
#include "msga/guided.hpp"
#include "msga/ops.hpp"
#include "test_util.hpp"

using namespace msga;
using msga::testing::random_tensor;

namespace {

// Sets a conv block to copy input channel c into output channel c through
// the centre tap (channels beyond the smaller count are left at zero).
void centre_identity(ConvBlock& conv) {
  for (auto& v : conv.kernel.values()) v = 0;
  for (auto& v : conv.bias.values()) v = 0;
  const std::size_t co = conv.out_channels(), ci = conv.in_channels(), k = conv.kernel.dim(2);
  for (std::size_t c = 0; c < std::min(co, ci); ++c) conv.kernel[((c * ci + c) * k + k / 2) * k + k / 2] = 1.0;
}

double squared_distance(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

TEST(Guided, SingleStepHasZeroGuideLoss) {
  std::mt19937_64 data(1);
  for (int trial = 0; trial < 5; ++trial) {
    Rng rng(trial);
    GuidedModule g(8, 1, rng);
    Tape tape(false);
    const auto out = g.forward(tape, random_tensor({8, 4, 4}, data, 0, 1, false));
    EXPECT_EQ(out.guide_loss.item(), 0.0);
    EXPECT_GE(out.recon_loss.item(), 0.0);
  }
}

TEST(Guided, PerfectAutoencoderHasZeroReconstructionLoss) {
  Rng rng(2);
  GuidedModule g(8, 2, rng);
  for (auto& step : g.steps) {
    centre_identity(step.encdec.enc1);
    centre_identity(step.encdec.enc2);
    centre_identity(step.encdec.dec1);
    centre_identity(step.encdec.dec2);
  }
  // A constant positive map survives stride-2 sampling, corner-aligned
  // upsampling and relu unchanged. The dual blocks keep their random weights,
  // so the second step reconstructs whatever the first one produced.
  Tape tape(false);
  const auto one = g.forward(tape, Tensor({8, 8, 8}, 0.75));
  EXPECT_EQ(one.steps[0].recon.shape(), (Shape{8, 8, 8}));
  EXPECT_NEAR(squared_distance(one.steps[0].input, one.steps[0].recon), 0.0, 1e-24);
  GuidedModule single(8, 1, rng);
  for (ConvBlock* c : {&single.steps[0].encdec.enc1, &single.steps[0].encdec.enc2, &single.steps[0].encdec.dec1,
                       &single.steps[0].encdec.dec2}) {
    centre_identity(*c);
  }
  EXPECT_EQ(single.forward(tape, Tensor({8, 8, 8}, 0.75)).recon_loss.item(), 0.0);
}

TEST(Guided, TwoStepLossesMatchIndependentRecomputation) {
  Rng rng(3);
  GuidedModule g(8, 2, rng);
  std::mt19937_64 data(4);
  Tensor f = random_tensor({8, 4, 4}, data, 0, 1, false);
  Tape tape(false);
  const auto out = g.forward(tape, f);

  const auto& s1 = g.steps[0];
  const auto& s2 = g.steps[1];
  Tensor latent1 = s1.encdec.enc2.forward(tape, s1.encdec.enc1.forward(tape, f));
  Tensor recon1 = s1.encdec.forward(tape, f).recon;
  Tensor x1 = mul(tape, s1.dual.forward(tape, f).out, recon1);
  Tensor latent2 = s2.encdec.enc2.forward(tape, s2.encdec.enc1.forward(tape, x1));
  Tensor recon2 = s2.encdec.forward(tape, x1).recon;

  EXPECT_NEAR(out.guide_loss.item(), squared_distance(latent1, latent2), 1e-10);
  EXPECT_NEAR(out.recon_loss.item(), squared_distance(f, recon1) + squared_distance(x1, recon2), 1e-10);
  EXPECT_GT(out.guide_loss.item(), 0.0);
}

TEST(Guided, RunsExactlyMStepsAndPreservesShape) {
  std::mt19937_64 data(5);
  for (std::size_t m : {1u, 2u, 3u, 5u}) {
    Rng rng(m);
    GuidedModule g(8, m, rng);
    EXPECT_EQ(g.refinement_steps(), m);
    Tape tape(false);
    Tensor f = random_tensor({8, 4, 8}, data, 0, 1, false);
    const auto out = g.forward(tape, f);
    ASSERT_EQ(out.steps.size(), m);
    for (std::size_t i = 0; i < m; ++i) {
      EXPECT_EQ(out.steps[i].pam_attn.shape(), (Shape{32, 32}));
      EXPECT_EQ(out.steps[i].cam_attn.shape(), (Shape{8, 8}));
      EXPECT_EQ(out.steps[i].latent.shape(), (Shape{16, 1, 2}));
      if (i > 0) {
        EXPECT_TRUE(out.steps[i].input.same_storage(out.steps[i - 1].output));
      }
    }
    EXPECT_EQ(out.features.shape(), f.shape());
    EXPECT_GE(out.guide_loss.item(), 0.0);
    EXPECT_GE(out.recon_loss.item(), 0.0);
  }
}

TEST(Guided, ZeroStepsIsAConfigurationError) {
  Rng rng(1);
  EXPECT_THROW(GuidedModule(8, 0, rng), ConfigError);
}

TEST(Guided, TotalsAreSumsOverScales) {
  Tape tape(false);
  std::vector<GuidedOutput> outs(4);
  const double guide[] = {0.5, 1.25, 0.0, 3.0}, recon[] = {2.0, 0.25, 7.5, 1.0};
  for (std::size_t s = 0; s < 4; ++s) {
    outs[s].guide_loss = Tensor::scalar(guide[s]);
    outs[s].recon_loss = Tensor::scalar(recon[s]);
  }
  auto t = guided_losses_total(tape, outs);
  EXPECT_EQ(t.guide.item(), 4.75);
  EXPECT_EQ(t.recon.item(), 10.75);
  auto one = guided_losses_total(tape, std::span(outs).first(1));
  EXPECT_EQ(one.guide.item(), 0.5);
  EXPECT_EQ(one.recon.item(), 2.0);
  EXPECT_THROW(guided_losses_total(tape, std::span<const GuidedOutput>()), UsageError);
}

TEST(Guided, GradientCheck) {
  for (const auto& c : run_gradcheck_scope(GradcheckScope::kBlock, 7)) {
    EXPECT_TRUE(c.passed()) << c.name << " " << c.result.max_rel_error;
  }
}
