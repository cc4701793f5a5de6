#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "msga/error.hpp"
#include "msga/ops.hpp"
#include "test_util.hpp"

using namespace msga;
using msga::testing::max_rel_error;
using msga::testing::numeric_grad;
using msga::testing::random_tensor;

TEST(Tensor, RejectsZeroDimension) {
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(Tensor, CopiesShareStorageAndCloneDoesNot) {
  Tensor a({2}, std::vector<double>{1, 2});
  Tensor b = a;
  Tensor c = a.clone();
  b[0] = 7;
  EXPECT_EQ(a[0], 7);
  EXPECT_EQ(c[0], 1);
  EXPECT_TRUE(a.same_storage(b));
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Matmul, IdentityAndDot) {
  Tape tape(false);
  Tensor eye({2, 2}, std::vector<double>{1, 0, 0, 1});
  Tensor m({2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor p = matmul(tape, eye, m);
  EXPECT_EQ(std::vector<double>(p.values().begin(), p.values().end()), (std::vector<double>{1, 2, 3, 4}));
  Tensor dot = matmul(tape, Tensor({1, 2}, std::vector<double>{1, 2}), Tensor({2, 1}, std::vector<double>{3, 4}));
  EXPECT_EQ(dot.shape(), (Shape{1, 1}));
  EXPECT_EQ(dot[0], 11);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape tape(false);
  try {
    matmul(tape, Tensor({2, 3}), Tensor({2, 3}));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
  }
}

TEST(Matmul, GradientOfSumIsOnesTimesBTransposed) {
  std::mt19937_64 rng(3);
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng, -1, 1, false);
  Tape tape;
  tape.backward(sum_all(tape, matmul(tape, a, b)));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(a.grad()[i * 4 + j], b[j * 2] + b[j * 2 + 1], 1e-14);
  }
  Tape off(false);
  auto num = numeric_grad([&] { return sum_all(off, matmul(off, a, b)).item(); }, a);
  EXPECT_LT(max_rel_error(a.grad(), num), 1e-8);
}

TEST(Softmax, Examples) {
  Tape tape(false);
  Tensor u = softmax_rows(tape, Tensor({1, 3}, 0.0));
  for (double v : u.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  Tensor c = softmax_rows(tape, Tensor({1, 4}, 123.5));
  for (double v : c.values()) EXPECT_NEAR(v, 0.25, 1e-15);
  Tensor p = softmax_rows(tape, Tensor({1, 2}, std::vector<double>{0.0, std::log(3.0)}));
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Softmax, RowsSumToOneAndAreShiftInvariant) {
  std::mt19937_64 rng(11);
  Tape tape(false);
  std::uniform_real_distribution<double> shift(-50, 50);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x = random_tensor({4, 7}, rng, -20, 20, false);
    Tensor y = softmax_rows(tape, x);
    Tensor xs = x.clone();
    for (std::size_t r = 0; r < 4; ++r) {
      const double c = shift(rng);
      for (std::size_t j = 0; j < 7; ++j) xs[r * 7 + j] += c;
    }
    Tensor ys = softmax_rows(tape, xs);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < 7; ++j) {
        EXPECT_GE(y[r * 7 + j], 0.0);
        s += y[r * 7 + j];
        EXPECT_NEAR(y[r * 7 + j], ys[r * 7 + j], 1e-9);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Softmax, LargeInputsStayFinite) {
  Tape tape(false);
  Tensor y = softmax_rows(tape, Tensor({1, 2}, std::vector<double>{1000.0, -1000.0}));
  EXPECT_TRUE(std::isfinite(y[0]) && std::isfinite(y[1]));
  EXPECT_NEAR(y[0], 1.0, 1e-15);
}

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(5);
  Tape tape(false);
  Tensor x = random_tensor({1, 4, 5}, rng, -1, 1, false);
  Tensor y = conv2d(tape, x, Tensor({1, 1, 1, 1}, 1.0), Tensor({1}, 0.0), 1, 0);
  EXPECT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv2d, OnesKernelCountsOverlap) {
  Tape tape(false);
  Tensor y = conv2d(tape, Tensor({1, 5, 5}, 1.0), Tensor({1, 1, 3, 3}, 1.0), Tensor(), 1, 1);
  EXPECT_EQ(y[2 * 5 + 2], 9);
  EXPECT_EQ(y[0], 4);
  EXPECT_EQ(y[4], 4);
  EXPECT_EQ(y[20], 4);
  EXPECT_EQ(y[24], 4);
  EXPECT_EQ(y[2], 6);
}

TEST(Conv2d, AllThreeGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(21);
  Tensor x = random_tensor({2, 6, 6}, rng), k = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
  Tensor w = random_tensor({3, 6, 6}, rng, -1, 1, false);
  auto loss = [&](Tape& t) { return sum_all(t, mul(t, conv2d(t, x, k, b, 1, 1), w)); };
  Tape tape;
  tape.backward(loss(tape));
  Tape off(false);
  auto f = [&] { return loss(off).item(); };
  EXPECT_LT(max_rel_error(x.grad(), numeric_grad(f, x)), 1e-6);
  EXPECT_LT(max_rel_error(k.grad(), numeric_grad(f, k)), 1e-6);
  EXPECT_LT(max_rel_error(b.grad(), numeric_grad(f, b)), 1e-6);
}

TEST(Conv2d, ConfigurationErrors) {
  Tape tape(false);
  EXPECT_THROW(conv2d(tape, Tensor({1, 4, 4}), Tensor({1, 1, 2, 2}), Tensor(), 1, 0), ConfigError);
  EXPECT_THROW(conv2d(tape, Tensor({1, 4, 4}), Tensor({1, 1, 3, 3}), Tensor(), 0, 1), ConfigError);
  EXPECT_THROW(conv2d(tape, Tensor({1, 2, 2}), Tensor({1, 1, 5, 5}), Tensor(), 1, 0), ConfigError);
  EXPECT_THROW(conv2d(tape, Tensor({2, 4, 4}), Tensor({1, 1, 3, 3}), Tensor(), 1, 1), DimensionError);
}

TEST(Conv2d, StrideTwoHalvesEvenSizes) {
  Tape tape(false);
  Tensor y = conv2d(tape, Tensor({1, 8, 6}, 1.0), Tensor({2, 1, 3, 3}, 1.0), Tensor(), 2, 1);
  EXPECT_EQ(y.shape(), (Shape{2, 4, 3}));
}

TEST(Upsample, ConstantStaysConstant) {
  Tape tape(false);
  Tensor y = bilinear_upsample(tape, Tensor({2, 3, 2}, 5.0), 7, 9);
  for (double v : y.values()) EXPECT_NEAR(v, 5.0, 1e-14);
}

TEST(Upsample, CornersAlignAndMidpoint) {
  Tape tape(false);
  Tensor x({1, 2, 2}, std::vector<double>{0, 1, 2, 3});
  Tensor y = bilinear_upsample(tape, x, 4, 4);
  EXPECT_EQ(y[0], 0);
  EXPECT_EQ(y[3], 1);
  EXPECT_EQ(y[12], 2);
  EXPECT_EQ(y[15], 3);
  Tensor z = bilinear_upsample(tape, x, 3, 3);
  EXPECT_NEAR(z[4], 1.5, 1e-15);
}

TEST(Upsample, DownscalingIsAConfigurationError) {
  Tape tape(false);
  EXPECT_THROW(bilinear_upsample(tape, Tensor({1, 4, 4}), 2, 4), ConfigError);
}

TEST(Shape, PermuteRoundTripIsExact) {
  std::mt19937_64 rng(8);
  Tape tape(false);
  Tensor x = random_tensor({2, 3, 4}, rng, -1, 1, false);
  const std::size_t axes[] = {2, 0, 1}, inverse[] = {1, 2, 0};
  Tensor p = permute(tape, x, axes);
  EXPECT_EQ(p.shape(), (Shape{4, 2, 3}));
  Tensor back = permute(tape, p, inverse);
  EXPECT_EQ(back.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(back[i], x[i]);
  Tensor r = reshape(tape, reshape(tape, x, {6, 4}), {2, 3, 4});
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(r[i], x[i]);
}

TEST(Shape, ConcatPreservesOrder) {
  Tape tape(false);
  const Tensor parts[] = {Tensor({2, 1, 2}, std::vector<double>{1, 2, 3, 4}),
                          Tensor({3, 1, 2}, std::vector<double>{5, 6, 7, 8, 9, 10})};
  Tensor c = concat_channels(tape, parts);
  EXPECT_EQ(c.shape(), (Shape{5, 1, 2}));
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(c[i], double(i + 1));
}

TEST(Shape, MismatchesAreDimensionErrors) {
  Tape tape(false);
  EXPECT_THROW(reshape(tape, Tensor({2, 3}), {4, 2}), DimensionError);
  EXPECT_THROW(add(tape, Tensor({2, 3}), Tensor({3, 2})), DimensionError);
  const Tensor parts[] = {Tensor({1, 2, 2}), Tensor({1, 2, 3})};
  EXPECT_THROW(concat_channels(tape, parts), DimensionError);
  const std::size_t bad_axes[] = {0, 0};
  EXPECT_THROW(permute(tape, Tensor({2, 2}), bad_axes), DimensionError);
}

TEST(Backward, SumAndQuadratic) {
  std::mt19937_64 rng(2);
  Tensor x = random_tensor({3, 2}, rng);
  {
    Tape tape;
    tape.backward(sum_all(tape, x));
    for (double g : x.grad()) EXPECT_EQ(g, 1.0);
  }
  x.zero_grad();
  {
    Tape tape;
    tape.backward(sum_all(tape, mul(tape, x, x)));
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x.grad()[i], 2 * x[i]);
  }
}

TEST(Backward, RepeatedSweepDoublesAndZeroGradResets) {
  std::mt19937_64 rng(4);
  Tensor x = random_tensor({4}, rng);
  Tape tape;
  Tensor loss = sum_squares(tape, scale(tape, x, 3.0));
  tape.backward(loss);
  std::vector<double> once(x.grad().begin(), x.grad().end());
  tape.backward(loss);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2 * once[i]);
  x.zero_grad();
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, IsLinearInTheLoss) {
  std::mt19937_64 rng(6);
  Tensor x = random_tensor({3, 3}, rng);
  auto l1 = [&](Tape& t) { return sum_squares(t, x); };
  auto l2 = [&](Tape& t) { return sum_all(t, relu(t, x)); };
  std::vector<double> separate(9, 0.0);
  {
    Tape t;
    t.backward(l1(t));
  }
  {
    Tape t;
    t.backward(l2(t));
  }
  separate.assign(x.grad().begin(), x.grad().end());
  x.zero_grad();
  Tape t;
  t.backward(add(t, l1(t), l2(t)));
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(x.grad()[i], separate[i], 1e-15);
}

TEST(Backward, UsageErrors) {
  Tensor x({2}, 1.0, true);
  Tape tape;
  EXPECT_THROW(tape.backward(scale(tape, x, 2.0)), UsageError);
  EXPECT_THROW(tape.backward(Tensor::scalar(1.0)), UsageError);
  Tape other;
  Tensor foreign = sum_all(other, x);
  EXPECT_THROW(tape.backward(foreign), UsageError);
}

TEST(Backward, DisabledTapeRecordsNothing) {
  Tensor x({2}, 1.0, true);
  Tape off(false);
  Tensor y = sum_all(off, x);
  EXPECT_EQ(off.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Relu, SubgradientIsZeroAtZero) {
  Tensor x({3}, std::vector<double>{-1, 0, 2}, true);
  Tape tape;
  tape.backward(sum_all(tape, relu(tape, x)));
  EXPECT_EQ(x.grad()[0], 0);
  EXPECT_EQ(x.grad()[1], 0);
  EXPECT_EQ(x.grad()[2], 1);
}

TEST(CrossEntropy, MatchesPerPixelLoop) {
  std::mt19937_64 rng(9);
  Tensor logits = random_tensor({2, 2, 2}, rng, -3, 3, false);
  LabelMap labels({2, 2}, std::vector<int>{0, 1, 1, 0});
  Tape tape(false);
  const double got = cross_entropy(tape, logits, labels).item();
  double expected = 0;
  for (std::size_t p = 0; p < 4; ++p) {
    const double z0 = logits[p], z1 = logits[4 + p];
    const double zt = labels.values[p] == 0 ? z0 : z1;
    expected += -(zt - std::log(std::exp(z0) + std::exp(z1)));
  }
  EXPECT_NEAR(got, expected / 4, 1e-12);
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  Tape tape(false);
  const double ce = cross_entropy(tape, Tensor({4, 3, 3}, 0.7), LabelMap({3, 3}, 2)).item();
  EXPECT_NEAR(ce, std::log(4.0), 1e-14);
}

TEST(CrossEntropy, RejectsBadLabels) {
  Tape tape(false);
  EXPECT_THROW(cross_entropy(tape, Tensor({2, 2, 2}), LabelMap({2, 2}, 2)), DataError);
  EXPECT_THROW(cross_entropy(tape, Tensor({2, 2, 2}), LabelMap({2, 3}, 0)), DataError);
}

TEST(AvgPool, AveragesBlocks) {
  Tape tape(false);
  Tensor y = avg_pool2(tape, Tensor({1, 2, 4}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2}));
  EXPECT_EQ(y[0], 3.5);
  EXPECT_EQ(y[1], 5.5);
}

// Every op, every input: analytic against central differences at 1e-6.
TEST(Gradients, EveryOpMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  const LabelMap labels({2, 3}, std::vector<int>{0, 2, 1, 1, 0, 2});
  struct Case {
    const char* name;
    std::vector<Tensor> in;
    std::function<Tensor(Tape&, const std::vector<Tensor>&)> f;
  };
  auto t = [&](Shape s) { return random_tensor(std::move(s), rng); };
  Tensor away({3, 4}, 0.0, true);
  {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (auto& v : away.values()) v = sign(rng) ? u(rng) : -u(rng);
  }
  std::vector<Case> cases = {
      {"matmul", {t({2, 3}), t({3, 4})}, [](Tape& tp, auto& a) { return matmul(tp, a[0], a[1]); }},
      {"transpose", {t({2, 3})}, [](Tape& tp, auto& a) { return transpose(tp, a[0]); }},
      {"reshape", {t({2, 6})}, [](Tape& tp, auto& a) { return reshape(tp, a[0], {3, 4}); }},
      {"permute", {t({2, 3, 2})}, [](Tape& tp, auto& a) {
         const std::size_t ax[] = {1, 2, 0};
         return permute(tp, a[0], ax);
       }},
      {"concat", {t({1, 2, 2}), t({2, 2, 2})}, [](Tape& tp, auto& a) { return concat_channels(tp, a); }},
      {"add", {t({3}), t({3})}, [](Tape& tp, auto& a) { return add(tp, a[0], a[1]); }},
      {"sub", {t({3}), t({3})}, [](Tape& tp, auto& a) { return sub(tp, a[0], a[1]); }},
      {"mul", {t({3}), t({3})}, [](Tape& tp, auto& a) { return mul(tp, a[0], a[1]); }},
      {"scale", {t({3})}, [](Tape& tp, auto& a) { return scale(tp, a[0], 0.3); }},
      {"scale_by", {t({3}), t({1})}, [](Tape& tp, auto& a) { return scale_by(tp, a[0], a[1]); }},
      {"relu", {away}, [](Tape& tp, auto& a) { return relu(tp, a[0]); }},
      {"sum_squares", {t({4})}, [](Tape& tp, auto& a) { return sum_squares(tp, a[0]); }},
      {"softmax", {t({3, 4})}, [](Tape& tp, auto& a) { return softmax_rows(tp, a[0]); }},
      {"conv_stride2", {t({2, 6, 6}), t({3, 2, 3, 3}), t({3})},
       [](Tape& tp, auto& a) { return conv2d(tp, a[0], a[1], a[2], 2, 1); }},
      {"conv_1x1", {t({4, 3, 3}), t({2, 4, 1, 1}), t({2})},
       [](Tape& tp, auto& a) { return conv2d(tp, a[0], a[1], a[2], 1, 0); }},
      {"upsample", {t({2, 2, 3})}, [](Tape& tp, auto& a) { return bilinear_upsample(tp, a[0], 5, 7); }},
      {"avg_pool", {t({2, 4, 4})}, [](Tape& tp, auto& a) { return avg_pool2(tp, a[0]); }},
      {"cross_entropy", {t({3, 2, 3})}, [&labels](Tape& tp, auto& a) { return cross_entropy(tp, a[0], labels); }},
  };
  for (auto& c : cases) {
    Tape probe(false);
    Tensor w = random_tensor(c.f(probe, c.in).shape(), rng, -1, 1, false);
    auto loss = [&](Tape& tp) { return sum_all(tp, mul(tp, c.f(tp, c.in), w)); };
    Tape tape;
    tape.backward(loss(tape));
    Tape off(false);
    for (auto& x : c.in) {
      const auto num = numeric_grad([&] { return loss(off).item(); }, x);
      EXPECT_LT(max_rel_error(x.grad(), num), 1e-6) << c.name;
    }
  }
}
