#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "metrics_oracle.hpp"
#include "msga/error.hpp"
#include "msga/metrics.hpp"

using namespace msga;
using namespace msga::metrics;
using namespace msga::testing;

namespace {

Mask mask_from(std::size_t h, std::size_t w, std::initializer_list<std::pair<std::size_t, std::size_t>> on) {
  Mask m{{h, w}, std::vector<std::uint8_t>(h * w, 0)};
  for (auto [y, x] : on) m.on[y * w + x] = 1;
  return m;
}

Mask square(std::size_t n, std::size_t y0, std::size_t x0, std::size_t side) {
  Mask m{{n, n}, std::vector<std::uint8_t>(n * n, 0)};
  for (std::size_t y = y0; y < y0 + side; ++y)
    for (std::size_t x = x0; x < x0 + side; ++x) m.on[y * n + x] = 1;
  return m;
}

}  // namespace

TEST(Dsc, Examples) {
  const Mask a = mask_from(4, 4, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  EXPECT_EQ(dsc(a, a), 1.0);
  EXPECT_EQ(dsc(a, mask_from(4, 4, {{3, 3}})), 0.0);
  EXPECT_DOUBLE_EQ(dsc(a, mask_from(4, 4, {{0, 0}, {1, 1}})), 2.0 / 3.0);
  const Mask empty{{4, 4}, std::vector<std::uint8_t>(16, 0)};
  EXPECT_EQ(dsc(empty, empty), 1.0);
  EXPECT_EQ(dsc(a, empty), 0.0);
  EXPECT_THROW(dsc(a, Mask{{4, 3}, std::vector<std::uint8_t>(12, 0)}), DimensionError);
}

TEST(Vs, Examples) {
  const Mask a3 = mask_from(4, 4, {{0, 0}, {0, 1}, {2, 2}});
  EXPECT_EQ(vs(a3, mask_from(4, 4, {{3, 3}, {3, 2}, {1, 1}})), 1.0);
  EXPECT_EQ(vs(a3, mask_from(4, 4, {{3, 3}})), 0.5);
  const Mask nine = square(4, 0, 0, 3);
  EXPECT_EQ(vs(nine, Mask{{4, 4}, std::vector<std::uint8_t>(16, 0)}), 0.0);
  EXPECT_THROW(vs(a3, Mask{{2, 8}, std::vector<std::uint8_t>(16, 0)}), DimensionError);
}

TEST(Msd, Examples) {
  const Mask a = square(8, 2, 2, 3);
  EXPECT_EQ(msd(a, a), 0.0);
  EXPECT_DOUBLE_EQ(*msd(mask_from(8, 8, {{4, 1}}), mask_from(8, 8, {{4, 4}})), 3.0);
  const Mask p = square(8, 1, 1, 2), q = square(8, 3, 1, 2);
  EXPECT_NEAR(*msd(p, q), msd_oracle(p, q), 1e-12);
  EXPECT_FALSE(msd(a, Mask{{8, 8}, std::vector<std::uint8_t>(64, 0)}).has_value());
}

TEST(Msd, SurfaceUsesFaceNeighboursAndGridBorder) {
  const Mask a = square(5, 0, 0, 5);
  EXPECT_EQ(surface_points(a).size(), 16u);
  const Mask b = square(7, 1, 1, 5);
  EXPECT_EQ(surface_points(b).size(), 16u);
  const Mask c = square(7, 1, 1, 3);
  EXPECT_EQ(surface_points(c).size(), 8u);
}

TEST(Metrics, MatchOraclesOnRandomPairs) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> size(2, 9);
  std::uniform_real_distribution<double> density(0.1, 0.7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = size(rng), w = size(rng);
    const Mask a = random_mask(h, w, density(rng), rng), b = random_mask(h, w, density(rng), rng);
    EXPECT_NEAR(dsc(a, b), dsc_oracle(a, b), 1e-12);
    EXPECT_NEAR(vs(a, b), vs_oracle(a, b), 1e-12);
    EXPECT_NEAR(*msd(a, b), msd_oracle(a, b), 1e-12);
  }
}

TEST(Metrics, ThreeDimensionalMasks) {
  Mask a{{3, 3, 3}, std::vector<std::uint8_t>(27, 1)};
  EXPECT_EQ(surface_points(a).size(), 26u);
  Mask b = a;
  b.on[0] = 0;
  EXPECT_NEAR(dsc(a, b), 2.0 * 26 / 53, 1e-15);
  EXPECT_GT(*msd(a, b), 0.0);
}

TEST(Metrics, Symmetry) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Mask a = random_mask(7, 6, 0.4, rng), b = random_mask(7, 6, 0.3, rng);
    EXPECT_EQ(dsc(a, b), dsc(b, a));
    EXPECT_EQ(vs(a, b), vs(b, a));
    EXPECT_EQ(*msd(a, b), *msd(b, a));
  }
}

TEST(Metrics, MsdTranslationInvariance) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    // Random content in the top-left 6×6 of a 12×12 grid, shifted by (3, 4).
    Mask a{{12, 12}, std::vector<std::uint8_t>(144, 0)}, b = a, as = a, bs = a;
    const Mask ra = random_mask(6, 6, 0.5, rng), rb = random_mask(6, 6, 0.5, rng);
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 6; ++x) {
        a.on[(y + 1) * 12 + x + 1] = ra.on[y * 6 + x];
        b.on[(y + 1) * 12 + x + 1] = rb.on[y * 6 + x];
        as.on[(y + 4) * 12 + x + 5] = ra.on[y * 6 + x];
        bs.on[(y + 4) * 12 + x + 5] = rb.on[y * 6 + x];
      }
    EXPECT_NEAR(*msd(a, b), *msd(as, bs), 1e-12);
  }
}

TEST(Evaluate, PerfectPrediction) {
  LabelMap t({8, 8}, 0);
  for (std::size_t i = 0; i < 64; ++i) t[i] = int(i % 3);
  const auto r = evaluate(t, t, 4);
  ASSERT_EQ(r.per_class.size(), 3u);
  for (const auto& c : r.per_class) {
    if (c.class_id == 3) continue;
    EXPECT_EQ(c.dsc, 1.0);
    EXPECT_EQ(c.vs, 1.0);
    EXPECT_EQ(*c.msd, 0.0);
  }
  EXPECT_EQ(*r.mean_dsc, 1.0);
  EXPECT_EQ(*r.mean_msd, 0.0);
  EXPECT_EQ(r.flagged, std::vector<int>{3});
  EXPECT_TRUE(r.per_class[2].truth_empty && r.per_class[2].pred_empty);
}

TEST(Evaluate, HandDrawnBinaryCase) {
  // truth: rows 2..5, cols 2..5; prediction: rows 3..6, cols 2..4
  LabelMap truth({8, 8}, 0), pred({8, 8}, 0);
  for (std::size_t y = 2; y < 6; ++y)
    for (std::size_t x = 2; x < 6; ++x) truth[y * 8 + x] = 1;
  for (std::size_t y = 3; y < 7; ++y)
    for (std::size_t x = 2; x < 5; ++x) pred[y * 8 + x] = 1;
  const auto r = evaluate(pred, truth, 2);
  const Mask p = binarize(pred, 1), t = binarize(truth, 1);
  ASSERT_EQ(r.per_class.size(), 1u);
  EXPECT_NEAR(r.per_class[0].dsc, 2.0 * 9 / 28, 1e-15);
  EXPECT_NEAR(r.per_class[0].vs, 1.0 - 4.0 / 28, 1e-15);
  EXPECT_NEAR(*r.per_class[0].msd, msd_oracle(p, t), 1e-12);
  EXPECT_THROW(evaluate(pred, LabelMap({8, 7}), 2), DimensionError);
}

TEST(Evaluate, MissedClassCountsAsZeroWithoutDistance) {
  LabelMap truth({6, 6}, 0), pred({6, 6}, 0);
  truth[7] = 1;
  truth[20] = 2;
  pred[20] = 2;
  const auto r = evaluate(pred, truth, 3);
  EXPECT_EQ(r.per_class[0].dsc, 0.0);
  EXPECT_FALSE(r.per_class[0].msd.has_value());
  EXPECT_EQ(*r.mean_dsc, 0.5);
  EXPECT_EQ(*r.mean_msd, 0.0);
  EXPECT_TRUE(r.flagged.empty());
}

TEST(Evaluate, RelabelingPermutesRowsAndKeepsMeans) {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> cls(0, 4);
  LabelMap truth({10, 10}), pred({10, 10});
  for (std::size_t i = 0; i < 100; ++i) {
    truth[i] = cls(rng);
    pred[i] = cls(rng);
  }
  std::vector<int> perm{0, 3, 1, 4, 2};  // background stays 0
  LabelMap truth2 = truth, pred2 = pred;
  for (std::size_t i = 0; i < 100; ++i) {
    truth2[i] = perm[std::size_t(truth[i])];
    pred2[i] = perm[std::size_t(pred[i])];
  }
  const auto a = evaluate(pred, truth, 5), b = evaluate(pred2, truth2, 5);
  for (int k = 1; k < 5; ++k) {
    const auto& ra = a.per_class[std::size_t(k - 1)];
    const auto& rb = b.per_class[std::size_t(perm[std::size_t(k)] - 1)];
    EXPECT_EQ(ra.dsc, rb.dsc);
    EXPECT_EQ(ra.vs, rb.vs);
    EXPECT_EQ(*ra.msd, *rb.msd);
  }
  EXPECT_NEAR(*a.mean_dsc, *b.mean_dsc, 1e-15);
  EXPECT_NEAR(*a.mean_vs, *b.mean_vs, 1e-15);
  EXPECT_NEAR(*a.mean_msd, *b.mean_msd, 1e-15);
}

TEST(Evaluate, BoundsHold) {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> cls(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    LabelMap truth({9, 7}), pred({9, 7});
    for (std::size_t i = 0; i < truth.numel(); ++i) {
      truth[i] = cls(rng);
      pred[i] = cls(rng);
    }
    for (const auto& c : evaluate(pred, truth, 4).per_class) {
      EXPECT_TRUE(c.dsc >= 0 && c.dsc <= 1);
      EXPECT_TRUE(c.vs >= 0 && c.vs <= 1);
      if (c.msd) {
        EXPECT_GE(*c.msd, 0);
      }
    }
  }
}
