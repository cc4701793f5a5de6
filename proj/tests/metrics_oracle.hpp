#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "msga/metrics.hpp"

namespace msga::testing {

// Plain counting and all-pairs reference implementations for 2-D masks.
struct MaskCounts {
  double a = 0, b = 0, both = 0;
};

inline MaskCounts count_masks(const metrics::Mask& a, const metrics::Mask& b) {
  MaskCounts c;
  for (std::size_t i = 0; i < a.on.size(); ++i) {
    c.a += a.on[i];
    c.b += b.on[i];
    c.both += a.on[i] && b.on[i];
  }
  return c;
}

inline double dsc_oracle(const metrics::Mask& a, const metrics::Mask& b) {
  const auto c = count_masks(a, b);
  return c.a + c.b == 0 ? 1.0 : 2.0 * c.both / (c.a + c.b);
}

inline double vs_oracle(const metrics::Mask& a, const metrics::Mask& b) {
  const auto c = count_masks(a, b);
  return c.a + c.b == 0 ? 1.0 : 1.0 - std::abs(c.a - c.b) / (c.a + c.b);
}

inline std::vector<std::pair<long, long>> boundary_oracle(const metrics::Mask& m) {
  const long h = long(m.shape[0]), w = long(m.shape[1]);
  auto on = [&](long y, long x) { return y >= 0 && y < h && x >= 0 && x < w && m.on[std::size_t(y * w + x)]; };
  std::vector<std::pair<long, long>> pts;
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      if (on(y, x) && (!on(y - 1, x) || !on(y + 1, x) || !on(y, x - 1) || !on(y, x + 1))) pts.emplace_back(y, x);
  return pts;
}

// Both masks must be non-empty.
inline double msd_oracle(const metrics::Mask& a, const metrics::Mask& b) {
  const auto pa = boundary_oracle(a), pb = boundary_oracle(b);
  auto nearest = [](std::pair<long, long> p, const std::vector<std::pair<long, long>>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : set) {
      const double dy = double(p.first - q.first), dx = double(p.second - q.second);
      best = std::min(best, std::sqrt(dy * dy + dx * dx));
    }
    return best;
  };
  double sum = 0;
  for (const auto& p : pa) sum += nearest(p, pb);
  for (const auto& p : pb) sum += nearest(p, pa);
  return sum / double(pa.size() + pb.size());
}

inline metrics::Mask random_mask(std::size_t h, std::size_t w, double density, std::mt19937_64& rng) {
  metrics::Mask m{{h, w}, std::vector<std::uint8_t>(h * w, 0)};
  std::bernoulli_distribution on(density);
  for (auto& v : m.on) v = on(rng);
  if (m.count() == 0) m.on[std::uniform_int_distribution<std::size_t>(0, h * w - 1)(rng)] = 1;
  return m;
}

}  // namespace msga::testing
