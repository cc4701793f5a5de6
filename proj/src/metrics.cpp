#include "msga/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msga/error.hpp"

namespace msga::metrics {

namespace {

void require_same_shape(const Mask& a, const Mask& b, const char* metric) {
  if (a.shape != b.shape) {
    throw DimensionError(std::string(metric) + ": mask shapes " + shape_str(a.shape) + " and " +
                         shape_str(b.shape) + " differ");
  }
}

void require_grid(const Shape& s) {
  if (s.size() != 2 && s.size() != 3) throw DimensionError("masks must be 2-D or 3-D, got " + shape_str(s));
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

// Surface indicator: on-pixels with at least one face neighbour that is off
// or outside the grid (4-connectivity in 2-D, 6 in 3-D).
std::vector<std::uint8_t> surface(const Mask& m) {
  const auto st = strides_of(m.shape);
  const std::size_t rank = m.shape.size(), n = m.on.size();
  std::vector<std::uint8_t> out(n, 0);
#pragma omp parallel for schedule(static) if (n >= (1u << 16))
  for (std::size_t i = 0; i < n; ++i) {
    if (!m.on[i]) continue;
    bool edge = false;
    for (std::size_t ax = 0; ax < rank && !edge; ++ax) {
      const std::size_t c = (i / st[ax]) % m.shape[ax];
      if (c == 0 || c + 1 == m.shape[ax]) edge = true;
      else if (!m.on[i - st[ax]] || !m.on[i + st[ax]]) edge = true;
    }
    out[i] = edge;
  }
  return out;
}

// 1-D squared distance transform of sampled function f (lower envelope of
// parabolas), written into d.
void edt_1d(const double* f, double* d, std::size_t n, std::vector<std::size_t>& v, std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  v.resize(n);
  z.resize(n + 1);
  std::size_t k = 0;
  std::size_t first = n;
  for (std::size_t q = 0; q < n; ++q)
    if (f[q] < kInf) {
      first = q;
      break;
    }
  if (first == n) {
    std::fill(d, d + n, kInf);
    return;
  }
  v[0] = first;
  z[0] = -kInf;
  z[1] = kInf;
  auto intersect = [&](std::size_t q, std::size_t p) {
    const double qd = double(q), pd = double(p);
    return ((f[q] + qd * qd) - (f[p] + pd * pd)) / (2.0 * (qd - pd));
  };
  for (std::size_t q = first + 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    double s = intersect(q, v[k]);
    while (s <= z[k]) s = intersect(q, v[--k]);  // z[0] = -inf stops the walk
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < double(q)) ++k;
    const double dq = double(q) - double(v[k]);
    d[q] = dq * dq + f[v[k]];
  }
}

// Exact squared Euclidean distance from every grid point to the nearest
// seed, separable over axes.
std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& seeds, const Shape& shape) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto st = strides_of(shape);
  std::vector<double> dist(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) dist[i] = seeds[i] ? 0.0 : kInf;
  for (std::size_t ax = 0; ax < shape.size(); ++ax) {
    const std::size_t len = shape[ax], stride = st[ax];
    const std::size_t lines = seeds.size() / len;
#pragma omp parallel if (seeds.size() >= (1u << 16))
    {
      std::vector<double> f(len), d(len), z;
      std::vector<std::size_t> v;
#pragma omp for schedule(static)
      for (std::size_t line = 0; line < lines; ++line) {
        // line enumerates all index combinations except axis `ax`
        const std::size_t outer = line / stride, inner = line % stride;
        const std::size_t base = outer * len * stride + inner;
        for (std::size_t q = 0; q < len; ++q) f[q] = dist[base + q * stride];
        edt_1d(f.data(), d.data(), len, v, z);
        for (std::size_t q = 0; q < len; ++q) dist[base + q * stride] = d[q];
      }
    }
  }
  return dist;
}

}  // namespace

std::size_t Mask::count() const {
  return std::size_t(std::count_if(on.begin(), on.end(), [](std::uint8_t v) { return v != 0; }));
}

Mask binarize(const LabelMap& labels, int class_id) {
  Mask m{labels.shape, std::vector<std::uint8_t>(labels.numel())};
  for (std::size_t i = 0; i < labels.numel(); ++i) m.on[i] = labels[i] == class_id;
  return m;
}

double dsc(const Mask& a, const Mask& b) {
  require_same_shape(a, b, "dsc");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.on.size(); ++i) {
    na += a.on[i] != 0;
    nb += b.on[i] != 0;
    both += a.on[i] && b.on[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(both) / double(na + nb);
}

double vs(const Mask& a, const Mask& b) {
  require_same_shape(a, b, "vs");
  const std::size_t na = a.count(), nb = b.count();
  if (na + nb == 0) return 1.0;
  const double diff = na > nb ? double(na - nb) : double(nb - na);
  return 1.0 - diff / double(na + nb);
}

std::vector<std::vector<std::size_t>> surface_points(const Mask& m) {
  require_grid(m.shape);
  const auto st = strides_of(m.shape);
  const auto s = surface(m);
  std::vector<std::vector<std::size_t>> pts;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s[i]) continue;
    std::vector<std::size_t> p(m.shape.size());
    for (std::size_t ax = 0; ax < p.size(); ++ax) p[ax] = (i / st[ax]) % m.shape[ax];
    pts.push_back(std::move(p));
  }
  return pts;
}

std::optional<double> msd(const Mask& a, const Mask& b) {
  require_same_shape(a, b, "msd");
  require_grid(a.shape);
  if (a.count() == 0 || b.count() == 0) return std::nullopt;
  const auto sa = surface(a), sb = surface(b);
  const auto da = squared_distance_transform(sa, a.shape);
  const auto db = squared_distance_transform(sb, b.shape);
  // Two partial sums keep msd(a, b) == msd(b, a) bit for bit.
  double to_b = 0.0, to_a = 0.0;
  std::size_t points = 0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (sa[i]) {
      to_b += std::sqrt(db[i]);
      ++points;
    }
  }
  for (std::size_t i = 0; i < sb.size(); ++i) {
    if (sb[i]) {
      to_a += std::sqrt(da[i]);
      ++points;
    }
  }
  const double total = to_b + to_a;
  return total / double(points);
}

MetricsReport evaluate(const LabelMap& pred, const LabelMap& truth, int num_classes) {
  if (pred.shape != truth.shape) {
    throw DimensionError("evaluate: prediction " + shape_str(pred.shape) + " and ground truth " +
                         shape_str(truth.shape) + " differ");
  }
  if (num_classes < 2) throw UsageError("evaluate needs at least two classes");
  MetricsReport r;
  double sum_dsc = 0, sum_vs = 0, sum_msd = 0;
  std::size_t n = 0, n_msd = 0;
  for (int k = 1; k < num_classes; ++k) {
    const Mask p = binarize(pred, k), t = binarize(truth, k);
    ClassMetrics c;
    c.class_id = k;
    c.dsc = dsc(p, t);
    c.vs = vs(p, t);
    c.msd = msd(p, t);
    c.truth_empty = t.count() == 0;
    c.pred_empty = p.count() == 0;
    if (c.truth_empty) {
      r.flagged.push_back(k);
    } else {
      sum_dsc += c.dsc;
      sum_vs += c.vs;
      ++n;
      if (c.msd) {
        sum_msd += *c.msd;
        ++n_msd;
      }
    }
    r.per_class.push_back(c);
  }
  if (n) {
    r.mean_dsc = sum_dsc / double(n);
    r.mean_vs = sum_vs / double(n);
  }
  if (n_msd) r.mean_msd = sum_msd / double(n_msd);
  return r;
}

}  // namespace msga::metrics
