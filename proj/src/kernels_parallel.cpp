#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "msga/kernels.hpp"

namespace msga::kernels::parallel {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

// c[i0..i0+R) rows, columns [j0, j1): c += a_rows · b, with a addressed by
// (row, p) through a_at. R rows share each loaded row of b.
template <int R, class AAt>
inline void gemm_rows(AAt a_at, std::size_t i0, std::size_t j0, std::size_t j1, std::size_t n,
                      std::size_t k, const double* b, double* c) {
  double* crow[R];
  for (int r = 0; r < R; ++r) crow[r] = c + (i0 + r) * n;
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n;
    double av[R];
    for (int r = 0; r < R; ++r) av[r] = a_at(i0 + r, p);
    for (std::size_t j = j0; j < j1; ++j) {
      const double bv = brow[j];
      for (int r = 0; r < R; ++r) crow[r][j] += av[r] * bv;
    }
  }
}

template <class AAt>
void gemm_b_rowmajor(AAt a_at, std::size_t m, std::size_t n, std::size_t k, const double* b, double* c) {
  constexpr std::size_t kRowBlock = 4;
  constexpr std::size_t kColTile = 512;
  const std::size_t blocks = (m + kRowBlock - 1) / kRowBlock;
  const bool par = m * n * k >= kParallelWork && blocks > 1;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = blk * kRowBlock;
    const std::size_t rows = std::min(kRowBlock, m - i0);
    for (std::size_t j0 = 0; j0 < n; j0 += kColTile) {
      const std::size_t j1 = std::min(n, j0 + kColTile);
      if (rows == 4) {
        gemm_rows<4>(a_at, i0, j0, j1, n, k, b, c);
      } else {
        for (std::size_t r = 0; r < rows; ++r) gemm_rows<1>(a_at, i0 + r, j0, j1, n, k, b, c);
      }
    }
  }
}

void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t r1 = std::min(rows, r0 + kTile), c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
    }
  }
}

void im2col(const ConvGeometry& g, const double* x, double* col) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), kk = g.kernel_h * g.kernel_w;
  const std::size_t rows = g.in_channels * kk;
#pragma omp parallel for schedule(static) if (rows * oh * ow >= kParallelWork)
  for (std::size_t row = 0; row < rows; ++row) {
    const std::size_t ci = row / kk, ky = (row % kk) / g.kernel_w, kx = row % g.kernel_w;
    const double* plane = x + ci * g.in_h * g.in_w;
    double* out = col + row * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const long iy = long(oy * g.stride + ky) - long(g.pad);
      double* orow = out + oy * ow;
      if (iy < 0 || iy >= long(g.in_h)) {
        std::fill(orow, orow + ow, 0.0);
        continue;
      }
      const double* irow = plane + iy * g.in_w;
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const long ix = long(ox * g.stride + kx) - long(g.pad);
        orow[ox] = (ix < 0 || ix >= long(g.in_w)) ? 0.0 : irow[ix];
      }
    }
  }
}

// dx += col2im(dcol); each input channel is owned by one thread.
void col2im_add(const ConvGeometry& g, const double* col, double* dx) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), kk = g.kernel_h * g.kernel_w;
#pragma omp parallel for schedule(static) if (g.in_channels * kk * oh * ow >= kParallelWork)
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    double* plane = dx + ci * g.in_h * g.in_w;
    for (std::size_t r = 0; r < kk; ++r) {
      const std::size_t ky = r / g.kernel_w, kx = r % g.kernel_w;
      const double* in = col + (ci * kk + r) * oh * ow;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        const long iy = long(oy * g.stride + ky) - long(g.pad);
        if (iy < 0 || iy >= long(g.in_h)) continue;
        double* drow = plane + iy * g.in_w;
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const long ix = long(ox * g.stride + kx) - long(g.pad);
          if (ix >= 0 && ix < long(g.in_w)) drow[ix] += in[oy * ow + ox];
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1 && g.pad == 0;
}

struct Tap {
  std::size_t i0, i1;
  double f;
};

std::vector<Tap> interpolation_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  for (std::size_t o = 0; o < out; ++o) {
    const double s = out == 1 ? 0.0 : double(o) * double(in - 1) / double(out - 1);
    const std::size_t i0 = std::min(std::size_t(std::floor(s)), in - 1);
    taps[o] = {i0, std::min(i0 + 1, in - 1), s - double(i0)};
  }
  return taps;
}

}  // namespace

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  std::vector<double> bt;
  if (tb == Trans::kYes) {
    bt.resize(k * n);
    transpose(n, k, b, bt.data());
    b = bt.data();
  }
  if (ta == Trans::kNo) {
    gemm_b_rowmajor([a, k](std::size_t i, std::size_t p) { return a[i * k + p]; }, m, n, k, b, c);
  } else {
    gemm_b_rowmajor([a, m](std::size_t i, std::size_t p) { return a[p * m + i]; }, m, n, k, b, c);
  }
}

void conv2d_forward(const ConvGeometry& g, const double* x, const double* kernel, const double* bias,
                    double* y) {
  const std::size_t p = g.out_h() * g.out_w();
  const std::size_t ckk = g.in_channels * g.kernel_h * g.kernel_w;
  for (std::size_t co = 0; co < g.out_channels; ++co)
    std::fill(y + co * p, y + (co + 1) * p, bias ? bias[co] : 0.0);
  if (is_pointwise(g)) {
    gemm(Trans::kNo, Trans::kNo, g.out_channels, p, ckk, kernel, x, y, true);
    return;
  }
  std::vector<double> col(ckk * p);
  im2col(g, x, col.data());
  gemm(Trans::kNo, Trans::kNo, g.out_channels, p, ckk, kernel, col.data(), y, true);
}

void conv2d_backward(const ConvGeometry& g, const double* x, const double* kernel, const double* dy,
                     double* dx, double* dkernel, double* dbias) {
  const std::size_t p = g.out_h() * g.out_w();
  const std::size_t ckk = g.in_channels * g.kernel_h * g.kernel_w;
  if (dbias) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      double s = 0.0;
      for (std::size_t i = 0; i < p; ++i) s += dy[co * p + i];
      dbias[co] += s;
    }
  }
  const bool pointwise = is_pointwise(g);
  std::vector<double> col;
  if (dkernel) {
    const double* cols = x;
    if (!pointwise) {
      col.resize(ckk * p);
      im2col(g, x, col.data());
      cols = col.data();
    }
    gemm(Trans::kNo, Trans::kYes, g.out_channels, ckk, p, dy, cols, dkernel, true);
  }
  if (dx) {
    if (pointwise) {
      gemm(Trans::kYes, Trans::kNo, ckk, p, g.out_channels, kernel, dy, dx, true);
    } else {
      col.resize(ckk * p);
      gemm(Trans::kYes, Trans::kNo, ckk, p, g.out_channels, kernel, dy, col.data(), false);
      col2im_add(g, col.data(), dx);
    }
  }
}

void upsample_forward(std::size_t channels, std::size_t in_h, std::size_t in_w, std::size_t out_h,
                      std::size_t out_w, const double* x, double* y) {
  const auto ty = interpolation_taps(in_h, out_h);
  const auto tx = interpolation_taps(in_w, out_w);
#pragma omp parallel for schedule(static) if (channels * out_h * out_w >= kParallelWork)
  for (std::size_t c = 0; c < channels; ++c) {
    const double* p = x + c * in_h * in_w;
    double* q = y + c * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& v = ty[oy];
      const double* r0 = p + v.i0 * in_w;
      const double* r1 = p + v.i1 * in_w;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& h = tx[ox];
        const double top = r0[h.i0] + h.f * (r0[h.i1] - r0[h.i0]);
        const double bot = r1[h.i0] + h.f * (r1[h.i1] - r1[h.i0]);
        q[oy * out_w + ox] = top + v.f * (bot - top);
      }
    }
  }
}

void upsample_backward(std::size_t channels, std::size_t in_h, std::size_t in_w, std::size_t out_h,
                       std::size_t out_w, const double* dy, double* dx) {
  const auto ty = interpolation_taps(in_h, out_h);
  const auto tx = interpolation_taps(in_w, out_w);
#pragma omp parallel for schedule(static) if (channels * out_h * out_w >= kParallelWork)
  for (std::size_t c = 0; c < channels; ++c) {
    const double* q = dy + c * out_h * out_w;
    double* p = dx + c * in_h * in_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& v = ty[oy];
      double* r0 = p + v.i0 * in_w;
      double* r1 = p + v.i1 * in_w;
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& h = tx[ox];
        const double d = q[oy * out_w + ox];
        const double top = d * (1 - v.f), bot = d * v.f;
        r0[h.i0] += top * (1 - h.f);
        r0[h.i1] += top * h.f;
        r1[h.i0] += bot * (1 - h.f);
        r1[h.i1] += bot * h.f;
      }
    }
  }
}

void softmax_rows_forward(std::size_t rows, std::size_t cols, const double* x, double* y) {
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* yr = y + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      z += yr[c];
    }
    const double inv = 1.0 / z;
    for (std::size_t c = 0; c < cols; ++c) yr[c] *= inv;
  }
}

void softmax_rows_backward(std::size_t rows, std::size_t cols, const double* y, const double* dy,
                           double* dx) {
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelWork)
  for (std::size_t r = 0; r < rows; ++r) {
    const double* yr = y + r * cols;
    const double* dr = dy + r * cols;
    double dot = 0.0;
    for (std::size_t c = 0; c < cols; ++c) dot += dr[c] * yr[c];
    double* xr = dx + r * cols;
    for (std::size_t c = 0; c < cols; ++c) xr[c] += yr[c] * (dr[c] - dot);
  }
}

}  // namespace msga::kernels::parallel
