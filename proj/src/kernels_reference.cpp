// Serial reference kernels. Straight loops, no tiling, no threads; these are
// the oracles the parallel kernels are tested against.
#include <algorithm>
#include <cmath>
#include <vector>

#include "msga/kernels.hpp"

namespace msga::kernels::reference {

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta == Trans::kNo ? a[i * k + p] : a[p * m + i];
        const double bv = tb == Trans::kNo ? b[p * n + j] : b[j * k + p];
        s += av * bv;
      }
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void conv2d_forward(const ConvGeometry& g, const double* x, const double* kernel, const double* bias,
                    double* y) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double s = bias ? bias[co] : 0.0;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const long iy = long(oy * g.stride + ky) - long(g.pad);
              const long ix = long(ox * g.stride + kx) - long(g.pad);
              if (iy < 0 || ix < 0 || iy >= long(g.in_h) || ix >= long(g.in_w)) continue;
              s += kernel[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx] *
                   x[(ci * g.in_h + iy) * g.in_w + ix];
            }
          }
        }
        y[(co * oh + oy) * ow + ox] = s;
      }
    }
  }
}

void conv2d_backward(const ConvGeometry& g, const double* x, const double* kernel, const double* dy,
                     double* dx, double* dkernel, double* dbias) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double d = dy[(co * oh + oy) * ow + ox];
        if (dbias) dbias[co] += d;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const long iy = long(oy * g.stride + ky) - long(g.pad);
              const long ix = long(ox * g.stride + kx) - long(g.pad);
              if (iy < 0 || ix < 0 || iy >= long(g.in_h) || ix >= long(g.in_w)) continue;
              const std::size_t ki = ((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx;
              const std::size_t xi = (ci * g.in_h + iy) * g.in_w + ix;
              if (dkernel) dkernel[ki] += d * x[xi];
              if (dx) dx[xi] += d * kernel[ki];
            }
          }
        }
      }
    }
  }
}

namespace {

// Source coordinate of output index `o` under corner alignment.
double source_coord(std::size_t o, std::size_t in, std::size_t out) {
  if (out == 1) return 0.0;
  return double(o) * double(in - 1) / double(out - 1);
}

}  // namespace

void upsample_forward(std::size_t channels, std::size_t in_h, std::size_t in_w, std::size_t out_h,
                      std::size_t out_w, const double* x, double* y) {
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const double sy = source_coord(oy, in_h, out_h);
      const std::size_t y0 = std::min(std::size_t(std::floor(sy)), in_h - 1);
      const std::size_t y1 = std::min(y0 + 1, in_h - 1);
      const double fy = sy - double(y0);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double sx = source_coord(ox, in_w, out_w);
        const std::size_t x0 = std::min(std::size_t(std::floor(sx)), in_w - 1);
        const std::size_t x1 = std::min(x0 + 1, in_w - 1);
        const double fx = sx - double(x0);
        const double* p = x + c * in_h * in_w;
        y[(c * out_h + oy) * out_w + ox] = (1 - fy) * ((1 - fx) * p[y0 * in_w + x0] + fx * p[y0 * in_w + x1]) +
                                           fy * ((1 - fx) * p[y1 * in_w + x0] + fx * p[y1 * in_w + x1]);
      }
    }
  }
}

void upsample_backward(std::size_t channels, std::size_t in_h, std::size_t in_w, std::size_t out_h,
                       std::size_t out_w, const double* dy, double* dx) {
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const double sy = source_coord(oy, in_h, out_h);
      const std::size_t y0 = std::min(std::size_t(std::floor(sy)), in_h - 1);
      const std::size_t y1 = std::min(y0 + 1, in_h - 1);
      const double fy = sy - double(y0);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double sx = source_coord(ox, in_w, out_w);
        const std::size_t x0 = std::min(std::size_t(std::floor(sx)), in_w - 1);
        const std::size_t x1 = std::min(x0 + 1, in_w - 1);
        const double fx = sx - double(x0);
        const double d = dy[(c * out_h + oy) * out_w + ox];
        double* p = dx + c * in_h * in_w;
        p[y0 * in_w + x0] += d * (1 - fy) * (1 - fx);
        p[y0 * in_w + x1] += d * (1 - fy) * fx;
        p[y1 * in_w + x0] += d * fy * (1 - fx);
        p[y1 * in_w + x1] += d * fy * fx;
      }
    }
  }
}

void softmax_rows_forward(std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* yr = y + r * cols;
    double mx = xr[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      z += yr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= z;
  }
}

void softmax_rows_backward(std::size_t rows, std::size_t cols, const double* y, const double* dy,
                           double* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < cols; ++c) dot += dy[r * cols + c] * y[r * cols + c];
    for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += y[r * cols + c] * (dy[r * cols + c] - dot);
  }
}

}  // namespace msga::kernels::reference
