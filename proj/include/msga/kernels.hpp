#pragma once

#include <cstddef>
#include <span>

// Numerical kernels behind the differentiable ops.
//
// Two implementations share one interface: `reference` is plain serial loops
// written for readability and used as the test oracle; `parallel` is the
// production path (im2col + blocked GEMM, precomputed interpolation tables,
// OpenMP over independent outputs). Every parallel kernel assigns each output
// element to exactly one thread and sums in a fixed order, so results do not
// depend on the thread count.
namespace msga::kernels {

enum class Trans { kNo, kYes };

struct ConvGeometry {
  std::size_t in_channels, in_h, in_w;
  std::size_t out_channels, kernel_h, kernel_w;
  std::size_t stride, pad;

  std::size_t out_h() const { return (in_h + 2 * pad - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * pad - kernel_w) / stride + 1; }
};

#define MSGA_KERNEL_DECLS                                                                          \
  /* c[m×n] (+)= op(a) · op(b); op(a) is m×k, op(b) is k×n */                                      \
  void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,       \
            const double* b, double* c, bool accumulate);                                          \
                                                                                                   \
  void conv2d_forward(const ConvGeometry& g, const double* x, const double* kernel,                \
                      const double* bias, double* y);                                              \
  /* Accumulates into dx, dkernel, dbias; any of them may be null. */                              \
  void conv2d_backward(const ConvGeometry& g, const double* x, const double* kernel,               \
                       const double* dy, double* dx, double* dkernel, double* dbias);              \
                                                                                                   \
  /* Corner-aligned bilinear resize of `channels` planes. */                                       \
  void upsample_forward(std::size_t channels, std::size_t in_h, std::size_t in_w,                 \
                        std::size_t out_h, std::size_t out_w, const double* x, double* y);         \
  void upsample_backward(std::size_t channels, std::size_t in_h, std::size_t in_w,                \
                         std::size_t out_h, std::size_t out_w, const double* dy, double* dx);      \
                                                                                                   \
  void softmax_rows_forward(std::size_t rows, std::size_t cols, const double* x, double* y);       \
  /* dx += y ⊙ (dy − rowsum(dy ⊙ y)) */                                                            \
  void softmax_rows_backward(std::size_t rows, std::size_t cols, const double* y, const double* dy, \
                             double* dx);

namespace reference {
MSGA_KERNEL_DECLS
}  // namespace reference

namespace parallel {
MSGA_KERNEL_DECLS
}  // namespace parallel

#undef MSGA_KERNEL_DECLS

}  // namespace msga::kernels
