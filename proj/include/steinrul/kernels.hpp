#pragma once

// Dense numeric kernels behind the autodiff operators.
//
// Each kernel has an OpenMP implementation (namespace kernels) and a plain
// serial reference (namespace kernels::serial). Both accumulate every output
// element in the same order, so results are bitwise identical regardless of
// thread count. The serial versions exist for tests and benchmarks.

#include <cstddef>
#include <span>

namespace steinrul::kernels {

struct ConvGeometry {
  std::size_t batch, in_channels, height, width;
  std::size_t out_channels, kernel_h, kernel_w;

  std::size_t out_h() const { return height - kernel_h + 1; }
  std::size_t out_w() const { return width - kernel_w + 1; }
};

// c[m,n] = a[m,k] * b[k,n]; c is overwritten.
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
// da[m,k] += dc[m,n] * b[k,n]^T
void matmul_grad_a(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                   std::size_t m, std::size_t k, std::size_t n);
// db[k,n] += a[m,k]^T * dc[m,n]
void matmul_grad_b(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                   std::size_t m, std::size_t k, std::size_t n);

// Valid cross-correlation, stride 1. x: [B,Ci,H,W], w: [Co,Ci,KH,KW], bias: [Co].
void conv2d(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
            std::span<double> y, const ConvGeometry& g);
// Accumulates into dx, dw and dbias; any of them may be empty to skip.
void conv2d_backward(std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> dbias, const ConvGeometry& g);

// out[i,j] = ||p_i - p_j||^2 for the rows of p: [m,d].
void pairwise_sq_dist(std::span<const double> p, std::span<double> out, std::size_t m,
                      std::size_t d);

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_grad_a(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_grad_b(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                   std::size_t m, std::size_t k, std::size_t n);
void conv2d(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
            std::span<double> y, const ConvGeometry& g);
void conv2d_backward(std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> dbias, const ConvGeometry& g);
void pairwise_sq_dist(std::span<const double> p, std::span<double> out, std::size_t m,
                      std::size_t d);

}  // namespace serial

/// Thread count used by the parallel kernels (0 = OpenMP default).
void set_num_threads(int n);
int num_threads();

}  // namespace steinrul::kernels
