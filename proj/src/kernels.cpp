#include "steinrul/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace steinrul::kernels {
namespace {

// Work below this many multiply-adds stays on the calling thread.
constexpr std::size_t kParallelThreshold = 1 << 15;

// Row-level bodies shared by the serial and parallel drivers. The drivers
// differ only in how rows are distributed, never in accumulation order.

inline void matmul_row(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                       std::size_t n) {
  double* crow = c + i * n;
  std::fill(crow, crow + n, 0.0);
  const double* arow = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = arow[p];
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void matmul_grad_a_row(const double* dc, const double* b, double* da, std::size_t i,
                              std::size_t k, std::size_t n) {
  const double* dcrow = dc + i * n;
  double* darow = da + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
    darow[p] += acc;
  }
}

inline void matmul_grad_b_row(const double* a, const double* dc, double* db, std::size_t p,
                              std::size_t m, std::size_t k, std::size_t n) {
  double* dbrow = db + p * n;
  for (std::size_t i = 0; i < m; ++i) {
    const double av = a[i * k + p];
    const double* dcrow = dc + i * n;
    for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
  }
}

// One (sample, out-channel) plane of the forward correlation.
inline void conv2d_plane(const double* x, const double* w, const double* bias, double* y,
                         std::size_t b, std::size_t co, const ConvGeometry& g) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  double* yp = y + (b * g.out_channels + co) * oh * ow;
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = bias[co];
      for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        const double* xp = x + (b * g.in_channels + ci) * g.height * g.width;
        const double* wp = w + (co * g.in_channels + ci) * g.kernel_h * g.kernel_w;
        for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
          const double* xrow = xp + (r + kh) * g.width + c;
          const double* wrow = wp + kh * g.kernel_w;
          for (std::size_t kw = 0; kw < g.kernel_w; ++kw) acc += xrow[kw] * wrow[kw];
        }
      }
      yp[r * ow + c] = acc;
    }
  }
}

// Input gradient of one sample: scatter of dy through the kernel.
inline void conv2d_dx_sample(const double* w, const double* dy, double* dx, std::size_t b,
                             const ConvGeometry& g) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    const double* dyp = dy + (b * g.out_channels + co) * oh * ow;
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      double* dxp = dx + (b * g.in_channels + ci) * g.height * g.width;
      const double* wp = w + (co * g.in_channels + ci) * g.kernel_h * g.kernel_w;
      for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
          const double gv = dyp[r * ow + c];
          for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
            double* dxrow = dxp + (r + kh) * g.width + c;
            const double* wrow = wp + kh * g.kernel_w;
            for (std::size_t kw = 0; kw < g.kernel_w; ++kw) dxrow[kw] += gv * wrow[kw];
          }
        }
      }
    }
  }
}

// Weight and bias gradient of one output channel, summed over the batch.
inline void conv2d_dw_channel(const double* x, const double* dy, double* dw, double* dbias,
                              std::size_t co, const ConvGeometry& g) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t b = 0; b < g.batch; ++b) {
    const double* dyp = dy + (b * g.out_channels + co) * oh * ow;
    if (dbias) {
      double acc = 0.0;
      for (std::size_t i = 0; i < oh * ow; ++i) acc += dyp[i];
      dbias[co] += acc;
    }
    if (!dw) continue;
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      const double* xp = x + (b * g.in_channels + ci) * g.height * g.width;
      double* dwp = dw + (co * g.in_channels + ci) * g.kernel_h * g.kernel_w;
      for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
        for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
          double acc = 0.0;
          for (std::size_t r = 0; r < oh; ++r) {
            const double* xrow = xp + (r + kh) * g.width + kw;
            const double* dyrow = dyp + r * ow;
            for (std::size_t c = 0; c < ow; ++c) acc += xrow[c] * dyrow[c];
          }
          dwp[kh * g.kernel_w + kw] += acc;
        }
      }
    }
  }
}

inline void sq_dist_row(const double* p, double* out, std::size_t i, std::size_t m,
                        std::size_t d) {
  const double* pi = p + i * d;
  for (std::size_t j = 0; j < m; ++j) {
    const double* pj = p + j * d;
    double acc = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double diff = pi[t] - pj[t];
      acc += diff * diff;
    }
    out[i * m + j] = acc;
  }
}

inline std::size_t conv_work(const ConvGeometry& g) {
  return g.batch * g.out_channels * g.out_h() * g.out_w() * g.in_channels * g.kernel_h *
         g.kernel_w;
}

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const bool par = m * k * n >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < m; ++i) matmul_row(a.data(), b.data(), c.data(), i, k, n);
}

void matmul_grad_a(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                   std::size_t m, std::size_t k, std::size_t n) {
  const bool par = m * k * n >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < m; ++i) matmul_grad_a_row(dc.data(), b.data(), da.data(), i, k, n);
}

void matmul_grad_b(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                   std::size_t m, std::size_t k, std::size_t n) {
  const bool par = m * k * n >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t p = 0; p < k; ++p) matmul_grad_b_row(a.data(), dc.data(), db.data(), p, m, k, n);
}

void conv2d(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
            std::span<double> y, const ConvGeometry& g) {
  const std::size_t planes = g.batch * g.out_channels;
  const bool par = conv_work(g) >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t pl = 0; pl < planes; ++pl) {
    conv2d_plane(x.data(), w.data(), bias.data(), y.data(), pl / g.out_channels,
                 pl % g.out_channels, g);
  }
}

void conv2d_backward(std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> dbias, const ConvGeometry& g) {
  const bool par = conv_work(g) >= kParallelThreshold;
  if (!dx.empty()) {
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t b = 0; b < g.batch; ++b) conv2d_dx_sample(w.data(), dy.data(), dx.data(), b, g);
  }
  if (!dw.empty() || !dbias.empty()) {
    double* dwp = dw.empty() ? nullptr : dw.data();
    double* dbp = dbias.empty() ? nullptr : dbias.data();
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      conv2d_dw_channel(x.data(), dy.data(), dwp, dbp, co, g);
    }
  }
}

void pairwise_sq_dist(std::span<const double> p, std::span<double> out, std::size_t m,
                      std::size_t d) {
  const bool par = m * m * d >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < m; ++i) sq_dist_row(p.data(), out.data(), i, m, d);
}

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) matmul_row(a.data(), b.data(), c.data(), i, k, n);
}

void matmul_grad_a(std::span<const double> dc, std::span<const double> b, std::span<double> da,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) matmul_grad_a_row(dc.data(), b.data(), da.data(), i, k, n);
}

void matmul_grad_b(std::span<const double> a, std::span<const double> dc, std::span<double> db,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) matmul_grad_b_row(a.data(), dc.data(), db.data(), p, m, k, n);
}

void conv2d(std::span<const double> x, std::span<const double> w, std::span<const double> bias,
            std::span<double> y, const ConvGeometry& g) {
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      conv2d_plane(x.data(), w.data(), bias.data(), y.data(), b, co, g);
}

void conv2d_backward(std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                     std::span<double> dbias, const ConvGeometry& g) {
  if (!dx.empty()) {
    for (std::size_t b = 0; b < g.batch; ++b) conv2d_dx_sample(w.data(), dy.data(), dx.data(), b, g);
  }
  double* dwp = dw.empty() ? nullptr : dw.data();
  double* dbp = dbias.empty() ? nullptr : dbias.data();
  if (dwp || dbp) {
    for (std::size_t co = 0; co < g.out_channels; ++co)
      conv2d_dw_channel(x.data(), dy.data(), dwp, dbp, co, g);
  }
}

void pairwise_sq_dist(std::span<const double> p, std::span<double> out, std::size_t m,
                      std::size_t d) {
  for (std::size_t i = 0; i < m; ++i) sq_dist_row(p.data(), out.data(), i, m, d);
}

}  // namespace serial

void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace steinrul::kernels
