#include <omp.h>

#include <Eigen/Core>
#include <cmath>
#include <cstdlib>
#include <string>

#include "lckd/errors.hpp"
#include "lckd/kernels.hpp"

namespace lckd {

void configure_threads(int threads, bool from_env) {
  if (from_env) {
    if (const char* env = std::getenv("LCKD_THREADS")) {
      const int capped = std::atoi(env);
      if (capped > 0) threads = threads > 0 ? std::min(threads, capped) : capped;
    }
  }
  if (threads > 0) omp_set_num_threads(threads);
}

namespace parallel {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::ptrdiff_t kParallelMin = 1 << 14;

bool is_pointwise(const ConvShape& sh) { return sh.kernel == 1 && sh.stride == 1 && sh.pad == 0; }

// Rows are (ci, kz, ky, kx); columns are output voxels.
template <class T>
void im2col(const ConvShape& sh, const Tensor<T>& in, Extent oe, std::vector<T>& col) {
  const Extent ie = in.extent;
  const int k = sh.kernel;
  const int sz = sh.volumetric ? sh.stride : 1, pz = sh.volumetric ? sh.pad : 0;
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(sh.in_channels) * sh.taps();
  const std::size_t cols = oe.voxels();
  col.assign(rows * cols, T(0));
#pragma omp parallel for schedule(static) if (rows * static_cast<std::ptrdiff_t>(cols) > kParallelMin)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const int ci = static_cast<int>(r / sh.taps());
    const int tap = static_cast<int>(r % sh.taps());
    const int kz = tap / (k * k), ky = (tap / k) % k, kx = tap % k;
    T* dst = col.data() + r * cols;
    const T* src = in.data.data() + static_cast<std::size_t>(ci) * ie.voxels();
    for (int oz = 0; oz < oe.depth; ++oz) {
      const int iz = oz * sz - pz + kz;
      for (int oy = 0; oy < oe.height; ++oy) {
        const int iy = oy * sh.stride - sh.pad + ky;
        T* row = dst + (static_cast<std::size_t>(oz) * oe.height + oy) * oe.width;
        if (iz < 0 || iz >= ie.depth || iy < 0 || iy >= ie.height) continue;
        const T* line = src + (static_cast<std::size_t>(iz) * ie.height + iy) * ie.width;
        for (int ox = 0; ox < oe.width; ++ox) {
          const int ix = ox * sh.stride - sh.pad + kx;
          if (ix >= 0 && ix < ie.width) row[ox] = line[ix];
        }
      }
    }
  }
}

template <class T>
void col2im(const ConvShape& sh, const std::vector<T>& col, Extent oe, Tensor<T>& gin) {
  const Extent ie = gin.extent;
  const int k = sh.kernel;
  const int sz = sh.volumetric ? sh.stride : 1, pz = sh.volumetric ? sh.pad : 0;
  const std::size_t cols = oe.voxels();
#pragma omp parallel for schedule(static) if (static_cast<std::ptrdiff_t>(col.size()) > kParallelMin)
  for (int ci = 0; ci < sh.in_channels; ++ci) {
    T* dst = gin.data.data() + static_cast<std::size_t>(ci) * ie.voxels();
    for (int tap = 0; tap < sh.taps(); ++tap) {
      const int kz = tap / (k * k), ky = (tap / k) % k, kx = tap % k;
      const T* src = col.data() + (static_cast<std::size_t>(ci) * sh.taps() + tap) * cols;
      for (int oz = 0; oz < oe.depth; ++oz) {
        const int iz = oz * sz - pz + kz;
        if (iz < 0 || iz >= ie.depth) continue;
        for (int oy = 0; oy < oe.height; ++oy) {
          const int iy = oy * sh.stride - sh.pad + ky;
          if (iy < 0 || iy >= ie.height) continue;
          const T* row = src + (static_cast<std::size_t>(oz) * oe.height + oy) * oe.width;
          T* line = dst + (static_cast<std::size_t>(iz) * ie.height + iy) * ie.width;
          for (int ox = 0; ox < oe.width; ++ox) {
            const int ix = ox * sh.stride - sh.pad + kx;
            if (ix >= 0 && ix < ie.width) line[ix] += row[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
void conv_forward(const ConvShape& sh, const Tensor<T>& in, std::span<const T> w,
                  std::span<const T> b, Tensor<T>& out) {
  require(in.channels == sh.in_channels, "conv input channel mismatch");
  const Extent oe = sh.output(in.extent);
  out = Tensor<T>(sh.out_channels, oe);
  const auto cols = static_cast<Eigen::Index>(oe.voxels());
  const auto rows = static_cast<Eigen::Index>(sh.in_channels) * sh.taps();
  Eigen::Map<const RowMat<T>> W(w.data(), sh.out_channels, rows);
  Eigen::Map<RowMat<T>> Y(out.data.data(), sh.out_channels, cols);
  if (is_pointwise(sh)) {
    Y.noalias() = W * Eigen::Map<const RowMat<T>>(in.data.data(), rows, cols);
  } else {
    std::vector<T> col;
    im2col(sh, in, oe, col);
    Y.noalias() = W * Eigen::Map<const RowMat<T>>(col.data(), rows, cols);
  }
  for (int co = 0; co < sh.out_channels; ++co) Y.row(co).array() += b[co];
}

template <class T>
void conv_backward(const ConvShape& sh, const Tensor<T>& in, std::span<const T> w,
                   const Tensor<T>& gout, Tensor<T>* gin, std::span<T> gw, std::span<T> gb) {
  const Extent oe = gout.extent;
  const auto cols = static_cast<Eigen::Index>(oe.voxels());
  const auto rows = static_cast<Eigen::Index>(sh.in_channels) * sh.taps();
  Eigen::Map<const RowMat<T>> W(w.data(), sh.out_channels, rows);
  Eigen::Map<const RowMat<T>> G(gout.data.data(), sh.out_channels, cols);
  Eigen::Map<RowMat<T>> GW(gw.data(), sh.out_channels, rows);
  // fixed summation order; Eigen's redux peels by address alignment
  for (int co = 0; co < sh.out_channels; ++co) {
    const T* g = gout.data.data() + static_cast<std::size_t>(co) * static_cast<std::size_t>(cols);
    T acc = 0;
    for (Eigen::Index i = 0; i < cols; ++i) acc += g[i];
    gb[co] += acc;
  }

  if (is_pointwise(sh)) {
    Eigen::Map<const RowMat<T>> X(in.data.data(), rows, cols);
    GW.noalias() += G * X.transpose();
    if (gin) {
      *gin = Tensor<T>(in.channels, in.extent);
      Eigen::Map<RowMat<T>>(gin->data.data(), rows, cols).noalias() = W.transpose() * G;
    }
    return;
  }
  std::vector<T> col;
  im2col(sh, in, oe, col);
  GW.noalias() += G * Eigen::Map<const RowMat<T>>(col.data(), rows, cols).transpose();
  if (gin) {
    Eigen::Map<RowMat<T>> C(col.data(), rows, cols);
    C.noalias() = W.transpose() * G;
    *gin = Tensor<T>(in.channels, in.extent);
    col2im(sh, col, oe, *gin);
  }
}

template <class T>
void instance_norm_forward(const Tensor<T>& in, std::span<const T> gamma, std::span<const T> beta,
                           Tensor<T>& out, Tensor<T>& normalized, std::vector<T>& inv_std) {
  out = Tensor<T>(in.channels, in.extent);
  normalized = Tensor<T>(in.channels, in.extent);
  inv_std.assign(in.channels, T(0));
  const std::size_t n = in.plane();
#pragma omp parallel for schedule(static) if (static_cast<std::ptrdiff_t>(in.size()) > kParallelMin)
  for (int c = 0; c < in.channels; ++c) {
    const T* x = in.data.data() + c * n;
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i];
    mean /= n;
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= n;
    const T is = static_cast<T>(1.0 / std::sqrt(var + kNormEps));
    inv_std[c] = is;
    T* xn = normalized.data.data() + c * n;
    T* y = out.data.data() + c * n;
    const T m = static_cast<T>(mean), g = gamma[c], bt = beta[c];
    for (std::size_t i = 0; i < n; ++i) {
      xn[i] = (x[i] - m) * is;
      y[i] = g * xn[i] + bt;
    }
  }
}

template <class T>
void instance_norm_backward(const Tensor<T>& gout, const Tensor<T>& normalized,
                            std::span<const T> inv_std, std::span<const T> gamma, Tensor<T>& gin,
                            std::span<T> ggamma, std::span<T> gbeta) {
  gin = Tensor<T>(gout.channels, gout.extent);
  const std::size_t n = gout.plane();
#pragma omp parallel for schedule(static) if (static_cast<std::ptrdiff_t>(gout.size()) > kParallelMin)
  for (int c = 0; c < gout.channels; ++c) {
    const T* g = gout.data.data() + c * n;
    const T* xn = normalized.data.data() + c * n;
    double sum_g = 0, sum_gx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_g += g[i];
      sum_gx += g[i] * xn[i];
    }
    ggamma[c] += static_cast<T>(sum_gx);
    gbeta[c] += static_cast<T>(sum_g);
    const T scale = gamma[c] * inv_std[c];
    const T mg = static_cast<T>(sum_g / n), mgx = static_cast<T>(sum_gx / n);
    T* gi = gin.data.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) gi[i] = scale * (g[i] - mg - xn[i] * mgx);
  }
}

template <class T>
void leaky_relu_forward(const Tensor<T>& in, Tensor<T>& out) {
  out = Tensor<T>(in.channels, in.extent);
  const auto n = static_cast<std::ptrdiff_t>(in.size());
  const T slope = static_cast<T>(kLeakySlope);
  const T* x = in.data.data();
  T* y = out.data.data();
#pragma omp parallel for simd schedule(static) if (n > kParallelMin)
  for (std::ptrdiff_t i = 0; i < n; ++i) y[i] = x[i] > 0 ? x[i] : slope * x[i];
}

template <class T>
void leaky_relu_backward(const Tensor<T>& in, const Tensor<T>& gout, Tensor<T>& gin) {
  gin = Tensor<T>(in.channels, in.extent);
  const auto n = static_cast<std::ptrdiff_t>(in.size());
  const T slope = static_cast<T>(kLeakySlope);
  const T* x = in.data.data();
  const T* g = gout.data.data();
  T* gi = gin.data.data();
#pragma omp parallel for simd schedule(static) if (n > kParallelMin)
  for (std::ptrdiff_t i = 0; i < n; ++i) gi[i] = x[i] > 0 ? g[i] : slope * g[i];
}

template <class T>
void upsample_forward(const Tensor<T>& in, bool volumetric, Tensor<T>& out) {
  const Extent ie = in.extent;
  const int fz = volumetric ? 2 : 1;
  const Extent oe{ie.depth * fz, ie.height * 2, ie.width * 2};
  out = Tensor<T>(in.channels, oe);
#pragma omp parallel for schedule(static) if (static_cast<std::ptrdiff_t>(out.size()) > kParallelMin)
  for (int c = 0; c < in.channels; ++c) {
    const T* src = in.data.data() + static_cast<std::size_t>(c) * ie.voxels();
    T* dst = out.data.data() + static_cast<std::size_t>(c) * oe.voxels();
    for (int z = 0; z < oe.depth; ++z)
      for (int y = 0; y < oe.height; ++y) {
        const T* line = src + (static_cast<std::size_t>(z / fz) * ie.height + y / 2) * ie.width;
        T* row = dst + (static_cast<std::size_t>(z) * oe.height + y) * oe.width;
        for (int x = 0; x < oe.width; ++x) row[x] = line[x / 2];
      }
  }
}

template <class T>
void upsample_backward(const Tensor<T>& gout, bool volumetric, Tensor<T>& gin) {
  const Extent oe = gout.extent;
  const int fz = volumetric ? 2 : 1;
  const Extent ie{oe.depth / fz, oe.height / 2, oe.width / 2};
  gin = Tensor<T>(gout.channels, ie);
#pragma omp parallel for schedule(static) if (static_cast<std::ptrdiff_t>(gout.size()) > kParallelMin)
  for (int c = 0; c < gout.channels; ++c) {
    const T* src = gout.data.data() + static_cast<std::size_t>(c) * oe.voxels();
    T* dst = gin.data.data() + static_cast<std::size_t>(c) * ie.voxels();
    for (int z = 0; z < oe.depth; ++z)
      for (int y = 0; y < oe.height; ++y) {
        const T* row = src + (static_cast<std::size_t>(z) * oe.height + y) * oe.width;
        T* line = dst + (static_cast<std::size_t>(z / fz) * ie.height + y / 2) * ie.width;
        for (int x = 0; x < oe.width; ++x) line[x / 2] += row[x];
      }
  }
}

#define LCKD_INSTANTIATE(T)                                                                      \
  template void conv_forward(const ConvShape&, const Tensor<T>&, std::span<const T>,              \
                             std::span<const T>, Tensor<T>&);                                    \
  template void conv_backward(const ConvShape&, const Tensor<T>&, std::span<const T>,             \
                              const Tensor<T>&, Tensor<T>*, std::span<T>, std::span<T>);         \
  template void instance_norm_forward(const Tensor<T>&, std::span<const T>, std::span<const T>,  \
                                      Tensor<T>&, Tensor<T>&, std::vector<T>&);                  \
  template void instance_norm_backward(const Tensor<T>&, const Tensor<T>&, std::span<const T>,   \
                                       std::span<const T>, Tensor<T>&, std::span<T>,             \
                                       std::span<T>);                                            \
  template void leaky_relu_forward(const Tensor<T>&, Tensor<T>&);                                \
  template void leaky_relu_backward(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);             \
  template void upsample_forward(const Tensor<T>&, bool, Tensor<T>&);                            \
  template void upsample_backward(const Tensor<T>&, bool, Tensor<T>&);

LCKD_INSTANTIATE(float)
LCKD_INSTANTIATE(double)

}  // namespace parallel
}  // namespace lckd
