#include <cmath>

#include "lckd/errors.hpp"
#include "lckd/kernels.hpp"

namespace lckd {

Extent ConvShape::output(Extent in) const {
  auto axis = [&](int n) { return (n + 2 * pad - kernel) / stride + 1; };
  Extent out{volumetric ? axis(in.depth) : in.depth, axis(in.height), axis(in.width)};
  require(out.depth > 0 && out.height > 0 && out.width > 0,
          "convolution output is empty for input " + to_string(in));
  return out;
}

namespace reference {

namespace {

struct Taps {
  int kd, k, s, pd, p;
};

Taps taps_of(const ConvShape& sh) {
  return {sh.kernel_depth(), sh.kernel, sh.stride, sh.volumetric ? sh.pad : 0, sh.pad};
}

}  // namespace

template <class T>
void conv_forward(const ConvShape& sh, const Tensor<T>& in, std::span<const T> w,
                  std::span<const T> b, Tensor<T>& out) {
  const Extent oe = sh.output(in.extent);
  out = Tensor<T>(sh.out_channels, oe);
  const Taps t = taps_of(sh);
  const Extent ie = in.extent;
  for (int co = 0; co < sh.out_channels; ++co)
    for (int oz = 0; oz < oe.depth; ++oz)
      for (int oy = 0; oy < oe.height; ++oy)
        for (int ox = 0; ox < oe.width; ++ox) {
          T acc = b[co];
          for (int ci = 0; ci < sh.in_channels; ++ci)
            for (int kz = 0; kz < t.kd; ++kz) {
              const int iz = oz * (sh.volumetric ? t.s : 1) - t.pd + kz;
              if (iz < 0 || iz >= ie.depth) continue;
              for (int ky = 0; ky < t.k; ++ky) {
                const int iy = oy * t.s - t.p + ky;
                if (iy < 0 || iy >= ie.height) continue;
                for (int kx = 0; kx < t.k; ++kx) {
                  const int ix = ox * t.s - t.p + kx;
                  if (ix < 0 || ix >= ie.width) continue;
                  const std::size_t wi =
                      ((static_cast<std::size_t>(co) * sh.in_channels + ci) * t.kd + kz) * t.k * t.k +
                      ky * t.k + kx;
                  const std::size_t ii =
                      ((static_cast<std::size_t>(ci) * ie.depth + iz) * ie.height + iy) * ie.width + ix;
                  acc += w[wi] * in.data[ii];
                }
              }
            }
          out.data[((static_cast<std::size_t>(co) * oe.depth + oz) * oe.height + oy) * oe.width + ox] = acc;
        }
}

template <class T>
void conv_backward(const ConvShape& sh, const Tensor<T>& in, std::span<const T> w,
                   const Tensor<T>& gout, Tensor<T>* gin, std::span<T> gw, std::span<T> gb) {
  const Extent oe = gout.extent;
  const Extent ie = in.extent;
  const Taps t = taps_of(sh);
  if (gin) *gin = Tensor<T>(in.channels, ie);
  for (int co = 0; co < sh.out_channels; ++co)
    for (int oz = 0; oz < oe.depth; ++oz)
      for (int oy = 0; oy < oe.height; ++oy)
        for (int ox = 0; ox < oe.width; ++ox) {
          const T g =
              gout.data[((static_cast<std::size_t>(co) * oe.depth + oz) * oe.height + oy) * oe.width + ox];
          gb[co] += g;
          for (int ci = 0; ci < sh.in_channels; ++ci)
            for (int kz = 0; kz < t.kd; ++kz) {
              const int iz = oz * (sh.volumetric ? t.s : 1) - t.pd + kz;
              if (iz < 0 || iz >= ie.depth) continue;
              for (int ky = 0; ky < t.k; ++ky) {
                const int iy = oy * t.s - t.p + ky;
                if (iy < 0 || iy >= ie.height) continue;
                for (int kx = 0; kx < t.k; ++kx) {
                  const int ix = ox * t.s - t.p + kx;
                  if (ix < 0 || ix >= ie.width) continue;
                  const std::size_t wi =
                      ((static_cast<std::size_t>(co) * sh.in_channels + ci) * t.kd + kz) * t.k * t.k +
                      ky * t.k + kx;
                  const std::size_t ii =
                      ((static_cast<std::size_t>(ci) * ie.depth + iz) * ie.height + iy) * ie.width + ix;
                  gw[wi] += g * in.data[ii];
                  if (gin) gin->data[ii] += g * w[wi];
                }
              }
            }
        }
}

template <class T>
void instance_norm_forward(const Tensor<T>& in, std::span<const T> gamma, std::span<const T> beta,
                           Tensor<T>& out, Tensor<T>& normalized, std::vector<T>& inv_std) {
  out = Tensor<T>(in.channels, in.extent);
  normalized = Tensor<T>(in.channels, in.extent);
  inv_std.assign(in.channels, T(0));
  const std::size_t n = in.plane();
  for (int c = 0; c < in.channels; ++c) {
    auto x = in.channel(c);
    double mean = 0;
    for (auto v : x) mean += v;
    mean /= n;
    double var = 0;
    for (auto v : x) var += (v - mean) * (v - mean);
    var /= n;
    const T is = static_cast<T>(1.0 / std::sqrt(var + kNormEps));
    inv_std[c] = is;
    auto xn = normalized.channel(c);
    auto y = out.channel(c);
    for (std::size_t i = 0; i < n; ++i) {
      xn[i] = static_cast<T>(x[i] - mean) * is;
      y[i] = gamma[c] * xn[i] + beta[c];
    }
  }
}

template <class T>
void instance_norm_backward(const Tensor<T>& gout, const Tensor<T>& normalized,
                            std::span<const T> inv_std, std::span<const T> gamma, Tensor<T>& gin,
                            std::span<T> ggamma, std::span<T> gbeta) {
  gin = Tensor<T>(gout.channels, gout.extent);
  const std::size_t n = gout.plane();
  for (int c = 0; c < gout.channels; ++c) {
    auto g = gout.channel(c);
    auto xn = normalized.channel(c);
    double sum_g = 0, sum_gx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_g += g[i];
      sum_gx += g[i] * xn[i];
    }
    ggamma[c] += static_cast<T>(sum_gx);
    gbeta[c] += static_cast<T>(sum_g);
    const double scale = gamma[c] * inv_std[c];
    auto gi = gin.channel(c);
    for (std::size_t i = 0; i < n; ++i)
      gi[i] = static_cast<T>(scale * (g[i] - sum_g / n - xn[i] * sum_gx / n));
  }
}

template <class T>
void leaky_relu_forward(const Tensor<T>& in, Tensor<T>& out) {
  out = Tensor<T>(in.channels, in.extent);
  for (std::size_t i = 0; i < in.size(); ++i)
    out.data[i] = in.data[i] > 0 ? in.data[i] : static_cast<T>(kLeakySlope) * in.data[i];
}

template <class T>
void leaky_relu_backward(const Tensor<T>& in, const Tensor<T>& gout, Tensor<T>& gin) {
  gin = Tensor<T>(in.channels, in.extent);
  for (std::size_t i = 0; i < in.size(); ++i)
    gin.data[i] = in.data[i] > 0 ? gout.data[i] : static_cast<T>(kLeakySlope) * gout.data[i];
}

template <class T>
void upsample_forward(const Tensor<T>& in, bool volumetric, Tensor<T>& out) {
  const Extent ie = in.extent;
  const int fz = volumetric ? 2 : 1;
  const Extent oe{ie.depth * fz, ie.height * 2, ie.width * 2};
  out = Tensor<T>(in.channels, oe);
  for (int c = 0; c < in.channels; ++c)
    for (int z = 0; z < oe.depth; ++z)
      for (int y = 0; y < oe.height; ++y)
        for (int x = 0; x < oe.width; ++x)
          out.data[((static_cast<std::size_t>(c) * oe.depth + z) * oe.height + y) * oe.width + x] =
              in.data[((static_cast<std::size_t>(c) * ie.depth + z / fz) * ie.height + y / 2) * ie.width + x / 2];
}

template <class T>
void upsample_backward(const Tensor<T>& gout, bool volumetric, Tensor<T>& gin) {
  const Extent oe = gout.extent;
  const int fz = volumetric ? 2 : 1;
  const Extent ie{oe.depth / fz, oe.height / 2, oe.width / 2};
  gin = Tensor<T>(gout.channels, ie);
  for (int c = 0; c < gout.channels; ++c)
    for (int z = 0; z < oe.depth; ++z)
      for (int y = 0; y < oe.height; ++y)
        for (int x = 0; x < oe.width; ++x)
          gin.data[((static_cast<std::size_t>(c) * ie.depth + z / fz) * ie.height + y / 2) * ie.width + x / 2] +=
              gout.data[((static_cast<std::size_t>(c) * oe.depth + z) * oe.height + y) * oe.width + x];
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

}  // namespace reference
}  // namespace lckd
