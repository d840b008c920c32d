#pragma once

#include <span>
#include <vector>

#include "lckd/tensor.hpp"

// Layer kernels used by the U-Net. Two implementations share one signature:
//   lckd::parallel   im2col + GEMM and OpenMP loops, used for training/eval
//   lckd::reference  plain serial loops, kept as the test oracle
// Backward kernels accumulate into parameter gradients and overwrite
// input gradients.

namespace lckd {

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kNormEps = 1e-5;

/// Convolution geometry. Kernel, stride and padding apply to every spatial
/// axis; 2D fields keep a unit depth axis that is never convolved.
struct ConvShape {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  bool volumetric = false;

  [[nodiscard]] int kernel_depth() const { return volumetric ? kernel : 1; }
  [[nodiscard]] int taps() const { return kernel_depth() * kernel * kernel; }
  [[nodiscard]] std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * taps();
  }
  [[nodiscard]] Extent output(Extent in) const;
};

#define LCKD_KERNEL_DECLS                                                                       \
  template <class T>                                                                           \
  void conv_forward(const ConvShape& shape, const Tensor<T>& in, std::span<const T> weight,     \
                    std::span<const T> bias, Tensor<T>& out);                                  \
  template <class T>                                                                           \
  void conv_backward(const ConvShape& shape, const Tensor<T>& in, std::span<const T> weight,    \
                     const Tensor<T>& grad_out, Tensor<T>* grad_in, std::span<T> grad_weight,  \
                     std::span<T> grad_bias);                                                  \
  template <class T>                                                                           \
  void instance_norm_forward(const Tensor<T>& in, std::span<const T> gamma,                    \
                             std::span<const T> beta, Tensor<T>& out, Tensor<T>& normalized,   \
                             std::vector<T>& inv_std);                                         \
  template <class T>                                                                           \
  void instance_norm_backward(const Tensor<T>& grad_out, const Tensor<T>& normalized,          \
                              std::span<const T> inv_std, std::span<const T> gamma,            \
                              Tensor<T>& grad_in, std::span<T> grad_gamma,                     \
                              std::span<T> grad_beta);                                         \
  template <class T>                                                                           \
  void leaky_relu_forward(const Tensor<T>& in, Tensor<T>& out);                                \
  template <class T>                                                                           \
  void leaky_relu_backward(const Tensor<T>& in, const Tensor<T>& grad_out, Tensor<T>& grad_in); \
  template <class T>                                                                           \
  void upsample_forward(const Tensor<T>& in, bool volumetric, Tensor<T>& out);                 \
  template <class T>                                                                           \
  void upsample_backward(const Tensor<T>& grad_out, bool volumetric, Tensor<T>& grad_in);

namespace parallel {
LCKD_KERNEL_DECLS
}

namespace reference {
LCKD_KERNEL_DECLS
}

#undef LCKD_KERNEL_DECLS

/// Caps the OpenMP team size; 0 keeps the runtime default. Reads LCKD_THREADS
/// when `from_env` is set.
void configure_threads(int threads, bool from_env = true);

}  // namespace lckd
