#include "lckd/tensor.hpp"

#include <algorithm>
#include <cstring>

#include "lckd/errors.hpp"

namespace lckd {

std::string to_string(const Extent& e) {
  return std::to_string(e.depth) + "x" + std::to_string(e.height) + "x" + std::to_string(e.width);
}

Extent cube(int dims, int side) {
  require(dims == 2 || dims == 3, "spatial dims must be 2 or 3");
  return Extent{dims == 3 ? side : 1, side, side};
}

template <class T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts) {
  require(!parts.empty(), "concat of zero tensors");
  int channels = 0;
  for (const auto* p : parts) {
    require(p->extent == parts.front()->extent, "concat extent mismatch");
    channels += p->channels;
  }
  Tensor<T> out(channels, parts.front()->extent);
  auto* dst = out.data.data();
  for (const auto* p : parts) {
    std::copy(p->data.begin(), p->data.end(), dst);
    dst += p->size();
  }
  return out;
}

template <class T>
void split_channels(const Tensor<T>& whole, std::span<Tensor<T>* const> parts) {
  const auto* src = whole.data.data();
  for (auto* p : parts) {
    std::copy(src, src + p->size(), p->data.begin());
    src += p->size();
  }
}

template Tensor<float> concat_channels(std::span<const Tensor<float>* const>);
template Tensor<double> concat_channels(std::span<const Tensor<double>* const>);
template void split_channels(const Tensor<float>&, std::span<Tensor<float>* const>);
template void split_channels(const Tensor<double>&, std::span<Tensor<double>* const>);

}  // namespace lckd
