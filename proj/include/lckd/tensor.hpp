#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lckd {

/// Spatial extent of a field. 2D fields use depth == 1.
struct Extent {
  int depth = 1;
  int height = 1;
  int width = 1;

  [[nodiscard]] std::size_t voxels() const {
    return static_cast<std::size_t>(depth) * height * width;
  }
  friend bool operator==(const Extent&, const Extent&) = default;
};

[[nodiscard]] std::string to_string(const Extent& e);

/// Cubic extent for a volume of `dims` axes each `side` voxels long.
[[nodiscard]] Extent cube(int dims, int side);

/// Dense channel-major field [channels][depth][height][width].
template <class T>
struct Tensor {
  int channels = 0;
  Extent extent;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, Extent e, T fill = T(0))
      : channels(c), extent(e), data(static_cast<std::size_t>(c) * e.voxels(), fill) {}

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] std::size_t plane() const { return extent.voxels(); }

  [[nodiscard]] std::span<T> channel(int c) {
    return {data.data() + static_cast<std::size_t>(c) * plane(), plane()};
  }
  [[nodiscard]] std::span<const T> channel(int c) const {
    return {data.data() + static_cast<std::size_t>(c) * plane(), plane()};
  }

  [[nodiscard]] bool same_shape(const Tensor& o) const {
    return channels == o.channels && extent == o.extent;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

template <class To, class From>
Tensor<To> cast(const Tensor<From>& t) {
  Tensor<To> out(t.channels, t.extent);
  for (std::size_t i = 0; i < t.size(); ++i) out.data[i] = static_cast<To>(t.data[i]);
  return out;
}

/// Stacks tensors with identical extents along the channel axis.
template <class T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts);

/// Inverse of concat_channels: copies channel ranges of `whole` into `parts`.
template <class T>
void split_channels(const Tensor<T>& whole, std::span<Tensor<T>* const> parts);

}  // namespace lckd
