#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lckd/tensor.hpp"

// Modality indices are 0-based in code. Everything written to disk or shown
// to a user is 1-based, matching the dataset manifest and the CLI flags.

namespace lckd {

/// The set of missing modalities. At least one modality stays available.
class AvailabilityMask {
 public:
  AvailabilityMask() = default;
  /// Throws UsageError if every modality is missing or an index is out of range.
  AvailabilityMask(int n_modalities, const std::vector<int>& missing);

  static AvailabilityMask all_available(int n_modalities);
  static AvailabilityMask only(int n_modalities, int modality);
  /// Parses "1001" (character i is modality i+1; '1' means available).
  static AvailabilityMask from_bits(const std::string& bits);
  /// Every non-empty availability combination, 2^N - 1 of them, ordered by
  /// number of available modalities and then lexicographically by bit-string
  /// (descending), e.g. 1000, 0100, 0010, 0001, 1100, ...
  static std::vector<AvailabilityMask> all_combinations(int n_modalities);

  [[nodiscard]] int modalities() const { return n_; }
  [[nodiscard]] bool missing(int i) const { return (bits_ >> i) & 1u; }
  [[nodiscard]] bool available(int i) const { return !missing(i); }
  [[nodiscard]] int missing_count() const;
  [[nodiscard]] int available_count() const { return n_ - missing_count(); }
  [[nodiscard]] std::vector<int> available_indices() const;
  [[nodiscard]] std::vector<int> missing_indices() const;
  [[nodiscard]] std::string bits() const;

  friend bool operator==(const AvailabilityMask&, const AvailabilityMask&) = default;

 private:
  int n_ = 0;
  std::uint32_t bits_ = 0;  // bit i set = modality i missing
};

/// Training-time drop sampler: the drop count is uniform over {0..N-1}, then
/// that many distinct modalities are dropped uniformly without replacement.
AvailabilityMask sample_mask(int n_modalities, std::mt19937_64& rng);

/// Per-modality features at the bottleneck and at every skip stage. Slots of
/// missing modalities stay empty until generate_missing fills them.
template <class T>
struct FeatureBundle {
  std::vector<std::optional<Tensor<T>>> bottleneck;          // [modality]
  std::vector<std::vector<std::optional<Tensor<T>>>> skips;  // [stage][modality]

  [[nodiscard]] int modalities() const { return static_cast<int>(bottleneck.size()); }
  [[nodiscard]] bool complete() const;
};

/// Fills every missing slot with the element-wise mean of the available
/// slots, at the bottleneck and at every skip stage. Available slots are
/// untouched.
template <class T>
FeatureBundle<T> generate_missing(FeatureBundle<T> features, const AvailabilityMask& mask);

/// Adjoint of generate_missing: folds the gradients of generated slots back
/// onto the available slots (each receives 1/(N-|m|) of their sum) and clears
/// the generated slots' gradients.
template <class T>
void generate_missing_backward(FeatureBundle<T>& grads, const AvailabilityMask& mask);

}  // namespace lckd
