#include "lckd/availability.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include "lckd/errors.hpp"

namespace lckd {

AvailabilityMask::AvailabilityMask(int n_modalities, const std::vector<int>& missing)
    : n_(n_modalities) {
  require(n_modalities >= 1 && n_modalities <= 32, "modality count out of range");
  for (int i : missing) {
    require(i >= 0 && i < n_modalities, "missing modality index out of range");
    bits_ |= 1u << i;
  }
  require(missing_count() < n_, "availability mask leaves no modality available");
}

AvailabilityMask AvailabilityMask::all_available(int n_modalities) { return {n_modalities, {}}; }

AvailabilityMask AvailabilityMask::only(int n_modalities, int modality) {
  require(modality >= 0 && modality < n_modalities, "modality index out of range");
  std::vector<int> missing;
  for (int i = 0; i < n_modalities; ++i)
    if (i != modality) missing.push_back(i);
  return {n_modalities, missing};
}

AvailabilityMask AvailabilityMask::from_bits(const std::string& bits) {
  std::vector<int> missing;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    require(bits[i] == '0' || bits[i] == '1', "availability bit-string must be 0/1: " + bits);
    if (bits[i] == '0') missing.push_back(static_cast<int>(i));
  }
  return {static_cast<int>(bits.size()), missing};
}

std::vector<AvailabilityMask> AvailabilityMask::all_combinations(int n_modalities) {
  require(n_modalities >= 1 && n_modalities <= 20, "modality count out of range");
  std::vector<AvailabilityMask> out;
  for (std::uint32_t avail = 1; avail < (1u << n_modalities); ++avail) {
    std::vector<int> missing;
    for (int i = 0; i < n_modalities; ++i)
      if (!((avail >> i) & 1u)) missing.push_back(i);
    out.emplace_back(n_modalities, missing);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.available_count() != b.available_count()) return a.available_count() < b.available_count();
    return a.bits() > b.bits();
  });
  return out;
}

int AvailabilityMask::missing_count() const { return std::popcount(bits_); }

std::vector<int> AvailabilityMask::available_indices() const {
  std::vector<int> out;
  for (int i = 0; i < n_; ++i)
    if (available(i)) out.push_back(i);
  return out;
}

std::vector<int> AvailabilityMask::missing_indices() const {
  std::vector<int> out;
  for (int i = 0; i < n_; ++i)
    if (missing(i)) out.push_back(i);
  return out;
}

std::string AvailabilityMask::bits() const {
  std::string s(n_, '1');
  for (int i = 0; i < n_; ++i)
    if (missing(i)) s[i] = '0';
  return s;
}

AvailabilityMask sample_mask(int n_modalities, std::mt19937_64& rng) {
  require(n_modalities >= 2, "drop sampler needs at least two modalities");
  std::uniform_int_distribution<int> count_dist(0, n_modalities - 1);
  const int drop = count_dist(rng);
  std::vector<int> order(n_modalities);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first `drop` entries are a uniform subset.
  for (int i = 0; i < drop; ++i) {
    std::uniform_int_distribution<int> pick(i, n_modalities - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  return {n_modalities, std::vector<int>(order.begin(), order.begin() + drop)};
}

template <class T>
bool FeatureBundle<T>::complete() const {
  auto filled = [](const auto& slots) {
    return std::all_of(slots.begin(), slots.end(), [](const auto& s) { return s.has_value(); });
  };
  return filled(bottleneck) && std::all_of(skips.begin(), skips.end(), filled);
}

namespace {

template <class T>
void fill_level(std::vector<std::optional<Tensor<T>>>& slots, const AvailabilityMask& mask) {
  const auto avail = mask.available_indices();
  require(!avail.empty(), "cannot generate features with every modality missing");
  for (int i : avail)
    require(i < static_cast<int>(slots.size()) && slots[i].has_value(),
            "available modality " + std::to_string(i + 1) + " has no feature");
  const auto missing = mask.missing_indices();
  if (missing.empty()) return;
  const Tensor<T>& first = *slots[avail.front()];
  for (int i : avail) require(slots[i]->same_shape(first), "feature shapes differ across modalities");
  Tensor<T> mean(first.channels, first.extent);
  const double inv = 1.0 / static_cast<double>(avail.size());
  for (std::size_t e = 0; e < first.size(); ++e) {
    double acc = 0;
    for (int i : avail) acc += slots[i]->data[e];
    mean.data[e] = static_cast<T>(acc * inv);
  }
  for (int n : missing) slots[n] = mean;
}

template <class T>
void fold_level(std::vector<std::optional<Tensor<T>>>& grads, const AvailabilityMask& mask) {
  const auto missing = mask.missing_indices();
  if (missing.empty()) return;
  const auto avail = mask.available_indices();
  std::optional<Tensor<T>> sum;
  for (int n : missing) {
    if (!grads[n]) continue;
    if (!sum) sum = Tensor<T>(grads[n]->channels, grads[n]->extent);
    for (std::size_t e = 0; e < sum->size(); ++e) sum->data[e] += grads[n]->data[e];
    grads[n].reset();
  }
  if (!sum) return;
  const T share = static_cast<T>(1.0 / static_cast<double>(avail.size()));
  for (int i : avail) {
    if (!grads[i]) grads[i] = Tensor<T>(sum->channels, sum->extent);
    for (std::size_t e = 0; e < sum->size(); ++e) grads[i]->data[e] += share * sum->data[e];
  }
}

}  // namespace

template <class T>
FeatureBundle<T> generate_missing(FeatureBundle<T> features, const AvailabilityMask& mask) {
  require(mask.modalities() == features.modalities(), "mask and feature bundle disagree on N");
  fill_level(features.bottleneck, mask);
  for (auto& stage : features.skips) fill_level(stage, mask);
  return features;
}

template <class T>
void generate_missing_backward(FeatureBundle<T>& grads, const AvailabilityMask& mask) {
  fold_level(grads.bottleneck, mask);
  for (auto& stage : grads.skips) fold_level(stage, mask);
}

template struct FeatureBundle<float>;
template struct FeatureBundle<double>;
template FeatureBundle<float> generate_missing(FeatureBundle<float>, const AvailabilityMask&);
template FeatureBundle<double> generate_missing(FeatureBundle<double>, const AvailabilityMask&);
template void generate_missing_backward(FeatureBundle<float>&, const AvailabilityMask&);
template void generate_missing_backward(FeatureBundle<double>&, const AvailabilityMask&);

}  // namespace lckd
