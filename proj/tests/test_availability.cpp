#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "lckd/availability.hpp"
#include "lckd/errors.hpp"

using namespace lckd;

namespace {

FeatureBundle<double> bundle_from(const std::vector<std::vector<double>>& values, const AvailabilityMask& mask) {
  FeatureBundle<double> b;
  const int n = static_cast<int>(values.size());
  b.bottleneck.resize(n);
  for (int i = 0; i < n; ++i) {
    if (mask.missing(i)) continue;
    Tensor<double> t(1, {1, 1, static_cast<int>(values[i].size())});
    t.data = values[i];
    b.bottleneck[i] = t;
  }
  return b;
}

}  // namespace

TEST_CASE("mask bit-strings use '1' for available modalities") {
  const auto m = AvailabilityMask::from_bits("1001");
  CHECK(m.modalities() == 4);
  CHECK(m.available(0));
  CHECK(m.missing(1));
  CHECK(m.missing(2));
  CHECK(m.available(3));
  CHECK(m.bits() == "1001");
  CHECK(m.missing_count() == 2);
  CHECK(m.available_indices() == std::vector<int>{0, 3});
  CHECK(AvailabilityMask(4, {1, 2}) == m);
  CHECK_THROWS_AS(AvailabilityMask::from_bits("0000"), UsageError);
  CHECK_THROWS_AS(AvailabilityMask::from_bits("10x1"), UsageError);
  CHECK_THROWS_AS(AvailabilityMask(4, {0, 1, 2, 3}), UsageError);
  CHECK_THROWS_AS(AvailabilityMask(4, {4}), UsageError);
}

TEST_CASE("all availability combinations are enumerated in table order") {
  const auto two = AvailabilityMask::all_combinations(2);
  REQUIRE(two.size() == 3);
  CHECK(two[0].bits() == "10");
  CHECK(two[1].bits() == "01");
  CHECK(two[2].bits() == "11");

  const auto four = AvailabilityMask::all_combinations(4);
  CHECK(four.size() == 15);
  std::set<std::string> distinct;
  for (const auto& m : four) distinct.insert(m.bits());
  CHECK(distinct.size() == 15);
  CHECK(four.front().bits() == "1000");
  CHECK(four[4].bits() == "1100");
  CHECK(four.back().bits() == "1111");
  for (std::size_t i = 1; i < four.size(); ++i) CHECK(four[i - 1].available_count() <= four[i].available_count());
}

TEST_CASE("drop sampler draws the drop count uniformly") {
  std::mt19937_64 rng(42);
  std::vector<int> counts(4);
  const int draws = 40000;
  std::vector<int> per_modality(4);
  for (int i = 0; i < draws; ++i) {
    const auto m = sample_mask(4, rng);
    REQUIRE(m.missing_count() < 4);
    ++counts[m.missing_count()];
    for (int j : m.missing_indices()) ++per_modality[j];
  }
  for (int c : counts) CHECK(std::abs(c / double(draws) - 0.25) <= 0.02);
  // Each modality is dropped with probability E[c]/N = 1.5/4.
  for (int c : per_modality) CHECK(std::abs(c / double(draws) - 0.375) <= 0.02);
}

TEST_CASE("two-modality sampler only produces the three legal masks") {
  std::mt19937_64 rng(1);
  std::set<std::string> seen;
  for (int i = 0; i < 2000; ++i) seen.insert(sample_mask(2, rng).bits());
  CHECK(seen == std::set<std::string>{"11", "10", "01"});
}

TEST_CASE("generated features are the mean of the available ones") {
  SUBCASE("one missing") {
    const auto mask = AvailabilityMask::from_bits("1110");
    const auto out = generate_missing(bundle_from({{1, 2}, {3, 4}, {5, 6}, {}}, mask), mask);
    CHECK(out.bottleneck[3]->data == std::vector<double>{3, 4});
  }
  SUBCASE("nothing missing leaves the bundle unchanged") {
    const auto mask = AvailabilityMask::all_available(3);
    const auto in = bundle_from({{1, 2}, {3, 4}, {5, 6}}, mask);
    const auto out = generate_missing(in, mask);
    for (int i = 0; i < 3; ++i) CHECK(*out.bottleneck[i] == *in.bottleneck[i]);
  }
  SUBCASE("a single available modality is copied exactly") {
    const auto mask = AvailabilityMask::only(4, 0);
    const auto out = generate_missing(bundle_from({{0.1, -7.25}, {}, {}, {}}, mask), mask);
    for (int i = 1; i < 4; ++i) CHECK(out.bottleneck[i]->data == std::vector<double>{0.1, -7.25});
  }
}

TEST_CASE("generation fills skips, preserves available slots and is idempotent") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 3;
    const auto mask = sample_mask(n, rng);
    FeatureBundle<float> b;
    b.bottleneck.resize(n);
    b.skips.assign(2, std::vector<std::optional<Tensor<float>>>(n));
    for (int i = 0; i < n; ++i) {
      if (mask.missing(i)) continue;
      b.bottleneck[i] = test::random_tensor<float>(2, {1, 2, 2}, rng);
      b.skips[0][i] = test::random_tensor<float>(1, {1, 8, 8}, rng);
      b.skips[1][i] = test::random_tensor<float>(2, {1, 4, 4}, rng);
    }
    const auto once = generate_missing(b, mask);
    CHECK(once.complete());
    for (int i : mask.available_indices()) {
      CHECK(*once.bottleneck[i] == *b.bottleneck[i]);
      CHECK(*once.skips[0][i] == *b.skips[0][i]);
    }
    const auto twice = generate_missing(once, mask);
    for (int i = 0; i < n; ++i) {
      CHECK(*twice.bottleneck[i] == *once.bottleneck[i]);
      CHECK(*twice.skips[1][i] == *once.skips[1][i]);
    }
  }
}

TEST_CASE("incomplete bundles are rejected") {
  const auto mask = AvailabilityMask::from_bits("110");
  auto b = bundle_from({{1}, {2}, {3}}, AvailabilityMask::from_bits("100"));
  CHECK_THROWS_AS(generate_missing(b, mask), UsageError);
}

TEST_CASE("generate_missing_backward is the adjoint of generation") {
  std::mt19937_64 rng(4);
  const auto mask = AvailabilityMask::from_bits("1010");
  FeatureBundle<double> x;
  x.bottleneck.resize(4);
  for (int i : mask.available_indices()) x.bottleneck[i] = test::random_tensor<double>(1, {1, 1, 5}, rng);
  FeatureBundle<double> y;
  y.bottleneck.resize(4);
  for (int i = 0; i < 4; ++i) y.bottleneck[i] = test::random_tensor<double>(1, {1, 1, 5}, rng);

  // <G x, y> == <x, G^T y>
  const auto gx = generate_missing(x, mask);
  double lhs = 0;
  for (int i = 0; i < 4; ++i)
    for (int e = 0; e < 5; ++e) lhs += gx.bottleneck[i]->data[e] * y.bottleneck[i]->data[e];
  auto gty = y;
  generate_missing_backward(gty, mask);
  double rhs = 0;
  for (int i : mask.available_indices())
    for (int e = 0; e < 5; ++e) rhs += x.bottleneck[i]->data[e] * gty.bottleneck[i]->data[e];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  for (int i : mask.missing_indices())
    CHECK((!gty.bottleneck[i] || std::all_of(gty.bottleneck[i]->data.begin(), gty.bottleneck[i]->data.end(),
                                              [](double v) { return v == 0; })));
}
