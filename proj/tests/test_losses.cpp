#include <doctest.h>

#include <limits>

#include "helpers.hpp"
#include "lckd/errors.hpp"
#include "lckd/losses.hpp"
#include "oracles.hpp"

using namespace lckd;

namespace {

FeatureBundle<double> bundle(const std::vector<std::vector<double>>& f, const AvailabilityMask& mask) {
  FeatureBundle<double> b;
  b.bottleneck.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (mask.missing(static_cast<int>(i))) continue;
    Tensor<double> t(1, {1, 1, static_cast<int>(f[i].size())});
    t.data = f[i];
    b.bottleneck[i] = t;
  }
  return b;
}

TeacherSet teachers(std::vector<int> unique) {
  TeacherSet t;
  t.unique = std::move(unique);
  t.per_task = t.unique;
  return t;
}

LossConfig with_p(int p) {
  LossConfig c;
  c.p_norm = p;
  return c;
}

}  // namespace

TEST_CASE("distillation loss on a hand-worked example") {
  const auto mask = AvailabilityMask::from_bits("110");
  const auto b = bundle({{1, 3}, {2, 5}, {}}, mask);
  CHECK(ckd_loss(b, teachers({1}), mask, with_p(1)) == doctest::Approx(3.0));
  CHECK(ckd_loss(b, teachers({1}), mask, with_p(2)) == doctest::Approx(std::sqrt(5.0)));
  LossConfig sq = with_p(2);
  sq.squared_l2 = true;
  CHECK(ckd_loss(b, teachers({1}), mask, sq) == doctest::Approx(5.0));
  LossConfig mean = with_p(1);
  mean.reduction = CkdReduction::mean;
  CHECK(ckd_loss(b, teachers({1}), mask, mean) == doctest::Approx(1.5));
}

TEST_CASE("distillation loss edge cases") {
  SUBCASE("only the teacher available") {
    const auto mask = AvailabilityMask::from_bits("010");
    CHECK(ckd_loss(bundle({{}, {2, 5}, {}}, mask), teachers({1}), mask, with_p(1)) == 0.0);
  }
  SUBCASE("teacher missing") {
    const auto mask = AvailabilityMask::from_bits("101");
    CHECK(ckd_loss(bundle({{1, 1}, {}, {4, 4}}, mask), teachers({1}), mask, with_p(1)) == 0.0);
  }
  SUBCASE("equal features") {
    const auto mask = AvailabilityMask::all_available(3);
    for (int p : {1, 2}) CHECK(ckd_loss(bundle({{1, 2}, {1, 2}, {1, 2}}, mask), teachers({0, 2}), mask, with_p(p)) == 0.0);
  }
  SUBCASE("empty teacher set") {
    const auto mask = AvailabilityMask::all_available(2);
    CHECK_THROWS_AS(ckd_loss(bundle({{1}, {2}}, mask), teachers({}), mask, with_p(1)), UsageError);
  }
}

TEST_CASE("teachers are also students of each other") {
  // T = {a, b}, students {c}: pairs (a,c), (a,b), (b,c), (b,a).
  const auto mask = AvailabilityMask::all_available(3);
  const auto b = bundle({{0}, {1}, {10}}, mask);
  CHECK(ckd_loss(b, teachers({0, 1}), mask, with_p(1)) == doctest::Approx(10 + 1 + 9 + 1));
}

TEST_CASE("distillation loss matches the brute-force oracle on random bundles") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 3;
    const auto mask = sample_mask(n, rng);
    std::vector<std::vector<double>> f(n, std::vector<double>(8));
    for (auto& v : f)
      for (auto& x : v) x = nd(rng);
    std::vector<int> t;
    for (int i = 0; i < n; ++i)
      if (rng() % 2) t.push_back(i);
    if (t.empty()) t.push_back(static_cast<int>(rng() % n));
    std::vector<bool> avail(n);
    for (int i = 0; i < n; ++i) avail[i] = mask.available(i);
    for (int p : {1, 2}) {
      const double got = ckd_loss(bundle(f, mask), teachers(t), mask, with_p(p));
      const double want = oracle::ckd(f, t, avail, p);
      CHECK(std::abs(got - want) <= 1e-6 * std::max(1.0, std::abs(want)));
      CHECK(got >= 0);
    }
  }
}

TEST_CASE("making a modality missing removes exactly its pairs") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> f(4, std::vector<double>(8));
  for (auto& v : f)
    for (auto& x : v) x = nd(rng);
  const std::vector<int> t{2, 0};
  const auto full = AvailabilityMask::all_available(4);
  const double all = ckd_loss(bundle(f, full), teachers(t), full, with_p(1));
  const auto less = AvailabilityMask::from_bits("1101");
  const double without = ckd_loss(bundle(f, less), teachers(t), less, with_p(1));
  // Removed pairs: (2, j) for j in {0,1,3} plus (0, 2).
  double removed = 0;
  auto l1 = [&](int a, int b) {
    double s = 0;
    for (int e = 0; e < 8; ++e) s += std::abs(f[a][e] - f[b][e]);
    return s;
  };
  removed += l1(2, 0) + l1(2, 1) + l1(2, 3) + l1(0, 2);
  CHECK(all - without == doctest::Approx(removed).epsilon(1e-12));
}

TEST_CASE("distillation gradients match finite differences") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  const auto mask = AvailabilityMask::from_bits("1011");
  for (int p : {1, 2})
    for (bool detach : {false, true})
      for (bool squared : {false, true}) {
        if (squared && p == 1) continue;
        LossConfig c = with_p(p);
        c.detach_teacher = detach;
        c.squared_l2 = squared;
        std::vector<std::vector<double>> f(4, std::vector<double>(6));
        for (auto& v : f)
          for (auto& x : v) x = nd(rng);
        auto b = bundle(f, mask);
        const TeacherSet t = teachers({2, 0});
        std::vector<std::optional<Tensor<double>>> g;
        ckd_loss(b, t, mask, c, &g, 0.5);
        CHECK(!g[1].has_value());
        const double h = 1e-6;
        for (int m : mask.available_indices())
          for (int e = 0; e < 6; ++e) {
            double& x = b.bottleneck[m]->data[e];
            const double keep = x;
            x = keep + h;
            const double up = ckd_loss(b, t, mask, c);
            x = keep - h;
            const double down = ckd_loss(b, t, mask, c);
            x = keep;
            if (detach) continue;
            CHECK(g[m]->data[e] == doctest::Approx(0.5 * (up - down) / (2 * h)).epsilon(1e-5));
          }
        if (detach) {
          // Modality 3 is never a teacher, so detaching changes nothing for it.
          auto ref = bundle(f, mask);
          std::vector<std::optional<Tensor<double>>> full;
          LossConfig attached = c;
          attached.detach_teacher = false;
          ckd_loss(ref, t, mask, attached, &full, 0.5);
          CHECK(g[3]->data == full[3]->data);  // student only
        }
      }
}

TEST_CASE("task loss analytic values") {
  const LossConfig c;
  SUBCASE("half probability gives ln 2 cross-entropy") {
    LossConfig ce_only;
    ce_only.task_dice_weight = 0;
    Tensor<double> p(2, {1, 4, 4}, 0.5), y(2, {1, 4, 4}, 0.0);
    y.data[3] = 1;
    y.data[20] = 1;
    CHECK(task_loss(p, y, ce_only) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("near-perfect prediction drives the loss to zero") {
    Tensor<double> y(1, {1, 4, 4}, 0.0);
    for (int i = 0; i < 8; ++i) y.data[i] = 1;
    Tensor<double> p = y;
    for (auto& v : p.data) v = v > 0.5 ? 1 - 1e-9 : 1e-9;
    CHECK(task_loss(p, y, c) < 1e-6);
  }
  SUBCASE("empty target and empty prediction") {
    Tensor<double> y(1, {1, 4, 4}, 0.0), p(1, {1, 4, 4}, 1e-15);
    CHECK(task_loss(p, y, c) < 1e-8);
  }
  SUBCASE("soft Dice term by hand") {
    LossConfig dice_only;
    dice_only.task_ce_weight = 0;
    Tensor<double> p(1, {1, 1, 2}), y(1, {1, 1, 2});
    p.data = {0.8, 0.4};
    y.data = {1, 0};
    const double s = dice_only.dice_smooth;
    CHECK(task_loss(p, y, dice_only) == doctest::Approx(1 - (1.6 + s) / (1.2 + 1 + s)).epsilon(1e-12));
  }
  SUBCASE("errors") {
    Tensor<double> p(1, {1, 1, 2}, 0.5), y(1, {1, 1, 3}, 0.0);
    CHECK_THROWS_AS(task_loss(p, y, c), UsageError);
    Tensor<double> y2(1, {1, 1, 2}, 0.0), bad(1, {1, 1, 2}, 1.0);
    CHECK_THROWS_AS(task_loss(bad, y2, c), UsageError);
  }
}

TEST_CASE("task loss from logits equals task loss on sigmoid and has the right gradient") {
  std::mt19937_64 rng(5);
  auto logits = test::random_tensor<double>(3, {1, 4, 5}, rng, 2.0);
  Tensor<double> y(3, {1, 4, 5});
  for (auto& v : y.data) v = static_cast<double>(rng() % 2);
  const LossConfig c;
  Tensor<double> prob = logits;
  for (auto& v : prob.data) v = 1 / (1 + std::exp(-v));
  Tensor<double> g;
  const double from_logits = task_loss_from_logits(logits, y, c, &g, 2.0);
  CHECK(from_logits == doctest::Approx(task_loss(prob, y, c)).epsilon(1e-12));
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.size(); i += 3) {
    const double keep = logits.data[i];
    logits.data[i] = keep + h;
    const double up = task_loss_from_logits(logits, y, c);
    logits.data[i] = keep - h;
    const double down = task_loss_from_logits(logits, y, c);
    logits.data[i] = keep;
    CHECK(g.data[i] == doctest::Approx(2.0 * (up - down) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("logit form stays finite for saturated logits") {
  Tensor<float> logits(1, {1, 1, 2}), y(1, {1, 1, 2});
  logits.data = {80.f, -80.f};
  y.data = {0.f, 1.f};
  const double v = task_loss_from_logits(logits, y, LossConfig{});
  CHECK(std::isfinite(v));
  CHECK(v > 10);
}

TEST_CASE("total loss") {
  CHECK(total_loss(2.0, 3.0, 0.1) == doctest::Approx(2.3));
  CHECK(total_loss(1.25, 99.0, 0.0) == 1.25);
  CHECK(total_loss(1.25, 1e300, 0.0) == 1.25);
  CHECK_THROWS_AS(total_loss(std::numeric_limits<double>::quiet_NaN(), 1, 0.1), NumericalError);
  CHECK_THROWS_AS(total_loss(1, std::numeric_limits<double>::infinity(), 0.1), NumericalError);
}

TEST_CASE("loss configuration validation") {
  LossConfig c;
  CHECK_NOTHROW(c.validate());
  c.p_norm = 3;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = {};
  c.alpha = -1;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = {};
  c.dice_smooth = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = {};
  c.squared_l2 = true;
  CHECK_THROWS_AS(c.validate(), UsageError);
}
