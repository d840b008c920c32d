#include <doctest.h>

#include <fstream>
#include <set>

#include "helpers.hpp"
#include "lckd/errors.hpp"
#include "lckd/evaluator.hpp"
#include "oracles.hpp"

using namespace lckd;

namespace {

std::vector<float> random_mask(std::size_t n, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution b(density);
  std::vector<float> m(n);
  for (auto& v : m) v = b(rng) ? 1.f : 0.f;
  return m;
}

std::vector<Sample> cases(int n_modalities, int n, std::uint64_t seed) {
  DatasetSpec spec;
  spec.n_modalities = n_modalities;
  spec.n_tasks = 3;
  spec.spatial_dims = 2;
  spec.side = 16;
  spec.n_cases = n;
  spec.seed = seed;
  InformativenessPlan plan;
  plan.teacher_of_task = {0, 1 % n_modalities, 0};
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) out.push_back(synthesize_case(spec, plan, i).sample);
  return out;
}

Architecture model(int n_modalities) {
  ModelConfig c;
  c.spatial_dims = 2;
  c.n_modalities = n_modalities;
  c.n_tasks = 3;
  c.base_channels = 2;
  c.depth = 2;
  c.seed = 4;
  return Architecture(c);
}

}  // namespace

TEST_CASE("dice examples") {
  const std::vector<float> a{1, 1, 0, 0}, b{1, 0, 1, 0}, none{0, 0, 0, 0};
  CHECK(dice(a, a) == 1.0);
  CHECK(dice(a, b) == 0.5);
  CHECK(dice(none, none) == 1.0);
  CHECK(dice(a, none) == 0.0);
  CHECK(dice(std::vector<float>{1, 0}, std::vector<float>{0, 1}) == 0.0);
  CHECK_THROWS_AS(dice(a, std::vector<float>{1, 0}), UsageError);
  CHECK_THROWS_AS(dice(std::vector<float>{0.5f, 0}, std::vector<float>{1, 0}), UsageError);
}

TEST_CASE("dice matches voxel counting on random 8^3 masks") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> density(0.0, 0.6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_mask(512, density(rng), rng), g = random_mask(512, density(rng), rng);
    const double d = dice(p, g);
    CHECK(d == oracle::dice(p, g));
    CHECK(d == dice(g, p));
    CHECK((d >= 0 && d <= 1));
    CHECK((d == 1.0) == (p == g));
  }
}

TEST_CASE("binarize uses a strict threshold") {
  Tensor<double> p(1, {1, 1, 3});
  p.data = {0.2, 0.5, 0.9};
  CHECK(binarize(p, 0.5).data == std::vector<float>{0, 0, 1});
}

TEST_CASE("the report covers every combination with consistent aggregates") {
  const auto arch = model(4);
  const auto params = arch.init_params<float>();
  const auto data = cases(4, 3, 5);
  const EvalReport rep = evaluate(arch, params, data);
  CHECK(rep.combinations.size() == 15);
  CHECK(rep.rows.size() == 15 * 3 * 3);
  std::set<std::string> distinct(rep.combinations.begin(), rep.combinations.end());
  CHECK(distinct.size() == 15);
  for (int k = 0; k < 3; ++k) {
    double grand = 0;
    for (const auto& combo : rep.combinations) {
      double s = 0;
      int n = 0;
      for (const auto& r : rep.rows)
        if (r.combination == combo && r.task == k) s += r.dice, ++n;
      CHECK(n == 3);
      CHECK(std::abs(rep.mean_for(combo, k) - s / n) <= 1e-9);
      grand += s / n;
    }
    CHECK(std::abs(rep.average[k] - grand / 15) <= 1e-9);
  }
  const EvalReport again = evaluate(arch, params, data);
  CHECK(again.mean == rep.mean);
  CHECK_THROWS_AS(evaluate(arch, params, {}), UsageError);
}

TEST_CASE("two modalities give three combinations") {
  const auto arch = model(2);
  const EvalReport rep = evaluate(arch, arch.init_params<float>(), cases(2, 2, 1));
  CHECK(rep.combinations == std::vector<std::string>{"10", "01", "11"});
}

TEST_CASE("report rows agree with a direct prediction") {
  const auto arch = model(3);
  const auto params = arch.init_params<float>();
  const auto data = cases(3, 2, 8);
  const EvalReport rep = evaluate(arch, params, data);
  for (const auto& r : rep.rows) {
    const auto& s = *std::find_if(data.begin(), data.end(), [&](const Sample& x) { return x.case_id == r.case_id; });
    const auto prob = predict<float>(arch, params, s.modalities, AvailabilityMask::from_bits(r.combination));
    const auto hard = binarize(prob, 0.5);
    CHECK(r.dice == oracle::dice(std::vector<float>(hard.channel(r.task).begin(), hard.channel(r.task).end()),
                                 s.masks[r.task].data));
  }
}

TEST_CASE("report CSV files") {
  const auto dir = test::scratch("eval_csv");
  const auto arch = model(4);
  const EvalReport rep = evaluate(arch, arch.init_params<float>(), cases(4, 2, 3));
  rep.write_rows_csv(dir / "rows.csv");
  rep.write_aggregate_csv(dir / "aggregate.csv");
  const EvalReport back = EvalReport::read_rows_csv(dir / "rows.csv");
  CHECK(back.combinations == rep.combinations);
  CHECK(back.rows.size() == rep.rows.size());
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    CHECK(back.rows[i].dice == rep.rows[i].dice);
    CHECK(back.rows[i].task == rep.rows[i].task);
  }

  std::ifstream is(dir / "aggregate.csv");
  std::vector<std::string> lines;
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  REQUIRE(lines.size() == 17);
  CHECK(lines.front() == "combination,task_1,task_2,task_3");
  CHECK(lines.back().rfind("average,", 0) == 0);

  std::ofstream(dir / "bad.csv") << "combination,case_id,task,dice\n1111,c0,one,0.5\n";
  CHECK_THROWS_AS(EvalReport::read_rows_csv(dir / "bad.csv"), DataError);
  std::ofstream(dir / "empty.csv") << "";
  CHECK_THROWS_AS(EvalReport::read_rows_csv(dir / "empty.csv"), DataError);
  CHECK_THROWS_AS(EvalReport::read_rows_csv(dir / "missing.csv"), DataError);
}

TEST_CASE("Student-t CDF against closed forms and numerical integration") {
  const double pi = 3.14159265358979323846;
  for (double t : {-3.0, -0.5, 0.0, 0.7, 2.0, 10.0}) {
    CHECK(student_t_cdf(t, 1) == doctest::Approx(0.5 + std::atan(t) / pi).epsilon(1e-12));
    CHECK(student_t_cdf(t, 2) == doctest::Approx(0.5 + t / (2 * std::sqrt(t * t + 2))).epsilon(1e-12));
    for (double dof : {3.0, 7.5, 30.0})
      CHECK(std::abs((1 - student_t_cdf(t, dof)) - oracle::t_upper_tail(t, dof)) < 1e-8);
  }
}

TEST_CASE("paired one-tailed t-test") {
  const std::vector<double> a{0.8, 0.9, 0.7}, b{0.6, 0.8, 0.65};
  const auto r = paired_ttest_one_tailed(a, b);
  CHECK(r.n == 3);
  CHECK(std::abs(r.t - oracle::paired_t(a, b)) < 1e-12);
  CHECK(std::abs(r.p - oracle::t_upper_tail(oracle::paired_t(a, b), 2)) < 1e-9);
  CHECK(r.t == doctest::Approx(std::sqrt(7.0)).epsilon(1e-12));  // d = (.2, .1, .05)
  // scipy.stats.ttest_rel(a, b, alternative="greater")
  CHECK(std::abs(r.t - 2.645751311064588) < 1e-12);
  CHECK(std::abs(r.p - 0.05904144815590166) < 1e-12);

  const auto swapped = paired_ttest_one_tailed(b, a);
  CHECK(swapped.t == doctest::Approx(-r.t));
  CHECK(swapped.p == doctest::Approx(1 - r.p));

  CHECK_THROWS_AS(paired_ttest_one_tailed(a, a), NumericalError);
  std::vector<double> shifted(b);
  for (auto& v : shifted) v += 0.1;
  CHECK_THROWS_AS(paired_ttest_one_tailed(shifted, b), NumericalError);
  CHECK_THROWS_AS(paired_ttest_one_tailed(std::vector<double>{1, 2}, std::vector<double>{1}), UsageError);
  CHECK_THROWS_AS(paired_ttest_one_tailed(std::vector<double>{1}, std::vector<double>{0}), UsageError);
}

TEST_CASE("teacher percentages") {
  auto record = [](std::vector<int> unique) {
    ElectionRecord r;
    r.chosen.unique = std::move(unique);
    return r;
  };
  std::vector<ElectionRecord> constant(4, record({2}));
  CHECK(teacher_percentages(constant, 4) == std::vector<double>{0, 0, 1, 0});
  std::vector<ElectionRecord> alternating;
  for (int i = 0; i < 10; ++i) alternating.push_back(i % 2 ? record({2, 0}) : record({2}));
  const auto pct = teacher_percentages(alternating, 4);
  CHECK(pct[2] == 1.0);
  CHECK(pct[0] == 0.5);
  CHECK(pct[1] == 0.0);
  CHECK(pct[3] == 0.0);
  CHECK_THROWS_AS(teacher_percentages({}, 4), UsageError);
}
