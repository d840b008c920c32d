#include "lckd/evaluator.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "lckd/errors.hpp"

namespace lckd {

double dice(std::span<const float> prediction, std::span<const float> truth) {
  require(prediction.size() == truth.size(), "dice: shape mismatch");
  std::size_t inter = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const float p = prediction[i], g = truth[i];
    require((p == 0.0f || p == 1.0f) && (g == 0.0f || g == 1.0f), "dice: inputs must be binary");
    np += p == 1.0f;
    ng += g == 1.0f;
    inter += p == 1.0f && g == 1.0f;
  }
  if (np + ng == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

template <class T>
Tensor<float> binarize(const Tensor<T>& probabilities, double threshold) {
  Tensor<float> out(probabilities.channels, probabilities.extent);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = probabilities.data[i] > threshold ? 1.0f : 0.0f;
  return out;
}

template Tensor<float> binarize(const Tensor<float>&, double);
template Tensor<float> binarize(const Tensor<double>&, double);

void EvalReport::aggregate() {
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < combinations.size(); ++c) index[combinations[c]] = c;
  mean.assign(combinations.size(), std::vector<double>(n_tasks, 0.0));
  std::vector<std::vector<int>> count(combinations.size(), std::vector<int>(n_tasks, 0));
  for (const auto& r : rows) {
    auto it = index.find(r.combination);
    require(it != index.end(), "row references unknown combination " + r.combination);
    require(r.task >= 0 && r.task < n_tasks, "row task index out of range");
    mean[it->second][r.task] += r.dice;
    count[it->second][r.task] += 1;
  }
  average.assign(n_tasks, 0.0);
  for (std::size_t c = 0; c < combinations.size(); ++c)
    for (int k = 0; k < n_tasks; ++k) {
      if (count[c][k] > 0) mean[c][k] /= count[c][k];
      average[k] += mean[c][k] / static_cast<double>(combinations.size());
    }
}

double EvalReport::mean_for(const std::string& combination, int task) const {
  for (std::size_t c = 0; c < combinations.size(); ++c)
    if (combinations[c] == combination) return mean.at(c).at(task);
  throw UsageError("report has no combination " + combination);
}

void EvalReport::write_rows_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "# paired statistics pair per-case scores within one combination\n";
  os << "combination,case_id,task,dice\n";
  os << std::setprecision(17);
  for (const auto& r : rows) os << r.combination << ',' << r.case_id << ',' << r.task + 1 << ',' << r.dice << '\n';
}

void EvalReport::write_aggregate_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "combination";
  for (int k = 1; k <= n_tasks; ++k) os << ",task_" << k;
  os << '\n' << std::setprecision(17);
  for (std::size_t c = 0; c < combinations.size(); ++c) {
    os << combinations[c];
    for (double v : mean[c]) os << ',' << v;
    os << '\n';
  }
  os << "average";
  for (double v : average) os << ',' << v;
  os << '\n';
}

EvalReport EvalReport::read_rows_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("missing report: " + path.string());
  EvalReport rep;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "combination,case_id,task,dice") throw DataError("unexpected report header in " + path.string());
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string combo, id, task, value;
    if (!std::getline(ss, combo, ',') || !std::getline(ss, id, ',') || !std::getline(ss, task, ',') ||
        !std::getline(ss, value))
      throw DataError("malformed report row: " + line);
    DiceRow r;
    try {
      r = {combo, id, std::stoi(task) - 1, std::stod(value)};
    } catch (const std::exception&) {
      throw DataError("malformed report row: " + line);
    }
    if (std::find(rep.combinations.begin(), rep.combinations.end(), combo) == rep.combinations.end())
      rep.combinations.push_back(combo);
    rep.n_modalities = static_cast<int>(combo.size());
    rep.n_tasks = std::max(rep.n_tasks, r.task + 1);
    rep.rows.push_back(std::move(r));
  }
  if (!header || rep.rows.empty()) throw DataError("report has no rows: " + path.string());
  rep.aggregate();
  return rep;
}

std::vector<std::vector<std::vector<double>>> dice_under_masks(
    const Architecture& arch, const ModelParams<float>& params, const std::vector<Sample>& cases,
    const std::vector<AvailabilityMask>& masks, double threshold) {
  require(!cases.empty(), "evaluation needs at least one case");
  require(threshold > 0 && threshold < 1, "threshold must be in (0, 1)");
  const int n_cases = static_cast<int>(cases.size());
  const int n_tasks = arch.config().n_tasks;
  std::vector<std::vector<std::vector<double>>> out(
      masks.size(), std::vector<std::vector<double>>(n_cases, std::vector<double>(n_tasks, 0.0)));
  const auto full = AvailabilityMask::all_available(arch.config().n_modalities);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < n_cases; ++c) {
    try {
      const auto& sample = cases[c];
      require(static_cast<int>(sample.masks.size()) == n_tasks, "case task count differs from model");
      const FeatureBundle<float> encoded = encode<float>(arch, params, sample.modalities, full);
      for (std::size_t m = 0; m < masks.size(); ++m) {
        FeatureBundle<float> bundle = encoded;
        for (int i : masks[m].missing_indices()) {
          bundle.bottleneck[i].reset();
          for (auto& stage : bundle.skips) stage[i].reset();
        }
        const Tensor<float> pred =
            binarize(decode(arch, params, generate_missing(std::move(bundle), masks[m])), threshold);
        for (int k = 0; k < n_tasks; ++k) out[m][c][k] = dice(pred.channel(k), sample.masks[k].data);
      }
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

EvalReport evaluate(const Architecture& arch, const ModelParams<float>& params,
                    const std::vector<Sample>& cases, double threshold) {
  const int n = arch.config().n_modalities;
  const auto masks = AvailabilityMask::all_combinations(n);
  const auto scores = dice_under_masks(arch, params, cases, masks, threshold);
  EvalReport rep;
  rep.n_modalities = n;
  rep.n_tasks = arch.config().n_tasks;
  for (std::size_t m = 0; m < masks.size(); ++m) {
    rep.combinations.push_back(masks[m].bits());
    for (std::size_t c = 0; c < cases.size(); ++c)
      for (int k = 0; k < rep.n_tasks; ++k)
        rep.rows.push_back({masks[m].bits(), cases[c].case_id, k, scores[m][c][k]});
  }
  rep.aggregate();
  return rep;
}

double student_t_cdf(double t, double dof) {
  require(dof > 0, "degrees of freedom must be positive");
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * boost::math::ibeta(dof / 2, 0.5, x);
  return t >= 0 ? 1.0 - tail : tail;
}

TTestResult paired_ttest_one_tailed(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "paired t-test: length mismatch");
  require(a.size() >= 2, "paired t-test: need at least two pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0, scale = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    ss += (d - mean) * (d - mean);
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  const double sd = std::sqrt(ss / (n - 1));
  // Differences equal up to rounding (e.g. a = b + c) count as degenerate.
  if (!(sd > 1e-12 * std::max(1.0, scale)))
    throw NumericalError("paired t-test: differences have zero variance");
  TTestResult r;
  r.n = static_cast<int>(a.size());
  r.t = mean / (sd / std::sqrt(n));
  r.p = student_t_cdf(-r.t, n - 1);  // upper tail, by symmetry
  return r;
}

std::vector<double> teacher_percentages(const std::vector<ElectionRecord>& log, int n_modalities) {
  require(!log.empty(), "teacher percentages need at least one election record");
  std::vector<double> frac(n_modalities, 0.0);
  for (const auto& rec : log)
    for (int i = 0; i < n_modalities; ++i)
      if (rec.chosen.contains(i)) frac[i] += 1.0;
  for (auto& f : frac) f /= static_cast<double>(log.size());
  return frac;
}

}  // namespace lckd
