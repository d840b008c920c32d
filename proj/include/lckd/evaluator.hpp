#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lckd/availability.hpp"
#include "lckd/backbone.hpp"
#include "lckd/dataset.hpp"
#include "lckd/teachers.hpp"

namespace lckd {

/// Hard Dice 2|P∩G| / (|P| + |G|); 1.0 when both are empty. Inputs must be
/// binary (0/1) and equally sized.
double dice(std::span<const float> prediction, std::span<const float> truth);

template <class T>
Tensor<float> binarize(const Tensor<T>& probabilities, double threshold);

struct DiceRow {
  std::string combination;  // availability bit-string, '1' = available
  std::string case_id;
  int task = 0;  // 0-based
  double dice = 0;
};

/// Per-case Dice for every availability combination plus Table-style
/// aggregates. The t-test pairs per-case scores within one combination.
struct EvalReport {
  int n_modalities = 0;
  int n_tasks = 0;
  std::vector<std::string> combinations;
  std::vector<DiceRow> rows;
  std::vector<std::vector<double>> mean;  // [combination][task]
  std::vector<double> average;            // [task], unweighted mean over combinations

  /// Rebuilds `mean` and `average` from `rows`.
  void aggregate();
  [[nodiscard]] double mean_for(const std::string& combination, int task) const;

  void write_rows_csv(const std::filesystem::path& path) const;
  void write_aggregate_csv(const std::filesystem::path& path) const;
  /// Reads a per-case CSV and re-aggregates. Throws DataError on bad input.
  static EvalReport read_rows_csv(const std::filesystem::path& path);
};

/// Dice[mask][case][task] with the model run under each availability mask.
/// Each case is encoded once; parallel over cases.
std::vector<std::vector<std::vector<double>>> dice_under_masks(
    const Architecture& arch, const ModelParams<float>& params, const std::vector<Sample>& cases,
    const std::vector<AvailabilityMask>& masks, double threshold = 0.5);

/// Runs all 2^N - 1 availability combinations.
EvalReport evaluate(const Architecture& arch, const ModelParams<float>& params,
                    const std::vector<Sample>& cases, double threshold = 0.5);

struct TTestResult {
  double t = 0;
  double p = 0;
  int n = 0;
};

/// Paired t-test on d = a - b with n - 1 degrees of freedom; p is one-tailed
/// for mean(d) > 0. Throws UsageError on length mismatch or n < 2 and
/// NumericalError when the differences have zero variance.
TTestResult paired_ttest_one_tailed(std::span<const double> a, std::span<const double> b);

/// Student-t CDF via the regularized incomplete beta function.
double student_t_cdf(double t, double dof);

/// Fraction of elections whose teacher set contains each modality.
std::vector<double> teacher_percentages(const std::vector<ElectionRecord>& log, int n_modalities);

}  // namespace lckd
