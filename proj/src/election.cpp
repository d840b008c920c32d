#include "lckd/election.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "lckd/errors.hpp"
#include "lckd/evaluator.hpp"

namespace lckd {

using nlohmann::json;

std::vector<double> validate_single_modality(const Architecture& arch, const ModelParams<float>& params,
                                             const std::vector<Sample>& validation, int modality) {
  require(!validation.empty(), "teacher election needs a non-empty validation set");
  const auto mask = AvailabilityMask::only(arch.config().n_modalities, modality);
  const auto scores = dice_under_masks(arch, params, validation, {mask});
  std::vector<double> mean(arch.config().n_tasks, 0.0);
  for (const auto& per_case : scores.front())
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += per_case[k];
  for (auto& m : mean) m /= static_cast<double>(validation.size());
  return mean;
}

std::vector<std::vector<double>> single_modality_dice(const Architecture& arch,
                                                      const ModelParams<float>& params,
                                                      const std::vector<Sample>& validation) {
  require(!validation.empty(), "teacher election needs a non-empty validation set");
  const int n = arch.config().n_modalities;
  std::vector<AvailabilityMask> masks;
  for (int i = 0; i < n; ++i) masks.push_back(AvailabilityMask::only(n, i));
  const auto scores = dice_under_masks(arch, params, validation, masks);
  std::vector<std::vector<double>> matrix(n, std::vector<double>(arch.config().n_tasks, 0.0));
  for (int i = 0; i < n; ++i) {
    for (const auto& per_case : scores[i])
      for (std::size_t k = 0; k < per_case.size(); ++k) matrix[i][k] += per_case[k];
    for (auto& v : matrix[i]) v /= static_cast<double>(validation.size());
  }
  return matrix;
}

TeacherSet elect(const std::vector<std::vector<double>>& dice_matrix, TeacherMode mode,
                 std::int64_t iteration) {
  require(!dice_matrix.empty() && !dice_matrix.front().empty(), "dice matrix is empty");
  const std::size_t n = dice_matrix.size(), k = dice_matrix.front().size();
  for (const auto& row : dice_matrix) {
    require(row.size() == k, "dice matrix rows differ in length");
    for (double v : row) require(std::isfinite(v) && v >= 0 && v <= 1, "dice matrix entries must be in [0, 1]");
  }
  TeacherSet ts;
  ts.mode = mode;
  ts.elected_at = iteration;
  for (std::size_t task = 0; task < k; ++task) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (dice_matrix[i][task] > dice_matrix[best][task]) best = i;
    ts.per_task.push_back(static_cast<int>(best));
  }
  if (mode == TeacherMode::multi) {
    for (int t : ts.per_task)
      if (!ts.contains(t)) ts.unique.push_back(t);
    return ts;
  }
  auto row_mean = [&](std::size_t i) {
    double s = 0;
    for (double v : dice_matrix[i]) s += v;
    return s / static_cast<double>(k);
  };
  int best = -1;
  long best_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long count = std::count(ts.per_task.begin(), ts.per_task.end(), static_cast<int>(i));
    if (count == 0) continue;
    if (best < 0 || count > best_count || (count == best_count && row_mean(i) > row_mean(best))) {
      best = static_cast<int>(i);
      best_count = count;
    }
  }
  ts.unique = {best};
  return ts;
}

bool election_due(std::int64_t iteration, std::int64_t interval) {
  require(interval >= 1, "election interval must be >= 1");
  return iteration % interval == 0;
}

ElectionRecord run_election(const Architecture& arch, const ModelParams<float>& params,
                            const std::vector<Sample>& validation, TeacherMode mode,
                            std::int64_t iteration) {
  ElectionRecord rec;
  rec.dice = single_modality_dice(arch, params, validation);
  rec.chosen = elect(rec.dice, mode, iteration);
  rec.iteration = iteration;
  return rec;
}

namespace {

std::vector<int> one_based(const std::vector<int>& v) {
  std::vector<int> out(v);
  for (auto& x : out) ++x;
  return out;
}

std::vector<int> zero_based(std::vector<int> v) {
  for (auto& x : v) --x;
  return v;
}

}  // namespace

std::string to_json_line(const ElectionRecord& r) {
  json j;
  j["iteration"] = r.iteration;
  j["mode"] = to_string(r.chosen.mode);
  j["dice"] = r.dice;
  j["per_task"] = one_based(r.chosen.per_task);
  j["unique"] = one_based(r.chosen.unique);
  return j.dump();
}

ElectionRecord parse_election_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    ElectionRecord r;
    r.iteration = j.at("iteration").get<std::int64_t>();
    r.dice = j.at("dice").get<std::vector<std::vector<double>>>();
    r.chosen.mode = parse_teacher_mode(j.at("mode").get<std::string>());
    r.chosen.per_task = zero_based(j.at("per_task").get<std::vector<int>>());
    r.chosen.unique = zero_based(j.at("unique").get<std::vector<int>>());
    r.chosen.elected_at = r.iteration;
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed election record: ") + e.what());
  }
}

void append_election(const std::filesystem::path& log, const ElectionRecord& record) {
  std::ofstream os(log, std::ios::app);
  if (!os) throw DataError("cannot append to " + log.string());
  os << to_json_line(record) << '\n';
}

std::vector<ElectionRecord> read_election_log(const std::filesystem::path& log) {
  std::ifstream is(log);
  if (!is) throw DataError("missing election log: " + log.string());
  std::vector<ElectionRecord> out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(parse_election_line(line));
  return out;
}

}  // namespace lckd
