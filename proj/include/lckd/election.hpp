#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lckd/backbone.hpp"
#include "lckd/dataset.hpp"
#include "lckd/teachers.hpp"

namespace lckd {

/// Mean hard Dice per task over `validation` with only `modality` present
/// (the other slots are mean-filled from it).
std::vector<double> validate_single_modality(const Architecture& arch, const ModelParams<float>& params,
                                             const std::vector<Sample>& validation, int modality);

/// [modality][task] matrix of validate_single_modality for every modality.
std::vector<std::vector<double>> single_modality_dice(const Architecture& arch,
                                                      const ModelParams<float>& params,
                                                      const std::vector<Sample>& validation);

/// Per-task argmax (ties -> lowest modality). Multi mode keeps the distinct
/// winners in order of first appearance; single mode keeps the most frequent
/// winner (ties -> highest mean Dice across tasks, then lowest index).
TeacherSet elect(const std::vector<std::vector<double>>& dice_matrix, TeacherMode mode,
                 std::int64_t iteration = 0);

/// True iff iteration % interval == 0.
bool election_due(std::int64_t iteration, std::int64_t interval);

ElectionRecord run_election(const Architecture& arch, const ModelParams<float>& params,
                            const std::vector<Sample>& validation, TeacherMode mode,
                            std::int64_t iteration);

/// One JSON object per line; modality indices are written 1-based.
std::string to_json_line(const ElectionRecord& record);
ElectionRecord parse_election_line(const std::string& line);
void append_election(const std::filesystem::path& log, const ElectionRecord& record);
std::vector<ElectionRecord> read_election_log(const std::filesystem::path& log);

}  // namespace lckd
