#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lckd {

enum class TeacherMode { multi, single };

[[nodiscard]] std::string to_string(TeacherMode mode);
[[nodiscard]] TeacherMode parse_teacher_mode(const std::string& text);

/// Elected teachers. Indices are 0-based modalities.
struct TeacherSet {
  std::vector<int> per_task;  // task k -> teacher modality
  std::vector<int> unique;    // distillation teachers, order of first appearance
  TeacherMode mode = TeacherMode::multi;
  std::int64_t elected_at = 0;

  [[nodiscard]] bool contains(int modality) const;
  friend bool operator==(const TeacherSet&, const TeacherSet&) = default;
};

/// One teacher election: single-modality validation Dice and the outcome.
struct ElectionRecord {
  std::vector<std::vector<double>> dice;  // [modality][task], entries in [0, 1]
  TeacherSet chosen;
  std::int64_t iteration = 0;

  friend bool operator==(const ElectionRecord&, const ElectionRecord&) = default;
};

}  // namespace lckd
