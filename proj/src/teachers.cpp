#include "lckd/teachers.hpp"

#include <algorithm>

#include "lckd/errors.hpp"

namespace lckd {

std::string to_string(TeacherMode mode) { return mode == TeacherMode::multi ? "multi" : "single"; }

TeacherMode parse_teacher_mode(const std::string& text) {
  if (text == "multi") return TeacherMode::multi;
  if (text == "single") return TeacherMode::single;
  throw UsageError("teacher mode must be 'multi' or 'single', got '" + text + "'");
}

bool TeacherSet::contains(int modality) const {
  return std::find(unique.begin(), unique.end(), modality) != unique.end();
}

}  // namespace lckd
