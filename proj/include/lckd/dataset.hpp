#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lckd/tensor.hpp"

namespace lckd {

namespace fs = std::filesystem;

struct DatasetSpec {
  int n_modalities = 4;
  int n_tasks = 3;
  int spatial_dims = 3;
  int side = 32;
  int n_cases = 60;
  std::uint64_t seed = 0;

  void validate() const;
  [[nodiscard]] Extent extent() const { return cube(spatial_dims, side); }
};

/// Which modality shows each task's region at full contrast. Indices are 0-based.
struct InformativenessPlan {
  std::vector<int> teacher_of_task;
  double signal_contrast = 1.0;
  double distractor_contrast = 0.2;
  double noise_sigma = 0.1;

  void validate(int n_modalities, int n_tasks) const;
  /// +1 or -1 per task. Tasks sharing a planted modality alternate in sign so
  /// that the planted modality alone separates them.
  [[nodiscard]] std::vector<int> task_signs() const;
};

struct Sample {
  std::vector<Tensor<float>> modalities;  // N single-channel fields
  std::vector<Tensor<float>> masks;       // K single-channel {0,1} fields
  std::string case_id;

  [[nodiscard]] Tensor<float> target() const;  // masks stacked into K channels
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// A generated case plus the per-modality standardization that was applied:
/// stored = (raw - offset) / scale.
struct SyntheticCase {
  Sample sample;
  std::vector<double> offset;
  std::vector<double> scale;
};

/// Pure function of (spec, plan, index). Each task gets 1-3 axis-aligned
/// ellipsoids with radii 10-30% of the side; regions of different tasks never
/// overlap. Modalities are standardized to zero mean and unit variance (a
/// constant modality is only centred).
[[nodiscard]] SyntheticCase synthesize_case(const DatasetSpec& spec, const InformativenessPlan& plan,
                                            int index);

[[nodiscard]] std::string case_name(int index);

struct Manifest {
  fs::path root;
  int n_modalities = 0;
  int n_tasks = 0;
  int dims = 0;
  int side = 0;
  std::vector<std::string> cases;
  std::uint64_t seed = 0;

  [[nodiscard]] Extent extent() const { return cube(dims, side); }
  [[nodiscard]] fs::path manifest_path() const { return root / "manifest.json"; }
  [[nodiscard]] fs::path case_dir(const std::string& id) const { return root / "cases" / id; }

  /// Throws DataError on a missing or malformed manifest.
  static Manifest load(const fs::path& dir_or_file);
  void save() const;
};

/// Writes every case plus manifest.json under `dir` and returns the manifest
/// path. Cases are synthesized in parallel.
fs::path generate(const DatasetSpec& spec, const InformativenessPlan& plan, const fs::path& dir);

void write_case(const Manifest& manifest, const Sample& sample);

/// Reads one case bit-exactly. Throws DataError for a missing file, a size that
/// disagrees with the manifest, or a mask value outside {0, 1}.
[[nodiscard]] Sample load_case(const Manifest& manifest, const std::string& case_id);

[[nodiscard]] std::vector<Sample> load_cases(const Manifest& manifest,
                                             const std::vector<std::string>& ids);

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

/// Deterministic partition; validation size is round(fraction * n), at least 1
/// and at most n - 1. Both lists keep manifest order.
[[nodiscard]] Split split(const Manifest& manifest, double validation_fraction, std::uint64_t seed);

/// SHA-256 over manifest.json and every case file, hex encoded.
[[nodiscard]] std::string fingerprint(const Manifest& manifest);

/// Raw little-endian float32 files.
void write_f32(const fs::path& path, std::span<const float> values);
[[nodiscard]] std::vector<float> read_f32(const fs::path& path);

}  // namespace lckd
