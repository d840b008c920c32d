#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lckd/availability.hpp"
#include "lckd/backbone.hpp"
#include "lckd/dataset.hpp"
#include "lckd/losses.hpp"
#include "lckd/teachers.hpp"

namespace lckd {

struct TrainConfig {
  std::int64_t iterations = 3000;
  int batch_size = 2;
  double lr_init = 1e-2;
  double lr_min = 0.0;
  double momentum = 0.99;
  std::int64_t election_interval = 200;
  bool elect_at_end = false;  // extra election on the final parameters
  LossConfig loss;
  TeacherMode teacher_mode = TeacherMode::multi;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_interval = 0;  // 0: final checkpoint only
  bool per_sample_masks = false;
  double validation_fraction = 0.2;
  int base_channels = 8;
  int depth = 3;

  void validate() const;
};

/// Cosine annealing from lr_init (iteration 0) to lr_min (iteration == iterations).
double lr_at(std::int64_t iteration, const TrainConfig& config);

/// Point at which the Nesterov gradient is taken: theta - lr * mu * v.
template <class T>
void nesterov_lookahead(std::span<const T> theta, std::span<const T> velocity, double lr, double momentum,
                        std::span<T> out);

/// v <- mu * v + g(lookahead); theta <- theta - lr * v.
template <class T>
void nesterov_update(std::span<T> theta, std::span<T> velocity, std::span<const T> grad, double lr,
                     double momentum);

struct TrainState {
  ModelParams<float> params;
  ModelParams<float> velocity;
  std::int64_t iteration = 0;
  TeacherSet teachers;
  bool has_teachers = false;
  std::mt19937_64 batch_rng;
  std::mt19937_64 drop_rng;
};

struct LossRecord {
  std::int64_t iteration = 0;
  double task = 0;
  double ckd = 0;
  double total = 0;
  double lr = 0;
  int n_missing = 0;
  std::string mask;  // bit-string of the first sample's mask
  std::vector<int> teachers;
};

/// Owns the model, the split data and the optimizer state for one run.
class Trainer {
 public:
  Trainer(TrainConfig config, ModelConfig model, std::vector<Sample> train, std::vector<Sample> validation);

  [[nodiscard]] const Architecture& arch() const { return arch_; }
  [[nodiscard]] const TrainConfig& config() const { return config_; }
  [[nodiscard]] const TrainState& state() const { return state_; }
  [[nodiscard]] const std::vector<Sample>& validation() const { return validation_; }

  /// Runs an election on the validation split and installs its teachers.
  ElectionRecord elect_now();

  /// One optimization step on an explicit batch and availability masks (one
  /// per sample). Requires teachers. Throws NumericalError on a non-finite
  /// loss or parameter.
  LossRecord step_on(std::span<const Sample* const> batch, std::span<const AvailabilityMask> masks);

  /// Election if due, then a step on a sampled batch with sampled masks.
  LossRecord step(const std::function<void(const ElectionRecord&)>& on_election = {});

  /// Steps until config.iterations, then the optional final election.
  void run(const std::function<void(const LossRecord&)>& on_loss,
           const std::function<void(const ElectionRecord&)>& on_election,
           const std::function<void(std::int64_t)>& on_checkpoint = {});

 private:
  TrainConfig config_;
  Architecture arch_;
  std::vector<Sample> train_;
  std::vector<Sample> validation_;
  TrainState state_;
};

struct RunSummary {
  std::filesystem::path dir;
  std::int64_t iterations = 0;
  std::vector<ElectionRecord> elections;
  TeacherSet final_teachers;
  double seconds = 0;
};

/// Trains on `manifest` and writes config.snapshot, losses.csv, elections.log,
/// ckpt_<iter>.bin, ckpt_final.bin and run_manifest.json into `out_dir`.
RunSummary run_training(const TrainConfig& config, const Manifest& manifest,
                        const std::filesystem::path& out_dir);

/// Flat INI text with [train], [loss] and [model] sections.
std::string to_ini(const TrainConfig& config);
/// Applies keys from an INI file on top of `base`. Unknown keys are errors.
TrainConfig apply_ini(const std::filesystem::path& path, TrainConfig base = {});
TrainConfig apply_ini_text(const std::string& text, TrainConfig base = {});

std::string losses_csv_header();
std::string to_csv_row(const LossRecord& record);

}  // namespace lckd
