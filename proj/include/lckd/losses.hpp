#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lckd/availability.hpp"
#include "lckd/teachers.hpp"
#include "lckd/tensor.hpp"

namespace lckd {

/// How each teacher/student distance is reduced over bottleneck elements.
enum class CkdReduction {
  sum,   // ||f_i - f_j||_p over all elements, exactly as the pairwise objective is written
  mean,  // the same divided by the element count (what an elementwise-mean L1 loss computes)
};

struct LossConfig {
  double alpha = 0.1;
  int p_norm = 1;
  bool squared_l2 = false;  // p = 2 only: use sum of squares instead of the norm
  CkdReduction reduction = CkdReduction::sum;
  bool detach_teacher = false;
  double task_ce_weight = 1.0;
  double task_dice_weight = 1.0;
  double dice_smooth = 1e-5;

  void validate() const;
};

[[nodiscard]] std::string to_string(CkdReduction r);
[[nodiscard]] CkdReduction parse_ckd_reduction(const std::string& text);

/// Pairwise cross-modal distillation over bottleneck features:
///   sum_{i in T, i not missing} sum_{j not missing, j != i} ||f_i - f_j||_p
/// Teachers are also students of each other. Returns 0 when no teacher is
/// available. When `grads` is given, grad_scale * dL/df_j is accumulated into
/// (*grads)[j] for every available j; with detach_teacher the teacher side of
/// each pair receives nothing. Throws UsageError for an empty teacher set.
template <class T>
double ckd_loss(const FeatureBundle<T>& features, const TeacherSet& teachers,
                const AvailabilityMask& mask, const LossConfig& config,
                std::vector<std::optional<Tensor<T>>>* grads = nullptr, double grad_scale = 1.0);

/// ce_weight * mean binary cross-entropy + dice_weight * mean_k (1 - soft Dice_k)
/// with soft Dice = (2 sum p y + s) / (sum p + sum y + s). `prediction` must lie
/// strictly inside (0, 1).
template <class T>
double task_loss(const Tensor<T>& prediction, const Tensor<T>& target, const LossConfig& config);

/// task_loss evaluated on logits (numerically stable), optionally
/// accumulating grad_scale * dL/dlogits into `grad_logits`.
template <class T>
double task_loss_from_logits(const Tensor<T>& logits, const Tensor<T>& target,
                             const LossConfig& config, Tensor<T>* grad_logits = nullptr,
                             double grad_scale = 1.0);

/// task + alpha * ckd. Throws NumericalError on non-finite input.
double total_loss(double task, double ckd, double alpha);

}  // namespace lckd
