#include "lckd/losses.hpp"

#include <cmath>

#include "lckd/errors.hpp"

namespace lckd {

void LossConfig::validate() const {
  require(alpha >= 0 && std::isfinite(alpha), "alpha must be a finite non-negative number");
  require(p_norm == 1 || p_norm == 2, "p_norm must be 1 or 2");
  require(!squared_l2 || p_norm == 2, "squared_l2 requires p_norm = 2");
  require(dice_smooth > 0, "dice_smooth must be positive");
  require(task_ce_weight >= 0 && task_dice_weight >= 0, "task loss weights must be non-negative");
}

std::string to_string(CkdReduction r) { return r == CkdReduction::sum ? "sum" : "mean"; }

CkdReduction parse_ckd_reduction(const std::string& text) {
  if (text == "sum") return CkdReduction::sum;
  if (text == "mean") return CkdReduction::mean;
  throw UsageError("ckd reduction must be 'sum' or 'mean', got '" + text + "'");
}

template <class T>
double ckd_loss(const FeatureBundle<T>& features, const TeacherSet& teachers,
                const AvailabilityMask& mask, const LossConfig& config,
                std::vector<std::optional<Tensor<T>>>* grads, double grad_scale) {
  require(!teachers.unique.empty(), "distillation needs a non-empty teacher set");
  require(mask.modalities() == features.modalities(), "mask and feature bundle disagree on N");
  const auto avail = mask.available_indices();
  for (int j : avail)
    require(features.bottleneck[j].has_value(), "available modality has no bottleneck feature");
  if (grads) grads->resize(features.modalities());

  double total = 0;
  for (int i : teachers.unique) {
    require(i >= 0 && i < features.modalities(), "teacher index out of range");
    if (mask.missing(i)) continue;
    const Tensor<T>& fi = *features.bottleneck[i];
    const double scale = config.reduction == CkdReduction::mean ? 1.0 / static_cast<double>(fi.size()) : 1.0;
    for (int j : avail) {
      if (j == i) continue;
      const Tensor<T>& fj = *features.bottleneck[j];
      require(fi.same_shape(fj), "bottleneck shapes differ across modalities");
      double acc = 0;
      for (std::size_t e = 0; e < fi.size(); ++e) {
        const double d = static_cast<double>(fi.data[e]) - fj.data[e];
        acc += config.p_norm == 1 ? std::abs(d) : d * d;
      }
      double pair = acc;
      if (config.p_norm == 2 && !config.squared_l2) pair = std::sqrt(acc);
      total += scale * pair;

      if (!grads) continue;
      auto slot = [&](int m) -> Tensor<T>& {
        auto& g = (*grads)[m];
        if (!g) g = Tensor<T>(fi.channels, fi.extent);
        return *g;
      };
      Tensor<T>& gj = slot(j);
      Tensor<T>* gi = config.detach_teacher ? nullptr : &slot(i);
      for (std::size_t e = 0; e < fi.size(); ++e) {
        const double d = static_cast<double>(fi.data[e]) - fj.data[e];
        double dd;
        if (config.p_norm == 1) {
          dd = (d > 0) - (d < 0);
        } else if (config.squared_l2) {
          dd = 2 * d;
        } else {
          dd = pair > 0 ? d / pair : 0.0;
        }
        const T v = static_cast<T>(grad_scale * scale * dd);
        gj.data[e] -= v;
        if (gi) gi->data[e] += v;
      }
    }
  }
  return total;
}

namespace {

template <class T>
void check_task_shapes(const Tensor<T>& pred, const Tensor<T>& target) {
  require(pred.same_shape(target), "prediction and target shapes differ");
  require(pred.channels >= 1 && pred.size() > 0, "empty prediction");
}

}  // namespace

template <class T>
double task_loss(const Tensor<T>& prediction, const Tensor<T>& target, const LossConfig& config) {
  check_task_shapes(prediction, target);
  const std::size_t v = prediction.plane();
  const int k = prediction.channels;
  double bce = 0, dice_loss = 0;
  for (int c = 0; c < k; ++c) {
    auto p = prediction.channel(c);
    auto y = target.channel(c);
    double inter = 0, sp = 0, sy = 0;
    for (std::size_t i = 0; i < v; ++i) {
      const double pi = p[i];
      require(pi > 0 && pi < 1, "prediction values must lie strictly inside (0, 1)");
      bce -= y[i] * std::log(pi) + (1 - y[i]) * std::log1p(-pi);
      inter += pi * y[i];
      sp += pi;
      sy += y[i];
    }
    dice_loss += 1 - (2 * inter + config.dice_smooth) / (sp + sy + config.dice_smooth);
  }
  return config.task_ce_weight * bce / (static_cast<double>(k) * v) +
         config.task_dice_weight * dice_loss / k;
}

template <class T>
double task_loss_from_logits(const Tensor<T>& logits, const Tensor<T>& target,
                             const LossConfig& config, Tensor<T>* grad_logits, double grad_scale) {
  check_task_shapes(logits, target);
  if (grad_logits && !grad_logits->same_shape(logits)) *grad_logits = Tensor<T>(logits.channels, logits.extent);
  const std::size_t v = logits.plane();
  const int k = logits.channels;
  const double ce_norm = 1.0 / (static_cast<double>(k) * v);
  double bce = 0, dice_loss = 0;
  std::vector<double> prob(v);
  for (int c = 0; c < k; ++c) {
    auto z = logits.channel(c);
    auto y = target.channel(c);
    double inter = 0, sp = 0, sy = 0;
    for (std::size_t i = 0; i < v; ++i) {
      const double zi = z[i];
      bce += std::max(zi, 0.0) + std::log1p(std::exp(-std::abs(zi))) - y[i] * zi;
      prob[i] = 1.0 / (1.0 + std::exp(-zi));
      inter += prob[i] * y[i];
      sp += prob[i];
      sy += y[i];
    }
    const double num = 2 * inter + config.dice_smooth;
    const double den = sp + sy + config.dice_smooth;
    dice_loss += 1 - num / den;
    if (!grad_logits) continue;
    auto g = grad_logits->channel(c);
    for (std::size_t i = 0; i < v; ++i) {
      const double d_ce = config.task_ce_weight * ce_norm * (prob[i] - y[i]);
      const double d_dice_dp = -(2 * y[i] * den - num) / (den * den) * config.task_dice_weight / k;
      g[i] += static_cast<T>(grad_scale * (d_ce + d_dice_dp * prob[i] * (1 - prob[i])));
    }
  }
  return config.task_ce_weight * bce * ce_norm + config.task_dice_weight * dice_loss / k;
}

double total_loss(double task, double ckd, double alpha) {
  if (!std::isfinite(task) || !std::isfinite(ckd) || !std::isfinite(alpha))
    throw NumericalError("non-finite loss component (task=" + std::to_string(task) +
                         ", ckd=" + std::to_string(ckd) + ")");
  return task + alpha * ckd;
}

#define LCKD_INSTANTIATE(T)                                                                        \
  template double ckd_loss(const FeatureBundle<T>&, const TeacherSet&, const AvailabilityMask&,   \
                           const LossConfig&, std::vector<std::optional<Tensor<T>>>*, double);    \
  template double task_loss(const Tensor<T>&, const Tensor<T>&, const LossConfig&);               \
  template double task_loss_from_logits(const Tensor<T>&, const Tensor<T>&, const LossConfig&,    \
                                        Tensor<T>*, double);

LCKD_INSTANTIATE(float)
LCKD_INSTANTIATE(double)

}  // namespace lckd
