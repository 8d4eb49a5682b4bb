#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "monfap/sample.hpp"
#include "monfap/tensor.hpp"

namespace monfap {

// Benchmark report. Metrics that cannot be computed (single-class AUC, no
// manipulated samples for the localization pair) stay empty and serialize as
// "absent".
struct MetricsReport {
  std::optional<double> acc, auc, f1_f, iou_f;
  std::optional<double> loss_total, loss_img, loss_pix, loss_aux, loss_mone;

  std::string serialize() const;  // line-delimited key=value
};

// Rank-based (Mann-Whitney) AUC; ties count one half. Empty when scores
// contain a single class.
std::optional<double> auc_rank(const std::vector<double>& scores,
                               const std::vector<int>& labels);

// Argmax accuracy over two-class logits (ties resolve to class 0).
double accuracy(const std::vector<std::array<double, 2>>& logits,
                const std::vector<int>& labels);

// Softmax probability of the fake class.
double fake_probability(const std::array<double, 2>& logits);

// Bilinear 4x upsample of the mask logits [2,h,w] to [2,4h,4w] followed by
// channel argmax; 1 marks predicted-fake pixels (ties resolve to real).
std::vector<std::uint8_t> predict_mask_full(const Tensor& m);

// F1 and IoU of the fake class over manipulated samples only. Micro pools
// pixel counts across samples; macro averages per-sample scores.
struct LocalizationScores {
  double f1 = 0, iou = 0;
};
std::optional<LocalizationScores> localization_metrics(
    const std::vector<std::vector<std::uint8_t>>& pred_masks,
    const std::vector<const Sample*>& batch, bool macro = false);

// ACC plus AUC on the fake probability.
struct DetectionScores {
  double acc = 0;
  std::optional<double> auc;
};
DetectionScores detection_metrics(const std::vector<std::array<double, 2>>& logits,
                                  const std::vector<int>& labels);

}  // namespace monfap
