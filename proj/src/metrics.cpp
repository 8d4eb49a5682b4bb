#include "monfap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace monfap {

namespace {

std::string fmt(const std::optional<double>& v) {
  if (!v) return "absent";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", *v);
  return buf;
}

}  // namespace

std::string MetricsReport::serialize() const {
  std::string out;
  auto line = [&](const char* key, const std::optional<double>& v) {
    out += key;
    out += '=';
    out += fmt(v);
    out += '\n';
  };
  line("acc", acc);
  line("auc", auc);
  line("f1_f", f1_f);
  line("iou_f", iou_f);
  line("loss_total", loss_total);
  line("loss_img", loss_img);
  line("loss_pix", loss_pix);
  line("loss_aux", loss_aux);
  line("loss_mone", loss_mone);
  return out;
}

std::optional<double> auc_rank(const std::vector<double>& scores,
                               const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: size mismatch");
  size_t n = scores.size();
  size_t pos = 0;
  for (int l : labels) pos += l != 0;
  size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // average ranks within tie groups; rank sums of half-integers are exact
  double pos_rank_sum = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t t = i; t < j; ++t)
      if (labels[order[t]] != 0) pos_rank_sum += avg_rank;
    i = j;
  }
  double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1) / 2.0) / (p * static_cast<double>(neg));
}

double accuracy(const std::vector<std::array<double, 2>>& logits,
                const std::vector<int>& labels) {
  if (logits.empty()) throw std::invalid_argument("accuracy: empty batch");
  size_t hits = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    int pred = logits[i][1] > logits[i][0] ? 1 : 0;
    hits += pred == labels[i];
  }
  return static_cast<double>(hits) / logits.size();
}

double fake_probability(const std::array<double, 2>& logits) {
  double m = std::max(logits[0], logits[1]);
  double e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
  return e1 / (e0 + e1);
}

std::vector<std::uint8_t> predict_mask_full(const Tensor& m) {
  NoGradGuard ng;
  Tensor up = upsample_bilinear2x(upsample_bilinear2x(m));
  int n = up.dim(1) * up.dim(2);
  std::vector<std::uint8_t> out(static_cast<size_t>(n));
  const auto& v = up.value();
  for (int i = 0; i < n; ++i) out[i] = v[n + i] > v[i] ? 1 : 0;
  return out;
}

std::optional<LocalizationScores> localization_metrics(
    const std::vector<std::vector<std::uint8_t>>& pred_masks,
    const std::vector<const Sample*>& batch, bool macro) {
  if (pred_masks.size() != batch.size())
    throw std::invalid_argument("localization_metrics: size mismatch");
  std::uint64_t tp = 0, fp = 0, fn = 0;
  double f1_sum = 0, iou_sum = 0;
  size_t manipulated = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->label != 1) continue;
    const auto& gt = batch[i]->gt_mask;
    if (pred_masks[i].size() != gt.size())
      throw std::invalid_argument("localization_metrics: mask size mismatch");
    std::uint64_t stp = 0, sfp = 0, sfn = 0;
    for (size_t p = 0; p < gt.size(); ++p) {
      bool pr = pred_masks[i][p] != 0, g = gt[p] != 0;
      stp += pr && g;
      sfp += pr && !g;
      sfn += !pr && g;
    }
    tp += stp;
    fp += sfp;
    fn += sfn;
    double sdenom = static_cast<double>(2 * stp + sfp + sfn);
    f1_sum += sdenom == 0 ? 0.0 : 2.0 * stp / sdenom;
    double sunion = static_cast<double>(stp + sfp + sfn);
    iou_sum += sunion == 0 ? 0.0 : static_cast<double>(stp) / sunion;
    ++manipulated;
  }
  if (manipulated == 0) return std::nullopt;

  LocalizationScores s;
  if (macro) {
    s.f1 = f1_sum / manipulated;
    s.iou = iou_sum / manipulated;
  } else {
    double denom = static_cast<double>(2 * tp + fp + fn);
    s.f1 = denom == 0 ? 0.0 : 2.0 * tp / denom;
    double uni = static_cast<double>(tp + fp + fn);
    s.iou = uni == 0 ? 0.0 : static_cast<double>(tp) / uni;
  }
  return s;
}

DetectionScores detection_metrics(const std::vector<std::array<double, 2>>& logits,
                                  const std::vector<int>& labels) {
  DetectionScores d;
  d.acc = accuracy(logits, labels);
  std::vector<double> scores(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) scores[i] = fake_probability(logits[i]);
  d.auc = auc_rank(scores, labels);
  return d;
}

}  // namespace monfap
