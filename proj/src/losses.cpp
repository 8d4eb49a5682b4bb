#include "monfap/losses.hpp"

#include <stdexcept>

namespace monfap {

Tensor image_loss(const Tensor& y, int label) {
  return cross_entropy_rows(reshape(y, {1, 2}), {label});
}

namespace {

std::vector<std::uint8_t> mask_at(const Sample& s, int h, int w) {
  return downsample_mask_nn(s.gt_mask, s.h, s.w, h, w);
}

// Mean of per-sample losses within one label group; undefined Tensor when the
// group is empty.
template <typename PerSample>
Tensor group_mean(const std::vector<const Sample*>& batch, int label,
                  PerSample&& per_sample) {
  Tensor acc;
  int count = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->label != label) continue;
    Tensor l = per_sample(i);
    acc = count == 0 ? l : add(acc, l);
    ++count;
  }
  if (count > 1) acc = mul_scalar(acc, 1.0 / count);
  return acc;
}

template <typename PerSample>
Tensor weighted_groups(const std::vector<const Sample*>& batch, Scalar lambda,
                       PerSample&& per_sample) {
  Tensor genuine = group_mean(batch, 0, per_sample);
  Tensor manip = group_mean(batch, 1, per_sample);
  if (!genuine.defined() && !manip.defined()) return Tensor::scalar(0.0);
  if (!manip.defined()) return genuine;
  Tensor weighted = mul_scalar(manip, lambda);
  return genuine.defined() ? add(genuine, weighted) : weighted;
}

}  // namespace

Tensor pixel_ce(const Tensor& m, const Sample& s) {
  int h = m.dim(1), w = m.dim(2);
  auto gt = mask_at(s, h, w);
  std::vector<int> targets(gt.begin(), gt.end());
  Tensor rows = transpose2d(reshape(m, {2, h * w}));
  return cross_entropy_rows(rows, targets);
}

Tensor pixel_bce(const Tensor& logits, const Sample& s) {
  int h = logits.dim(1), w = logits.dim(2);
  auto gt = mask_at(s, h, w);
  std::vector<Scalar> targets(gt.begin(), gt.end());
  return bce_with_logits(reshape(logits, {h * w}), targets);
}

Tensor weighted_pixel_loss(const std::vector<Tensor>& m_batch,
                           const std::vector<const Sample*>& batch,
                           Scalar lambda) {
  if (m_batch.size() != batch.size())
    throw std::invalid_argument("weighted_pixel_loss: batch size mismatch");
  return weighted_groups(batch, lambda, [&](size_t i) {
    return pixel_ce(m_batch[i], *batch[i]);
  });
}

Tensor aux_loss(const std::vector<std::array<Tensor, 4>>& aux_batch,
                const std::vector<const Sample*>& batch, Scalar lambda) {
  if (aux_batch.size() != batch.size())
    throw std::invalid_argument("aux_loss: batch size mismatch");
  Tensor acc;
  for (int stage = 0; stage < 4; ++stage) {
    Tensor l = weighted_groups(batch, lambda, [&](size_t i) {
      return pixel_bce(aux_batch[i][stage], *batch[i]);
    });
    acc = stage == 0 ? l : add(acc, l);
  }
  return mul_scalar(acc, 0.25);
}

LossBundle total_loss(const std::vector<Tensor>& y_batch,
                      const std::vector<Tensor>& m_batch,
                      const std::vector<std::array<Tensor, 4>>& aux_batch,
                      const Tensor& mone,
                      const std::vector<const Sample*>& batch, Scalar lambda) {
  if (batch.empty()) throw std::invalid_argument("total_loss: empty batch");
  LossBundle b;
  for (size_t i = 0; i < batch.size(); ++i) {
    Tensor l = image_loss(y_batch[i], batch[i]->label);
    b.l_img = i == 0 ? l : add(b.l_img, l);
  }
  if (batch.size() > 1) b.l_img = mul_scalar(b.l_img, 1.0 / batch.size());
  b.l_pix = weighted_pixel_loss(m_batch, batch, lambda);
  b.l_aux = aux_loss(aux_batch, batch, lambda);
  b.l_mone = mone.defined() ? mone : Tensor::scalar(0.0);
  b.total = add(add(add(b.l_img, b.l_pix), b.l_aux), b.l_mone);
  return b;
}

}  // namespace monfap
