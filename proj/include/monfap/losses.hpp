#pragma once

#include <array>
#include <vector>

#include "monfap/sample.hpp"
#include "monfap/tensor.hpp"

namespace monfap {

// Loss components for one batch. total is the plain, unweighted sum of the
// four terms; the lambda weighting lives inside l_pix and l_aux.
struct LossBundle {
  Tensor l_img, l_pix, l_aux, l_mone, total;
};

// Two-class cross-entropy of the image-level logits.
Tensor image_loss(const Tensor& y, int label);

// Mean per-pixel cross-entropy of the two-channel mask logits [2,h,w] against
// the sample's mask, nearest-neighbor downsampled to h x w.
Tensor pixel_ce(const Tensor& m, const Sample& s);

// Mean binary cross-entropy of single-channel logits [1,h,w] against the
// downsampled mask.
Tensor pixel_bce(const Tensor& logits, const Sample& s);

// Sample-level weighted pixel loss: mean per-sample CE within the genuine and
// manipulated groups, combined as CE_genuine + lambda * CE_manipulated. An
// empty group contributes 0.
Tensor weighted_pixel_loss(const std::vector<Tensor>& m_batch,
                           const std::vector<const Sample*>& batch, Scalar lambda);

// The same weighting applied per auxiliary stage (binary CE), averaged over
// the four stages.
Tensor aux_loss(const std::vector<std::array<Tensor, 4>>& aux_batch,
                const std::vector<const Sample*>& batch, Scalar lambda);

// Assembles the multi-task bundle; mone may be undefined (treated as 0).
LossBundle total_loss(const std::vector<Tensor>& y_batch,
                      const std::vector<Tensor>& m_batch,
                      const std::vector<std::array<Tensor, 4>>& aux_batch,
                      const Tensor& mone,
                      const std::vector<const Sample*>& batch, Scalar lambda);

}  // namespace monfap
