#include "monfap/fup.hpp"

#include <cmath>
#include <stdexcept>

namespace monfap {

AuxLocalization aux_localize(const Tensor& features, const Conv2dLayer& head,
                             Scalar threshold) {
  AuxLocalization out;
  out.logits = head.forward(features);
  out.mask.h = out.logits.dim(1);
  out.mask.w = out.logits.dim(2);
  out.mask.threshold_used = threshold;
  out.mask.grid.resize(out.logits.value().size());
  for (size_t i = 0; i < out.mask.grid.size(); ++i) {
    Scalar p = 1.0 / (1.0 + std::exp(-out.logits.value()[i]));
    out.mask.grid[i] = p >= threshold ? 1 : 0;
  }
  return out;
}

Tensor positional_encoding_2d(int d, int h, int w) {
  Tensor pe = Tensor::zeros({d, h, w});
  int quarter = d / 4;
  if (quarter == 0) return pe;
  auto& v = pe.value();
  for (int j = 0; j < quarter; ++j) {
    Scalar freq = std::pow(10000.0, -static_cast<Scalar>(j) / quarter);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        size_t at = static_cast<size_t>(y) * w + x;
        size_t plane = static_cast<size_t>(h) * w;
        v[(0 * quarter + j) * plane + at] = std::sin(y * freq);
        v[(1 * quarter + j) * plane + at] = std::cos(y * freq);
        v[(2 * quarter + j) * plane + at] = std::sin(x * freq);
        v[(3 * quarter + j) * plane + at] = std::cos(x * freq);
      }
  }
  return pe;
}

FupModule::FupModule(ParamStore& ps, int c, Scalar mask_threshold,
                     bool positional_encoding, Rng& rng, int heads_override)
    : mask_threshold(mask_threshold), positional_encoding(positional_encoding) {
  int d0 = 8 * c;
  tokens0 = ps.create("fup.tokens0", {2, d0});
  for (auto& t : tokens0.value()) t = rng.normal() / std::sqrt(d0);

  for (int i = 0; i < 4; ++i) {
    int d = d0 >> i;
    stages[i] = FatStage(ps, "fup.stage" + std::to_string(i), d, rng,
                         heads_override);
    aux_head[i] = Conv2dLayer(ps, "fup.aux" + std::to_string(i), d, 1, 1, 1, 0,
                              true, rng);
    if (i < 3) {
      token_proj[i] =
          LinearLayer(ps, "fup.tok_proj" + std::to_string(i), d, d / 2, rng);
      up_proj[i] = Conv2dLayer(ps, "fup.up_proj" + std::to_string(i), d, d / 2, 1,
                               1, 0, true, rng);
    }
  }
  head_fc1 = LinearLayer(ps, "fup.head_fc1", c, c, rng);
  head_fc2 = LinearLayer(ps, "fup.head_fc2", c, 2, rng);
}

namespace {

void check_finite(const Tensor& t, int stage) {
  for (Scalar v : t.value())
    if (!std::isfinite(v))
      throw std::runtime_error("fup: non-finite feature value at stage " +
                               std::to_string(stage));
}

}  // namespace

FupOutput FupModule::forward(const std::array<Tensor, 4>& pyramid,
                             const std::array<Tensor, 4>& noise) const {
  for (int i = 0; i < 4; ++i)
    if (pyramid[i].shape() != noise[i].shape())
      throw std::invalid_argument("fup: noise level " + std::to_string(i) +
                                  " shape " + shape_str(noise[i].shape()) +
                                  " != feature shape " +
                                  shape_str(pyramid[i].shape()));

  FupOutput out;
  Tensor t = tokens0;
  Tensor p = add(pyramid[3], noise[3]);
  for (int i = 0; i < 4; ++i) {
    if (positional_encoding)
      p = add(p, positional_encoding_2d(p.dim(0), p.dim(1), p.dim(2)));
    AuxLocalization aux = aux_localize(p, aux_head[i], mask_threshold);
    out.aux_logits[i] = aux.logits;
    std::tie(t, p) = stages[i].forward(t, p, aux.mask, &out.empty_mask_fallbacks);
    check_finite(p, i);
    if (i < 3) {
      t = token_proj[i].forward(t);
      p = up_proj[i].forward(upsample_bilinear2x(p));
      p = add(p, noise[2 - i]);
    }
  }

  Tensor avg = mean_rows(t);  // mean over the two tokens
  out.y = head_fc2.forward_vec(gelu(head_fc1.forward_vec(avg)));
  int h = p.dim(1), w = p.dim(2);
  out.m = reshape(matmul_nt(t, flatten_hw(p)), {2, h, w});
  return out;
}

}  // namespace monfap
