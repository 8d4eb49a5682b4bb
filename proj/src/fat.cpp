#include "monfap/fat.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace monfap {

std::vector<Scalar> build_attention_bias(const AttentionMask& mask,
                                         bool fake_token, bool* empty_fallback) {
  const Scalar ninf = -std::numeric_limits<Scalar>::infinity();
  const std::uint8_t admit = fake_token ? 1 : 0;
  size_t n = mask.grid.size();
  std::vector<Scalar> bias(n, 0.0);
  bool any = false;
  for (size_t i = 0; i < n; ++i) {
    if (mask.grid[i] == admit)
      any = true;
    else
      bias[i] = ninf;
  }
  if (!any) {
    std::fill(bias.begin(), bias.end(), 0.0);
    if (empty_fallback) *empty_fallback = true;
  }
  return bias;
}

int attention_heads_for_width(int d) {
  if (d >= 64) return 8;
  return std::max(1, d / 8);
}

AttentionBlock::AttentionBlock(ParamStore& ps, const std::string& name, int width,
                               Rng& rng, int heads_override)
    : norm_q(ps, name + ".norm_q", width),
      norm_kv(ps, name + ".norm_kv", width),
      wq(ps, name + ".wq", width, width, rng),
      wk(ps, name + ".wk", width, width, rng),
      wv(ps, name + ".wv", width, width, rng),
      wo(ps, name + ".wo", width, width, rng),
      heads(heads_override > 0 ? heads_override : attention_heads_for_width(width)) {
  if (width % heads != 0)
    throw std::invalid_argument("attention: width " + std::to_string(width) +
                                " not divisible by " + std::to_string(heads) +
                                " heads");
}

namespace {

Tensor attend(const AttentionBlock& blk, const Tensor& qx, const Tensor& cx,
              const std::vector<Scalar>* bias, std::vector<Tensor>* attn_out) {
  int d = qx.dim(1);
  int dh = d / blk.heads;
  Tensor q = blk.wq.forward(qx);
  Tensor k = blk.wk.forward(cx);
  Tensor v = blk.wv.forward(cx);
  Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(dh));

  std::vector<Tensor> outs;
  outs.reserve(static_cast<size_t>(blk.heads));
  for (int h = 0; h < blk.heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    Tensor scores = mul_scalar(matmul_nt(qh, kh), scale);
    Tensor attn = bias ? softmax_rows_biased(scores, *bias) : softmax_rows(scores);
    if (attn_out) attn_out->push_back(attn);
    outs.push_back(matmul(attn, vh));
  }
  return blk.wo.forward(blk.heads == 1 ? outs[0] : concat_cols(outs));
}

}  // namespace

Tensor AttentionBlock::forward(const Tensor& queries, const Tensor& context,
                               const std::vector<Scalar>* bias,
                               std::vector<Tensor>* attn_out) const {
  return attend(*this, norm_q.rows(queries), norm_kv.rows(context), bias,
                attn_out);
}

Tensor AttentionBlock::self(const Tensor& x) const {
  Tensor n = norm_q.rows(x);
  return attend(*this, n, n, nullptr, nullptr);
}

FatStage::FatStage(ParamStore& ps, const std::string& name, int width, Rng& rng,
                   int heads_override)
    : width(width) {
  for (int r = 0; r < 2; ++r) {
    std::string base = name + ".r" + std::to_string(r);
    auto& rep = repeats[static_cast<size_t>(r)];
    rep.self_attn = AttentionBlock(ps, base + ".self", width, rng, heads_override);
    rep.tok_cross = AttentionBlock(ps, base + ".tok_cross", width, rng, heads_override);
    rep.img_cross = AttentionBlock(ps, base + ".img_cross", width, rng, heads_override);
    rep.tok_ffn_norm = LayerNorm(ps, base + ".tok_ffn_norm", width);
    rep.img_ffn_norm = LayerNorm(ps, base + ".img_ffn_norm", width);
    rep.tok_ffn = FeedForward(ps, base + ".tok_ffn", width, 4, rng);
    rep.img_ffn = FeedForward(ps, base + ".img_ffn", width, 4, rng);
  }
  final_cross = AttentionBlock(ps, name + ".final_cross", width, rng, heads_override);
}

std::pair<Tensor, Tensor> FatStage::forward(const Tensor& tokens,
                                            const Tensor& features,
                                            const AttentionMask& mask,
                                            int* empty_fallbacks) const {
  if (tokens.dim(1) != features.dim(0))
    throw std::invalid_argument("fat: token width " +
                                std::to_string(tokens.dim(1)) +
                                " != feature channels " +
                                std::to_string(features.dim(0)));
  int h = features.dim(1), w = features.dim(2);
  if (mask.h != h || mask.w != w)
    throw std::invalid_argument("fat: mask shape mismatch");

  bool fb_real = false, fb_fake = false;
  std::vector<Scalar> bias_real = build_attention_bias(mask, false, &fb_real);
  std::vector<Scalar> bias_fake = build_attention_bias(mask, true, &fb_fake);
  if (empty_fallbacks) *empty_fallbacks += int(fb_real) + int(fb_fake);
  // row 0 = real token, row 1 = fake token
  std::vector<Scalar> bias(bias_real);
  bias.insert(bias.end(), bias_fake.begin(), bias_fake.end());

  Tensor t = tokens;
  Tensor p = flatten_hw(features);
  for (const auto& rep : repeats) {
    t = add(t, rep.self_attn.self(t));
    t = add(t, rep.tok_cross.forward(t, p, &bias));
    t = add(t, rep.tok_ffn.forward(rep.tok_ffn_norm.rows(t)));
    p = add(p, rep.img_cross.forward(p, t, nullptr));
    p = add(p, rep.img_ffn.forward(rep.img_ffn_norm.rows(p)));
  }
  t = add(t, final_cross.forward(t, p, &bias));
  return {t, unflatten_hw(p, h, w)};
}

}  // namespace monfap
