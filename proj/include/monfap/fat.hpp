#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "monfap/nn.hpp"

namespace monfap {

// Tokens travel as a [2,D] tensor; row 0 is the real token, row 1 the fake
// token. Features travel as [D,h,w] and are flattened to h*w rows inside the
// layer.

struct AttentionMask {
  std::vector<std::uint8_t> grid;  // h*w entries, values 0/1
  int h = 0, w = 0;
  Scalar threshold_used = 0.5;
};

// Additive attention bias over the h*w positions for one token: 0 where the
// token's region admits attention, -inf elsewhere. The fake token attends
// inside the mask, the real token outside it. An empty admissible region
// falls back to an all-zero bias (unmasked attention); *empty_fallback is set
// when that happens.
std::vector<Scalar> build_attention_bias(const AttentionMask& mask,
                                         bool fake_token,
                                         bool* empty_fallback = nullptr);

int attention_heads_for_width(int d);

// Pre-norm residual attention block. Callers add the residual; forward()
// returns only the update. The query stream and the context get separate
// norms; self-attention uses the query norm for both.
struct AttentionBlock {
  LayerNorm norm_q, norm_kv;
  LinearLayer wq, wk, wv, wo;
  int heads = 1;

  AttentionBlock() = default;
  // heads_override 0 picks the width-derived head count; a positive value must
  // divide the width.
  AttentionBlock(ParamStore& ps, const std::string& name, int width, Rng& rng,
                 int heads_override = 0);

  // queries [M,D], context [N,D]; bias, when given, has M*N entries of 0/-inf.
  // attn_out, when given, receives the per-head attention weights ([M,N] each).
  Tensor forward(const Tensor& queries, const Tensor& context,
                 const std::vector<Scalar>* bias,
                 std::vector<Tensor>* attn_out = nullptr) const;
  Tensor self(const Tensor& x) const;
};

// One forgery-aware transformer stage: twice (token self-attention, masked
// token->image cross-attention, token feed-forward, vanilla image->token
// cross-attention, feature feed-forward), then a final masked cross-attention.
struct FatStage {
  struct Repeat {
    AttentionBlock self_attn, tok_cross, img_cross;
    LayerNorm tok_ffn_norm, img_ffn_norm;
    FeedForward tok_ffn, img_ffn;
  };
  std::array<Repeat, 2> repeats;
  AttentionBlock final_cross;
  int width = 0;

  FatStage() = default;
  FatStage(ParamStore& ps, const std::string& name, int width, Rng& rng,
           int heads_override = 0);

  // tokens [2,D], features [D,h,w] -> updated (tokens, features).
  // empty_fallbacks, when given, accumulates the count of all-zero bias
  // fallbacks used by the masked attentions.
  std::pair<Tensor, Tensor> forward(const Tensor& tokens, const Tensor& features,
                                    const AttentionMask& mask,
                                    int* empty_fallbacks = nullptr) const;
};

}  // namespace monfap
