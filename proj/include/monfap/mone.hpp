#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "monfap/nn.hpp"
#include "monfap/noise_experts.hpp"

namespace monfap {

// Noisy top-k gate over the four noise experts. Expert order is fixed:
// 0 = HF, 1 = SRM, 2 = Bayar, 3 = CD.
inline constexpr int kNumExperts = 4;

struct GateDecision {
  std::array<Scalar, 4> weights{};     // convex, exactly 0 outside the top-k
  std::array<Scalar, 4> logits{};      // pre-softmax H(x)
  std::array<Scalar, 4> noise_draw{};  // standard-normal samples, 0 at eval
  Tensor weight_tensor;                // [4], differentiable view of weights
};

struct GateParams {
  LinearLayer f_g;      // C -> 4
  LinearLayer f_noise;  // C -> 4
  int k = 4;

  GateParams() = default;
  GateParams(ParamStore& ps, const std::string& name, int channels, int k,
             Rng& rng);
};

// Pooled-feature gate: logits x_g = F_g(avg(fmap)) get Softplus-scaled
// Gaussian noise during training, then only the k largest survive a softmax
// (the rest are exactly zero and receive no gradient). Ties keep the lower
// expert index.
GateDecision gate(const Tensor& fmap, const GateParams& params, bool training,
                  Rng& rng);

// Batch-balance penalty: w_im * CV^2 of the per-expert gate-weight totals,
// population variance, 0 when the mean total is 0.
Tensor importance_loss(const std::vector<GateDecision>& decisions, Scalar w_im);

// One mixture level: the four experts, an always-on shared 3x3 convolution,
// and the gate, all sized for a fixed channel count.
struct MoneLevel {
  SrmConv srm;
  HfConv hf;
  BayarConv bayar;
  CdConv cd;
  Conv2dLayer shared;
  GateParams gp;
  Scalar w_im = 0.1;

  MoneLevel() = default;
  MoneLevel(ParamStore& ps, const std::string& name, int channels, int k,
            Scalar w_im, Scalar theta, Rng& rng);

  // y = sum_n G_n * NE_n(x) + SE(x); zero-weight experts are skipped, which is
  // gradient-identical to evaluating them.
  std::pair<Tensor, GateDecision> forward(const Tensor& fmap, bool training,
                                          Rng& rng) const;
};

// Multi-level wrapper: one independent MoneLevel per pyramid level.
struct MnmModule {
  std::array<MoneLevel, 4> levels;

  MnmModule() = default;
  MnmModule(ParamStore& ps, int c, int k, Scalar w_im, Scalar theta, Rng& rng);

  struct Output {
    std::array<Tensor, 4> r;
    std::array<GateDecision, 4> decisions;
  };
  Output forward(const std::array<Tensor, 4>& pyramid, bool training,
                 Rng& rng) const;
};

}  // namespace monfap
