#pragma once

#include <array>
#include <string>

#include "monfap/nn.hpp"

namespace monfap {

// The four noise-extraction convolutions. All are shape-preserving
// (same-padded) and suppress constant inputs by construction: SRM and HF
// kernels are zero-sum, Bayar kernels respond with -1+1=0 to constants, and
// CD with theta=1 cancels the center contribution exactly.

// Canonical 5x5 steganalysis residual kernels, row-major, pre-scaled.
const std::array<std::array<Scalar, 25>, 3>& srm_base_kernels();

// Frozen depthwise convolution; the 3 base kernels tiled cyclically across
// channels. Never registered as trainable.
struct SrmConv {
  Tensor kernels;  // [C,5,5]

  SrmConv() = default;
  explicit SrmConv(int channels);
  Tensor forward(const Tensor& x) const;
};

// Trainable 3x3 convolution whose kernels are kept zero-sum per (out,in)
// slice by subtracting the slice mean after each update.
struct HfConv {
  Tensor weight;  // [C,C,3,3]

  HfConv() = default;
  HfConv(ParamStore& ps, const std::string& name, int channels, Rng& rng);
  Tensor forward(const Tensor& x) const;
};

// Trainable 5x5 convolution under the constrained-kernel rule: per output
// filter the center weight (spatial middle of the diagonal input slice) is -1
// and all remaining weights sum to 1.
struct BayarConv {
  Tensor weight;  // [C,C,5,5]

  BayarConv() = default;
  BayarConv(ParamStore& ps, const std::string& name, int channels, Rng& rng);
  Tensor forward(const Tensor& x) const;
};

// Central-difference convolution:
//   y(p) = sum_w k(w) x(p+w) - theta * x(p) * sum_w k(w)
// per (out,in) slice, so theta=0 is a vanilla convolution and theta=1 kills
// constant inputs.
struct CdConv {
  Tensor weight;  // [C,C,3,3]
  Scalar theta = 0.7;

  CdConv() = default;
  CdConv(ParamStore& ps, const std::string& name, int channels, Scalar theta,
         Rng& rng);
  Tensor forward(const Tensor& x) const;
};

// Constraint projections. Applied to raw kernel values outside the autodiff
// graph, after every optimizer step. Both are idempotent.
void hf_project(Tensor& weight);
// Returns the number of degenerate filters (non-center sum ~ 0) that were
// reinitialized to the uniform fallback.
int bayar_project(Tensor& weight);

}  // namespace monfap
