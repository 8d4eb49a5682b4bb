#include "monfap/noise_experts.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace monfap {

namespace {

void check_channels(const Tensor& x, int channels, const char* who) {
  if (x.ndim() != 3 || x.dim(0) != channels)
    throw std::invalid_argument(std::string(who) + ": expected [" +
                                std::to_string(channels) + ",h,w], got " +
                                shape_str(x.shape()));
}

// Per-slice spatial kernel sums as a differentiable [Cout,Cin,1,1] tensor.
Tensor slice_sums_1x1(const Tensor& w) {
  int cout = w.dim(0), cin = w.dim(1), kk = w.dim(2) * w.dim(3);
  Tensor flat = reshape(w, {cout * cin, kk});
  Tensor ones = Tensor::full({kk, 1}, 1.0);
  return reshape(matmul(flat, ones), {cout, cin, 1, 1});
}

}  // namespace

const std::array<std::array<Scalar, 25>, 3>& srm_base_kernels() {
  static const std::array<std::array<Scalar, 25>, 3> kernels = [] {
    std::array<std::array<Scalar, 25>, 3> k{};
    const Scalar kv[25] = {-1, 2,  -2,  2,  -1,  //
                           2,  -6, 8,   -6, 2,   //
                           -2, 8,  -12, 8,  -2,  //
                           2,  -6, 8,   -6, 2,   //
                           -1, 2,  -2,  2,  -1};
    const Scalar sq[25] = {0, 0,  0,  0,  0,  //
                           0, -1, 2,  -1, 0,  //
                           0, 2,  -4, 2,  0,  //
                           0, -1, 2,  -1, 0,  //
                           0, 0,  0,  0,  0};
    const Scalar so[25] = {0, 0, 0,  0, 0,  //
                           0, 0, 0,  0, 0,  //
                           0, 1, -2, 1, 0,  //
                           0, 0, 0,  0, 0,  //
                           0, 0, 0,  0, 0};
    for (int i = 0; i < 25; ++i) {
      k[0][i] = kv[i] / 12.0;
      k[1][i] = sq[i] / 4.0;
      k[2][i] = so[i] / 2.0;
    }
    return k;
  }();
  return kernels;
}

SrmConv::SrmConv(int channels) {
  kernels = Tensor::zeros({channels, 5, 5});
  const auto& base = srm_base_kernels();
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < 25; ++i) kernels.value()[c * 25 + i] = base[c % 3][i];
}

Tensor SrmConv::forward(const Tensor& x) const {
  check_channels(x, kernels.dim(0), "srm_conv");
  return depthwise_conv2d(x, kernels, 2);
}

HfConv::HfConv(ParamStore& ps, const std::string& name, int channels, Rng& rng) {
  weight = ps.create(name + ".weight", {channels, channels, 3, 3});
  init_fan_in(weight, channels * 9, rng);
  hf_project(weight);
}

Tensor HfConv::forward(const Tensor& x) const {
  check_channels(x, weight.dim(1), "hf_conv");
  return conv2d(x, weight, Tensor(), 1, 1);
}

BayarConv::BayarConv(ParamStore& ps, const std::string& name, int channels,
                     Rng& rng) {
  weight = ps.create(name + ".weight", {channels, channels, 5, 5});
  // Start near the constraint manifold (local mean minus center) instead of
  // fan-in noise: the projection divides by the non-center sum, and a sum near
  // zero would blow the filter up.
  int n = channels * 25;
  for (auto& v : weight.value()) v = (1.0 + 0.1 * rng.normal()) / (n - 1);
  bayar_project(weight);
}

Tensor BayarConv::forward(const Tensor& x) const {
  check_channels(x, weight.dim(1), "bayar_conv");
  return conv2d(x, weight, Tensor(), 1, 2);
}

CdConv::CdConv(ParamStore& ps, const std::string& name, int channels, Scalar theta,
               Rng& rng)
    : theta(theta) {
  if (theta < 0.0 || theta > 1.0)
    throw std::invalid_argument("cd_conv: theta must be in [0,1], got " +
                                std::to_string(theta));
  weight = ps.create(name + ".weight", {channels, channels, 3, 3});
  init_fan_in(weight, channels * 9, rng);
}

Tensor CdConv::forward(const Tensor& x) const {
  check_channels(x, weight.dim(1), "cd_conv");
  Tensor vanilla = conv2d(x, weight, Tensor(), 1, 1);
  if (theta == 0.0) return vanilla;
  Tensor center = conv2d(x, slice_sums_1x1(weight), Tensor(), 1, 0);
  return sub(vanilla, mul_scalar(center, theta));
}

// Both projections skip kernels that already satisfy the constraint to within
// a few ulps; rescaling such a kernel again would perturb it by rounding
// noise, and the skip is what makes re-application bit-exact.

void hf_project(Tensor& weight) {
  int slices = weight.dim(0) * weight.dim(1);
  int kk = weight.dim(2) * weight.dim(3);
  auto& v = weight.value();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  for (int s = 0; s < slices; ++s) {
    Scalar* k = &v[static_cast<size_t>(s) * kk];
    Scalar sum = 0, sumabs = 0;
    for (int i = 0; i < kk; ++i) {
      sum += k[i];
      sumabs += std::abs(k[i]);
    }
    Scalar m = sum / kk;
    if (std::abs(m) <= 64 * eps * (1.0 + sumabs / kk)) continue;
    for (int i = 0; i < kk; ++i) k[i] -= m;
  }
}

int bayar_project(Tensor& weight) {
  int cout = weight.dim(0), cin = weight.dim(1);
  int kh = weight.dim(2), kw = weight.dim(3);
  int n = cin * kh * kw;
  int degenerate = 0;
  auto& v = weight.value();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  for (int o = 0; o < cout; ++o) {
    Scalar* k = &v[static_cast<size_t>(o) * n];
    // one constraint per output-channel filter; its center sits at the spatial
    // middle of the diagonal input slice
    int center = (o % cin) * kh * kw + (kh / 2) * kw + kw / 2;
    Scalar sum = 0, sumabs = 0;
    for (int i = 0; i < n; ++i)
      if (i != center) {
        sum += k[i];
        sumabs += std::abs(k[i]);
      }
    if (k[center] == -1.0 && std::abs(sum - 1.0) <= 64 * eps * (1.0 + sumabs))
      continue;
    if (std::abs(sum) <= 1e-12) {
      ++degenerate;
      for (int i = 0; i < n; ++i) k[i] = 1.0 / (n - 1);
    } else {
      for (int i = 0; i < n; ++i)
        if (i != center) k[i] /= sum;
    }
    k[center] = -1.0;
  }
  return degenerate;
}

}  // namespace monfap
