#include "monfap/mone.hpp"

#include <algorithm>
#include <stdexcept>

namespace monfap {

namespace {

// Differentiable view of one element of a vector tensor, as a [1] scalar.
Tensor element(const Tensor& v, int i) {
  int n = v.size();
  return reshape(slice_cols(reshape(v, {1, n}), i, i + 1), {1});
}

}  // namespace

GateParams::GateParams(ParamStore& ps, const std::string& name, int channels,
                       int k, Rng& rng)
    : f_g(ps, name + ".f_g", channels, kNumExperts, rng),
      f_noise(ps, name + ".f_noise", channels, kNumExperts, rng),
      k(k) {
  if (k < 1 || k > kNumExperts)
    throw std::invalid_argument("gate: k must be in [1,4], got " +
                                std::to_string(k));
}

GateDecision gate(const Tensor& fmap, const GateParams& params, bool training,
                  Rng& rng) {
  Tensor pooled = global_avg_pool(fmap);
  Tensor x_g = params.f_g.forward_vec(pooled);

  GateDecision d;
  Tensor h = x_g;
  if (training) {
    Tensor draw = Tensor::zeros({kNumExperts});
    for (int i = 0; i < kNumExperts; ++i) {
      d.noise_draw[i] = rng.normal();
      draw.value()[i] = d.noise_draw[i];
    }
    Tensor x_noise = params.f_noise.forward_vec(pooled);
    h = add(x_g, mul(draw, softplus(x_noise)));
  }
  for (int i = 0; i < kNumExperts; ++i) d.logits[i] = h.value()[i];

  // top-k by value, ties resolved toward the lower index
  std::array<int, kNumExperts> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return d.logits[a] > d.logits[b];
  });
  std::vector<std::uint8_t> keep(kNumExperts, 0);
  for (int i = 0; i < params.k; ++i) keep[order[i]] = 1;

  d.weight_tensor = softmax_masked(h, keep);
  for (int i = 0; i < kNumExperts; ++i) d.weights[i] = d.weight_tensor.value()[i];
  return d;
}

Tensor importance_loss(const std::vector<GateDecision>& decisions, Scalar w_im) {
  if (decisions.empty())
    throw std::invalid_argument("importance_loss: empty batch");
  Tensor importance = decisions[0].weight_tensor;
  for (size_t i = 1; i < decisions.size(); ++i)
    importance = add(importance, decisions[i].weight_tensor);
  Tensor m = mean(importance);
  if (m.value()[0] == 0.0 || w_im == 0.0) return Tensor::scalar(0.0);
  Tensor dev = sub(importance, m);
  Tensor var = mean(square(dev));
  return mul_scalar(div(var, square(m)), w_im);
}

MoneLevel::MoneLevel(ParamStore& ps, const std::string& name, int channels, int k,
                     Scalar w_im, Scalar theta, Rng& rng)
    : srm(channels),
      hf(ps, name + ".hf", channels, rng),
      bayar(ps, name + ".bayar", channels, rng),
      cd(ps, name + ".cd", channels, theta, rng),
      shared(ps, name + ".shared", channels, channels, 3, 1, 1, true, rng),
      gp(ps, name + ".gate", channels, k, rng),
      w_im(w_im) {}

std::pair<Tensor, GateDecision> MoneLevel::forward(const Tensor& fmap,
                                                   bool training,
                                                   Rng& rng) const {
  GateDecision d = gate(fmap, gp, training, rng);
  Tensor y = shared.forward(fmap);
  for (int n = 0; n < kNumExperts; ++n) {
    if (d.weights[n] == 0.0) continue;
    Tensor out;
    switch (n) {
      case 0: out = hf.forward(fmap); break;
      case 1: out = srm.forward(fmap); break;
      case 2: out = bayar.forward(fmap); break;
      default: out = cd.forward(fmap); break;
    }
    y = add(y, mul(out, element(d.weight_tensor, n)));
  }
  return {y, d};
}

MnmModule::MnmModule(ParamStore& ps, int c, int k, Scalar w_im, Scalar theta,
                     Rng& rng) {
  for (int i = 0; i < 4; ++i)
    levels[i] = MoneLevel(ps, "mnm.l" + std::to_string(i), c << i, k, w_im,
                          theta, rng);
}

MnmModule::Output MnmModule::forward(const std::array<Tensor, 4>& pyramid,
                                     bool training, Rng& rng) const {
  Output out;
  for (int i = 0; i < 4; ++i) {
    auto [r, d] = levels[i].forward(pyramid[i], training, rng);
    out.r[i] = r;
    out.decisions[i] = d;
  }
  return out;
}

}  // namespace monfap
