#include "monfap/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace monfap {

Tensor ParamStore::create(const std::string& name, std::vector<int> shape) {
  Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  register_tensor(name, t);
  return t;
}

void ParamStore::register_tensor(const std::string& name, Tensor t) {
  if (find(name)) throw std::logic_error("duplicate parameter name: " + name);
  entries_.emplace_back(name, std::move(t));
}

Tensor* ParamStore::find(const std::string& name) {
  for (auto& [n, t] : entries_)
    if (n == name) return &t;
  return nullptr;
}

size_t ParamStore::numel() const {
  size_t n = 0;
  for (const auto& [name, t] : entries_) n += static_cast<size_t>(t.size());
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

void init_fan_in(Tensor& w, int fan_in, Rng& rng) {
  const Scalar s = Scalar{1} / std::sqrt(static_cast<Scalar>(fan_in));
  for (auto& v : w.value()) v = rng.normal(0.0, s);
}

Conv2dLayer::Conv2dLayer(ParamStore& ps, const std::string& name, int cin, int cout,
                         int k, int stride_, int pad_, bool with_bias, Rng& rng)
    : stride(stride_), pad(pad_) {
  weight = ps.create(name + ".weight", {cout, cin, k, k});
  init_fan_in(weight, cin * k * k, rng);
  if (with_bias) bias = ps.create(name + ".bias", {cout});
}

Tensor Conv2dLayer::forward(const Tensor& x) const {
  return conv2d(x, weight, bias, stride, pad);
}

LinearLayer::LinearLayer(ParamStore& ps, const std::string& name, int in, int out,
                         Rng& rng) {
  weight = ps.create(name + ".weight", {out, in});
  init_fan_in(weight, in, rng);
  bias = ps.create(name + ".bias", {out});
}

Tensor LinearLayer::forward(const Tensor& x) const { return linear(x, weight, bias); }

Tensor LinearLayer::forward_vec(const Tensor& x) const {
  return reshape(linear(reshape(x, {1, x.size()}), weight, bias), {weight.dim(0)});
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& name, int width) {
  gamma = ps.create(name + ".gamma", {width});
  for (auto& v : gamma.value()) v = 1;
  beta = ps.create(name + ".beta", {width});
}

Tensor LayerNorm::rows(const Tensor& x) const {
  return layer_norm_rows(x, gamma, beta);
}

Tensor LayerNorm::channels(const Tensor& x) const {
  return layer_norm_channels(x, gamma, beta);
}

FeedForward::FeedForward(ParamStore& ps, const std::string& name, int width,
                         int expansion, Rng& rng)
    : fc1(ps, name + ".fc1", width, width * expansion, rng),
      fc2(ps, name + ".fc2", width * expansion, width, rng) {}

Tensor FeedForward::forward(const Tensor& x) const {
  return fc2.forward(gelu(fc1.forward(x)));
}

}  // namespace monfap
