#pragma once

#include <string>
#include <utility>
#include <vector>

#include "monfap/rng.hpp"
#include "monfap/tensor.hpp"

namespace monfap {

// Flat registry of named trainable tensors. Modules register their parameters
// at construction; the optimizer and checkpoint code iterate it by name.
class ParamStore {
 public:
  Tensor create(const std::string& name, std::vector<int> shape);
  void register_tensor(const std::string& name, Tensor t);

  Tensor* find(const std::string& name);
  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  size_t count() const { return entries_.size(); }
  size_t numel() const;
  void zero_grads();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// Fan-in scaled normal init, zero biases.
void init_fan_in(Tensor& w, int fan_in, Rng& rng);

struct Conv2dLayer {
  Tensor weight;  // [Cout,Cin,k,k]
  Tensor bias;    // [Cout] (may be undefined)
  int stride = 1;
  int pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(ParamStore& ps, const std::string& name, int cin, int cout, int k,
              int stride, int pad, bool with_bias, Rng& rng);
  Tensor forward(const Tensor& x) const;
};

struct LinearLayer {
  Tensor weight;  // [out,in]
  Tensor bias;    // [out]

  LinearLayer() = default;
  LinearLayer(ParamStore& ps, const std::string& name, int in, int out, Rng& rng);
  Tensor forward(const Tensor& x) const;           // x [M,in]
  Tensor forward_vec(const Tensor& x) const;       // x [in] -> [out]
};

struct LayerNorm {
  Tensor gamma, beta;

  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, int width);
  Tensor rows(const Tensor& x) const;      // [M,N] normalized over N
  Tensor channels(const Tensor& x) const;  // [C,H,W] normalized over C
};

// Two-layer feed-forward with GELU, pre-norm residual is assembled by callers.
struct FeedForward {
  LinearLayer fc1, fc2;

  FeedForward() = default;
  FeedForward(ParamStore& ps, const std::string& name, int width, int expansion,
              Rng& rng);
  Tensor forward(const Tensor& x) const;  // [M,width]
};

}  // namespace monfap
