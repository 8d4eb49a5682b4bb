#include "monfap/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace monfap {

AdamW::AdamW(ParamStore& params, const OptimConfig& cfg)
    : params_(&params), cfg_(cfg) {
  m_.reserve(params.count());
  v_.reserve(params.count());
  for (const auto& [name, t] : params.entries()) {
    m_.emplace_back(t.value().size(), 0.0);
    v_.emplace_back(t.value().size(), 0.0);
  }
}

double AdamW::lr_at(int iter) const {
  double frac = 1.0 - static_cast<double>(iter) / cfg_.total_iterations;
  if (frac <= 0) return 0.0;
  return cfg_.lr * std::pow(frac, cfg_.poly_power);
}

void AdamW::step(int iter) {
  ++t_;
  double lr = lr_at(iter);
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  size_t idx = 0;
  for (const auto& [name, entry] : params_->entries()) {
    Tensor t = entry;  // shared storage; mutating updates the model
    std::vector<double>& p = t.value();
    const double* g = t.has_grad() ? t.grad().data() : nullptr;
    std::vector<double>& m = m_[idx];
    std::vector<double>& v = v_[idx];
    ++idx;
    for (size_t i = 0; i < p.size(); ++i) {
      double gi = g ? g[i] : 0.0;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                    cfg_.weight_decay * p[i]);
    }
  }
}

}  // namespace monfap
