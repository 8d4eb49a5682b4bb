#include "monfap/model.hpp"

namespace monfap {

namespace {

Rng init_stream(std::uint64_t seed) { return Rng(seed).derive("init"); }

}  // namespace

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg(cfg) {
  Rng rng = init_stream(seed);
  backbone = Backbone(params, cfg.c, rng);
  // Built even when unused so both ablation arms share the init stream and
  // start from identical predictor weights.
  mnm = MnmModule(params, cfg.c, cfg.k, cfg.w_im, cfg.theta, rng);
  fup = FupModule(params, cfg.c, cfg.mask_threshold, cfg.positional_encoding, rng,
                  cfg.heads);
}

Model::Forward Model::forward(const Tensor& image, bool training,
                              Rng& gate_rng) const {
  Forward out;
  std::array<Tensor, 4> f = backbone.forward(image);

  std::array<Tensor, 4> r;
  if (cfg.use_mnm) {
    MnmModule::Output mo = mnm.forward(f, training, gate_rng);
    r = mo.r;
    out.decisions.assign(mo.decisions.begin(), mo.decisions.end());
  } else {
    for (int i = 0; i < 4; ++i) r[i] = Tensor::zeros(f[i].shape());
  }

  FupOutput fo = fup.forward(f, r);
  out.y = fo.y;
  out.m = fo.m;
  out.aux_logits = fo.aux_logits;
  out.empty_mask_fallbacks = fo.empty_mask_fallbacks;
  return out;
}

int Model::apply_projections() {
  int degenerate = 0;
  for (auto& level : mnm.levels) {
    hf_project(level.hf.weight);
    degenerate += bayar_project(level.bayar.weight);
  }
  return degenerate;
}

}  // namespace monfap
